//! On-disk formats: RTTM, transcript JSONL, affinity CSV, overlap flags and
//! label JSON, utterance inventories and simulation manifests.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::simulate::{Placement, SimSession, Utterance};
use crate::timeline::{format_seconds, parse_seconds, Tick, Timeline, Turn};

/// Parse RTTM text into one timeline per file id, sorted by file id.
///
/// Only `SPEAKER` lines are read; each must have exactly ten fields.
pub fn parse_rttm(text: &str) -> Result<Vec<Timeline>> {
    let mut sessions: BTreeMap<String, Vec<Turn>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = Some(idx + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.first() != Some(&"SPEAKER") {
            continue;
        }
        if fields.len() != 10 {
            return Err(Error::format(
                lineno,
                format!("expected 10 fields in SPEAKER line, found {}", fields.len()),
            ));
        }
        let file = fields[1];
        let start = parse_seconds(fields[3]).map_err(|e| relocate(e, lineno))?;
        let dur = parse_seconds(fields[4]).map_err(|e| relocate(e, lineno))?;
        if dur <= 0 {
            return Err(Error::format(lineno, "turn duration must be positive"));
        }
        let turn = Turn::new(file, fields[7], start, start + dur).map_err(|e| relocate(e, lineno))?;
        sessions.entry(file.to_owned()).or_default().push(turn);
    }
    sessions
        .into_iter()
        .map(|(session, turns)| Timeline::new(session, turns))
        .collect()
}

fn relocate(err: Error, line: Option<usize>) -> Error {
    match err {
        Error::Format { message, .. } => Error::Format { line, message },
        Error::Input(message) => Error::Format { line, message },
        other => other,
    }
}

/// Serialize timelines as RTTM with millisecond precision.
///
/// Boundaries are rounded half up to the millisecond independently, so a turn
/// that collapses to zero length at that precision is omitted.
pub fn write_rttm(timelines: &[Timeline]) -> String {
    let mut out = String::new();
    for tl in timelines {
        for t in tl.turns() {
            let start_ms = (t.start + 5) / 10;
            let end_ms = (t.end + 5) / 10;
            if end_ms <= start_ms {
                continue;
            }
            out.push_str(&format!(
                "SPEAKER {} 1 {} {} <NA> <NA> {} <NA> <NA>\n",
                tl.session(),
                format_seconds(start_ms * 10, 3),
                format_seconds((end_ms - start_ms) * 10, 3),
                t.speaker
            ));
        }
    }
    out
}

/// One transcribed segment from a JSONL transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub session: String,
    pub speaker: String,
    pub start: Tick,
    pub end: Tick,
    pub text: String,
}

impl TranscriptSegment {
    /// Whitespace tokenization, case preserved.
    pub fn words(&self) -> Vec<&str> {
        self.text.split_whitespace().collect()
    }
}

/// A hypothesis segment routed to one output channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSegment {
    pub channel: usize,
    pub segment: TranscriptSegment,
}

fn json_lines(text: &str) -> impl Iterator<Item = (usize, Result<serde_json::Map<String, Value>>)> + '_ {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, line)| {
            let lineno = idx + 1;
            let parsed = match serde_json::from_str::<Value>(line) {
                Ok(Value::Object(map)) => Ok(map),
                Ok(_) => Err(Error::format(Some(lineno), "expected a JSON object")),
                Err(e) => Err(Error::format(Some(lineno), format!("bad JSON: {e}"))),
            };
            (lineno, parsed)
        })
}

fn get_str(obj: &serde_json::Map<String, Value>, key: &str, line: usize) -> Result<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(_) => Err(Error::format(Some(line), format!("key {key:?} must be a string"))),
        None => Err(Error::format(Some(line), format!("missing key {key:?}"))),
    }
}

fn get_seconds(obj: &serde_json::Map<String, Value>, key: &str, line: usize) -> Result<Tick> {
    match obj.get(key) {
        Some(Value::Number(n)) => parse_seconds(&n.to_string()).map_err(|e| relocate(e, Some(line))),
        Some(Value::String(s)) => parse_seconds(s).map_err(|e| relocate(e, Some(line))),
        Some(_) => Err(Error::format(Some(line), format!("key {key:?} must be a number"))),
        None => Err(Error::format(Some(line), format!("missing key {key:?}"))),
    }
}

fn parse_segment(obj: &serde_json::Map<String, Value>, line: usize) -> Result<TranscriptSegment> {
    let seg = TranscriptSegment {
        session: get_str(obj, "session", line)?,
        speaker: get_str(obj, "speaker", line)?,
        start: get_seconds(obj, "start", line)?,
        end: get_seconds(obj, "end", line)?,
        text: get_str(obj, "text", line)?,
    };
    if seg.end <= seg.start {
        return Err(Error::format(Some(line), "segment end must be greater than start"));
    }
    Ok(seg)
}

/// Parse transcript JSONL (`session`, `speaker`, `start`, `end`, `text`), in file order.
pub fn parse_transcripts(text: &str) -> Result<Vec<TranscriptSegment>> {
    json_lines(text)
        .map(|(line, obj)| parse_segment(&obj?, line))
        .collect()
}

/// Parse hypothesis JSONL whose lines may carry an integer `channel` key.
///
/// Lines without `channel` are routed by speaker label: the distinct labels of
/// such lines, sorted, are numbered after the highest explicit channel.
pub fn parse_tagged_transcripts(text: &str) -> Result<Vec<TaggedSegment>> {
    let mut explicit = Vec::new();
    for (line, obj) in json_lines(text) {
        let obj = obj?;
        let seg = parse_segment(&obj, line)?;
        let channel = match obj.get("channel") {
            None | Some(Value::Null) => None,
            Some(Value::Number(n)) => Some(n.as_u64().ok_or_else(|| {
                Error::format(Some(line), "channel must be a non-negative integer")
            })? as usize),
            Some(_) => return Err(Error::format(Some(line), "channel must be an integer")),
        };
        explicit.push((channel, seg));
    }
    let base = explicit
        .iter()
        .filter_map(|(c, _)| c.map(|c| c + 1))
        .max()
        .unwrap_or(0);
    let implicit: BTreeMap<String, usize> = explicit
        .iter()
        .filter(|(c, _)| c.is_none())
        .map(|(_, s)| s.speaker.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, base + i))
        .collect();
    Ok(explicit
        .into_iter()
        .map(|(c, segment)| TaggedSegment {
            channel: c.unwrap_or_else(|| implicit[&segment.speaker]),
            segment,
        })
        .collect())
}

/// Serialize transcript segments as JSONL with exact tick-precision times.
pub fn write_transcripts(segments: &[TranscriptSegment]) -> String {
    let mut out = String::new();
    for s in segments {
        let line = serde_json::json!({
            "session": s.session,
            "speaker": s.speaker,
            "start": seconds_number(s.start),
            "end": seconds_number(s.end),
            "text": s.text,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

fn seconds_number(t: Tick) -> Value {
    // The decimal string is exact at tick precision; going through f64 keeps
    // the shortest representation, which parses back to the same tick.
    let s = format_seconds(t, 4);
    Value::Number(serde_json::Number::from_f64(s.parse::<f64>().unwrap_or(0.0)).unwrap_or(0.into()))
}

/// Square affinity matrix with optional per-row overlap flags.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityInput {
    pub matrix: DMatrix<f64>,
    pub overlap_flags: Option<Vec<bool>>,
}

impl AffinityInput {
    pub fn new(matrix: DMatrix<f64>, overlap_flags: Option<Vec<bool>>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::input(format!(
                "affinity matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("affinity matrix contains non-finite values"));
        }
        if let Some(f) = &overlap_flags {
            if f.len() != matrix.nrows() {
                return Err(Error::input(format!(
                    "overlap flags have length {}, matrix has {} rows",
                    f.len(),
                    matrix.nrows()
                )));
            }
        }
        Ok(AffinityInput {
            matrix,
            overlap_flags,
        })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

/// Parse a header-less comma-separated N×N matrix and an optional JSON 0/1 array.
pub fn parse_affinity(csv_text: &str, flags_json: Option<&str>) -> Result<AffinityInput> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = Some(idx + 1);
        let record = record.map_err(|e| Error::format(line, e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::format(line, format!("not a number: {f:?}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::format(line, format!("non-finite value {f:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::format(
            Some(i + 1),
            format!("matrix is not square: {n} rows but row {} has {} columns", i + 1, r.len()),
        ));
    }
    let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let flags = match flags_json {
        None => None,
        Some(text) => Some(parse_flags(text)?),
    };
    AffinityInput::new(matrix, flags).map_err(|e| relocate(e, None))
}

fn parse_flags(text: &str) -> Result<Vec<bool>> {
    let values: Vec<Value> = serde_json::from_str(text)
        .map_err(|e| Error::format(None, format!("overlap flags must be a JSON array: {e}")))?;
    values
        .iter()
        .map(|v| match v.as_u64() {
            Some(0) => Ok(false),
            Some(1) => Ok(true),
            _ => Err(Error::format(None, format!("overlap flag {v} is not 0 or 1"))),
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct LabelsDoc {
    labels: Vec<Vec<usize>>,
}

/// `{"labels": [[int, ...], ...]}`, one inner list per window.
pub fn write_labels(labels: &[Vec<usize>]) -> String {
    serde_json::to_string(&LabelsDoc {
        labels: labels.to_vec(),
    })
    .expect("labels serialize")
}

pub fn parse_labels(text: &str) -> Result<Vec<Vec<usize>>> {
    let doc: LabelsDoc =
        serde_json::from_str(text).map_err(|e| Error::format(None, e.to_string()))?;
    Ok(doc.labels)
}

/// Parse an utterance inventory: JSONL with `id`, `speaker`, `duration` (seconds).
pub fn parse_utterances(text: &str) -> Result<Vec<Utterance>> {
    json_lines(text)
        .map(|(line, obj)| {
            let obj = obj?;
            let duration = get_seconds(&obj, "duration", line)?;
            if duration <= 0 {
                return Err(Error::format(Some(line), "utterance duration must be positive"));
            }
            Ok(Utterance {
                id: get_str(&obj, "id", line)?,
                speaker: get_str(&obj, "speaker", line)?,
                duration,
            })
        })
        .collect()
}

pub fn write_utterances(utts: &[Utterance]) -> String {
    let mut out = String::new();
    for u in utts {
        let line = serde_json::json!({
            "id": u.id,
            "speaker": u.speaker,
            "duration": seconds_number(u.duration),
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Placement manifest: one JSON line per placed utterance, in placement order.
pub fn write_manifest(sessions: &[SimSession]) -> String {
    let mut out = String::new();
    for s in sessions {
        for p in &s.placements {
            let line = serde_json::json!({
                "session": s.id,
                "utterance": p.utterance_id,
                "speaker": p.speaker,
                "offset": seconds_number(p.offset),
                "duration": seconds_number(p.duration),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
    }
    out
}

/// Inverse of [`write_manifest`]. Sessions keep first-appearance order.
pub fn parse_manifest(text: &str) -> Result<Vec<SimSession>> {
    let mut sessions: Vec<SimSession> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (line, obj) in json_lines(text) {
        let obj = obj?;
        let session = get_str(&obj, "session", line)?;
        let duration = get_seconds(&obj, "duration", line)?;
        if duration <= 0 {
            return Err(Error::format(Some(line), "placement duration must be positive"));
        }
        let placement = Placement {
            utterance_id: get_str(&obj, "utterance", line)?,
            speaker: get_str(&obj, "speaker", line)?,
            offset: get_seconds(&obj, "offset", line)?,
            duration,
        };
        let slot = *index.entry(session.clone()).or_insert_with(|| {
            sessions.push(SimSession {
                id: session.clone(),
                placements: Vec::new(),
            });
            sessions.len() - 1
        });
        sessions[slot].placements.push(placement);
    }
    Ok(sessions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rttm_single_line() {
        let tls = parse_rttm("SPEAKER s1 1 0.00 2.50 <NA> <NA> A <NA> <NA>\n").unwrap();
        assert_eq!(tls.len(), 1);
        assert_eq!(tls[0].turns(), &[Turn::new("s1", "A", 0, 25_000).unwrap()]);
    }

    #[test]
    fn rttm_groups_by_file() {
        let text = "SPEAKER s2 1 0.0 1.0 <NA> <NA> A <NA> <NA>\n\
                    ;; comment\n\
                    SPEAKER s1 1 0.0 1.0 <NA> <NA> B <NA> <NA>\n";
        let tls = parse_rttm(text).unwrap();
        let ids: Vec<_> = tls.iter().map(|t| t.session()).collect();
        assert_eq!(ids, vec!["s1", "s2"]);
    }

    #[test]
    fn rttm_errors_carry_line_numbers() {
        let text = "SPEAKER s1 1 0.0 1.0 <NA> <NA> A <NA> <NA>\nSPEAKER s1 1 0.0 1.0 <NA> <NA> A\n";
        assert_eq!(
            parse_rttm(text).unwrap_err(),
            Error::format(Some(2), "expected 10 fields in SPEAKER line, found 8")
        );
        let zero = "SPEAKER s1 1 0.0 0.0 <NA> <NA> A <NA> <NA>\n";
        assert!(matches!(parse_rttm(zero), Err(Error::Format { line: Some(1), .. })));
        let bad = "SPEAKER s1 1 x 1.0 <NA> <NA> A <NA> <NA>\n";
        assert!(matches!(parse_rttm(bad), Err(Error::Format { line: Some(1), .. })));
    }

    #[test]
    fn rttm_write_format() {
        let tl = Timeline::new("s1", vec![Turn::new("s1", "A", 0, 25_000).unwrap()]).unwrap();
        assert_eq!(
            write_rttm(&[tl]),
            "SPEAKER s1 1 0.000 2.500 <NA> <NA> A <NA> <NA>\n"
        );
        assert_eq!(write_rttm(&[]), "");
    }

    #[test]
    fn transcripts_parse() {
        let segs = parse_transcripts(
            r#"{"session":"s","speaker":"A","start":0,"end":1.2,"text":"hello world"}"#,
        )
        .unwrap();
        assert_eq!(segs[0].words(), vec!["hello", "world"]);
        assert_eq!(segs[0].end, 12_000);

        let empty = parse_transcripts(r#"{"session":"s","speaker":"A","start":0,"end":1,"text":""}"#)
            .unwrap();
        assert!(empty[0].words().is_empty());

        let inverted =
            parse_transcripts(r#"{"session":"s","speaker":"A","start":2,"end":1,"text":"x"}"#);
        assert!(matches!(inverted, Err(Error::Format { line: Some(1), .. })));

        let missing = parse_transcripts("\n{\"session\":\"s\",\"start\":0,\"end\":1,\"text\":\"x\"}");
        assert!(matches!(missing, Err(Error::Format { line: Some(2), .. })));
        assert!(parse_transcripts("{not json").is_err());
    }

    #[test]
    fn tagged_transcripts_route_by_speaker_when_no_channel() {
        let text = "{\"session\":\"s\",\"speaker\":\"B\",\"start\":0,\"end\":1,\"text\":\"x\"}\n\
                    {\"session\":\"s\",\"speaker\":\"A\",\"start\":0,\"end\":1,\"text\":\"y\"}\n\
                    {\"session\":\"s\",\"speaker\":\"A\",\"start\":2,\"end\":3,\"text\":\"z\",\"channel\":0}\n";
        let tagged = parse_tagged_transcripts(text).unwrap();
        let channels: Vec<_> = tagged.iter().map(|t| t.channel).collect();
        assert_eq!(channels, vec![2, 1, 0]);
    }

    #[test]
    fn transcripts_roundtrip() {
        let segs = vec![TranscriptSegment {
            session: "s".into(),
            speaker: "A".into(),
            start: 12_345,
            end: 20_001,
            text: "a b".into(),
        }];
        assert_eq!(parse_transcripts(&write_transcripts(&segs)).unwrap(), segs);
    }

    #[test]
    fn affinity_parse() {
        let a = parse_affinity("1,0\n0,1\n", None).unwrap();
        assert_eq!(a.matrix, DMatrix::identity(2, 2));
        assert!(a.overlap_flags.is_none());

        assert!(parse_affinity("1,0\n0,1\n1,1\n", None).is_err());
        assert!(parse_affinity("1,NaN\n0,1\n", None).is_err());

        let a = parse_affinity("1,0,0\n0,1,0\n0,0,1\n", Some("[0,1,0]")).unwrap();
        assert_eq!(a.overlap_flags, Some(vec![false, true, false]));
        assert!(parse_affinity("1,0,0\n0,1,0\n0,0,1\n", Some("[0,1]")).is_err());
        assert!(parse_affinity("1,0,0\n0,1,0\n0,0,1\n", Some("[0,2,0]")).is_err());
    }

    #[test]
    fn labels_json() {
        let labels = vec![vec![0], vec![0, 1]];
        let text = write_labels(&labels);
        assert_eq!(text, r#"{"labels":[[0],[0,1]]}"#);
        assert_eq!(parse_labels(&text).unwrap(), labels);
    }
}
