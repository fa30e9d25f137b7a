//! Time model and interval algebra.
//!
//! All times are integer ticks of 0.1 ms so that boundary pooling and duration
//! sums are exact. Seconds only appear at the I/O boundary.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time in 0.1 ms units.
pub type Tick = i64;

pub const TICKS_PER_SECOND: Tick = 10_000;

/// Convert non-negative seconds to ticks, rounding half up.
///
/// The conversion goes through the shortest decimal representation of `seconds`
/// so that values such as `0.00005` round the way they read.
pub fn quantize_time(seconds: f64) -> Result<Tick> {
    if !seconds.is_finite() {
        return Err(Error::format(None, format!("non-finite time value {seconds}")));
    }
    if seconds < 0.0 {
        return Err(Error::format(None, format!("negative time value {seconds}")));
    }
    parse_seconds(&format!("{seconds}"))
}

/// Parse a decimal seconds string (optionally with exponent) into ticks, exactly,
/// rounding half up at the tick boundary.
pub fn parse_seconds(text: &str) -> Result<Tick> {
    let bad = |why: &str| Error::format(None, format!("invalid time value {text:?}: {why}"));
    let s = text.trim();
    let s = s.strip_prefix('+').unwrap_or(s);
    if s.starts_with('-') {
        // "-0", "-0.000" are still zero
        if s[1..].chars().all(|c| c == '0' || c == '.') && s.len() > 1 {
            return Ok(0);
        }
        return Err(bad("negative"));
    }
    let (num, exp) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().map_err(|_| bad("bad exponent"))?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (int_part, frac_part) = match num.find('.') {
        Some(pos) => (&num[..pos], &num[pos + 1..]),
        None => (num, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad("no digits"));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad("not a decimal number"));
    }
    let digits: String = int_part
        .chars()
        .chain(frac_part.chars())
        .skip_while(|&c| c == '0')
        .collect();
    if digits.is_empty() {
        return Ok(0);
    }
    if digits.len() > 36 {
        return Err(bad("too many significant digits"));
    }
    let mantissa: u128 = digits.parse().map_err(|_| bad("not a decimal number"))?;
    // value = mantissa * 10^(exp - frac_len); ticks = value * 10^4
    let scale = exp as i64 - frac_part.len() as i64 + 4;
    let ticks: u128 = if scale >= 0 {
        if scale > 30 {
            return Err(bad("out of range"));
        }
        mantissa
            .checked_mul(10u128.pow(scale as u32))
            .ok_or_else(|| bad("out of range"))?
    } else {
        let shift = (-scale) as u32;
        if shift > 38 {
            0
        } else {
            let d = 10u128.pow(shift);
            let (q, r) = (mantissa / d, mantissa % d);
            if 2 * r >= d {
                q + 1
            } else {
                q
            }
        }
    };
    Tick::try_from(ticks).map_err(|_| bad("out of range"))
}

pub fn to_seconds(t: Tick) -> f64 {
    t as f64 / TICKS_PER_SECOND as f64
}

/// Exact decimal rendering of a tick count with `decimals` places (0..=4),
/// rounding half up when fewer than four places are requested.
pub fn format_seconds(t: Tick, decimals: u32) -> String {
    assert!(decimals <= 4);
    let neg = t < 0;
    let t = t.unsigned_abs();
    let div = 10u64.pow(4 - decimals);
    let units = (t + div / 2) / div;
    let scale = 10u64.pow(decimals);
    let sign = if neg && units != 0 { "-" } else { "" };
    if decimals == 0 {
        format!("{sign}{units}")
    } else {
        format!(
            "{sign}{}.{:0width$}",
            units / scale,
            units % scale,
            width = decimals as usize
        )
    }
}

/// One labeled speech interval, `[start, end)` in ticks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Turn {
    pub session: String,
    pub speaker: String,
    pub start: Tick,
    pub end: Tick,
}

impl Turn {
    pub fn new(
        session: impl Into<String>,
        speaker: impl Into<String>,
        start: Tick,
        end: Tick,
    ) -> Result<Self> {
        if start < 0 {
            return Err(Error::input(format!("turn start {start} is negative")));
        }
        if end <= start {
            return Err(Error::input(format!(
                "turn end {end} must be greater than start {start}"
            )));
        }
        Ok(Turn {
            session: session.into(),
            speaker: speaker.into(),
            start,
            end,
        })
    }

    pub fn duration(&self) -> Tick {
        self.end - self.start
    }

    fn sort_key(&self) -> (Tick, Tick, &str) {
        (self.start, self.end, self.speaker.as_str())
    }
}

/// All turns of one session for one hypothesis or reference.
///
/// Construction sorts turns by `(start, end, speaker)` and merges overlapping
/// turns of the same speaker. Turns of the same speaker that only touch are
/// kept separate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    session: String,
    turns: Vec<Turn>,
}

impl Timeline {
    pub fn new(session: impl Into<String>, turns: Vec<Turn>) -> Result<Self> {
        let session = session.into();
        if let Some(t) = turns.iter().find(|t| t.session != session) {
            return Err(Error::input(format!(
                "turn for session {:?} in timeline for session {:?}",
                t.session, session
            )));
        }
        if let Some(t) = turns.iter().find(|t| t.start < 0 || t.end <= t.start) {
            return Err(Error::input(format!(
                "invalid turn [{}, {}) for speaker {:?}",
                t.start, t.end, t.speaker
            )));
        }
        Ok(Timeline {
            turns: canonicalize(turns),
            session,
        })
    }

    pub fn empty(session: impl Into<String>) -> Self {
        Timeline {
            session: session.into(),
            turns: Vec::new(),
        }
    }

    pub fn session(&self) -> &str {
        &self.session
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Distinct speaker labels in sorted order.
    pub fn speakers(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.turns.iter().map(|t| t.speaker.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Apply a speaker relabeling. Unmapped speakers keep their label.
    pub fn relabel(&self, map: &BTreeMap<String, String>) -> Timeline {
        let turns = self
            .turns
            .iter()
            .map(|t| Turn {
                speaker: map.get(&t.speaker).cloned().unwrap_or_else(|| t.speaker.clone()),
                ..t.clone()
            })
            .collect();
        Timeline {
            session: self.session.clone(),
            turns: canonicalize(turns),
        }
    }

    /// Speaker-time: sum of all turn durations, overlap counted per speaker.
    pub fn speaker_time(&self) -> Tick {
        self.turns.iter().map(Turn::duration).sum()
    }
}

fn canonicalize(mut turns: Vec<Turn>) -> Vec<Turn> {
    turns.sort_by(|a, b| (a.speaker.as_str(), a.start, a.end).cmp(&(b.speaker.as_str(), b.start, b.end)));
    let mut merged: Vec<Turn> = Vec::with_capacity(turns.len());
    for t in turns {
        match merged.last_mut() {
            Some(last) if last.speaker == t.speaker && t.start < last.end => {
                last.end = last.end.max(t.end);
            }
            _ => merged.push(t),
        }
    }
    merged.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    merged
}

/// Sorted, pairwise disjoint, non-touching half-open intervals.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<(Tick, Tick)>,
}

impl IntervalSet {
    pub fn from_intervals(mut v: Vec<(Tick, Tick)>) -> Self {
        v.retain(|&(s, e)| e > s);
        v.sort_unstable();
        let mut out: Vec<(Tick, Tick)> = Vec::with_capacity(v.len());
        for (s, e) in v {
            match out.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => out.push((s, e)),
            }
        }
        IntervalSet { intervals: out }
    }

    pub fn intervals(&self) -> &[(Tick, Tick)] {
        &self.intervals
    }

    pub fn total(&self) -> Tick {
        self.intervals.iter().map(|(s, e)| e - s).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Measure of the intersection, by a linear merge.
    pub fn intersection_len(&self, other: &IntervalSet) -> Tick {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j, mut acc) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if hi > lo {
                acc += hi - lo;
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        acc
    }

    pub fn union_len(&self, other: &IntervalSet) -> Tick {
        self.total() + other.total() - self.intersection_len(other)
    }

    pub fn contains(&self, t: Tick) -> bool {
        let idx = self.intervals.partition_point(|&(_, e)| e <= t);
        self.intervals.get(idx).is_some_and(|&(s, _)| s <= t)
    }
}

/// Where one speaker is active, as a merged interval set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerActivity {
    pub speaker: String,
    pub intervals: IntervalSet,
}

/// One entry per distinct speaker, sorted by label.
pub fn speaker_activities(tl: &Timeline) -> Vec<SpeakerActivity> {
    let mut by_speaker: BTreeMap<&str, Vec<(Tick, Tick)>> = BTreeMap::new();
    for t in tl.turns() {
        by_speaker
            .entry(t.speaker.as_str())
            .or_default()
            .push((t.start, t.end));
    }
    by_speaker
        .into_iter()
        .map(|(speaker, v)| SpeakerActivity {
            speaker: speaker.to_owned(),
            intervals: IntervalSet::from_intervals(v),
        })
        .collect()
}

/// A maximal span in which every input's active speaker set is constant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub start: Tick,
    pub end: Tick,
    pub per_hypothesis_speakers: Vec<BTreeSet<String>>,
}

impl Region {
    pub fn duration(&self) -> Tick {
        self.end - self.start
    }
}

/// Split the covered time of several timelines at every pooled turn boundary.
///
/// Spans where no input has speech are not emitted.
pub fn build_regions(hyps: &[Timeline]) -> Result<Vec<Region>> {
    let Some(first) = hyps.first() else {
        return Err(Error::input("build_regions needs at least one timeline"));
    };
    if let Some(h) = hyps.iter().find(|h| h.session() != first.session()) {
        return Err(Error::input(format!(
            "mixed sessions {:?} and {:?}",
            first.session(),
            h.session()
        )));
    }

    // (time, delta, hyp, speaker); ends sort before starts at equal times.
    let mut events: Vec<(Tick, i32, usize, &str)> = Vec::new();
    for (k, h) in hyps.iter().enumerate() {
        for t in h.turns() {
            events.push((t.start, 1, k, t.speaker.as_str()));
            events.push((t.end, -1, k, t.speaker.as_str()));
        }
    }
    events.sort_unstable();

    let mut active: Vec<BTreeMap<&str, u32>> = vec![BTreeMap::new(); hyps.len()];
    let mut regions = Vec::new();
    let mut i = 0;
    while i < events.len() {
        let now = events[i].0;
        while i < events.len() && events[i].0 == now {
            let (_, delta, k, spk) = events[i];
            let count = active[k].entry(spk).or_insert(0);
            if delta > 0 {
                *count += 1;
            } else {
                *count -= 1;
                if *count == 0 {
                    active[k].remove(spk);
                }
            }
            i += 1;
        }
        let Some(&(next, ..)) = events.get(i) else {
            break;
        };
        if active.iter().any(|a| !a.is_empty()) {
            regions.push(Region {
                start: now,
                end: next,
                per_hypothesis_speakers: active
                    .iter()
                    .map(|a| a.keys().map(|s| s.to_string()).collect())
                    .collect(),
            });
        }
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tl(session: &str, turns: &[(&str, Tick, Tick)]) -> Timeline {
        Timeline::new(
            session,
            turns
                .iter()
                .map(|&(s, a, b)| Turn::new(session, s, a, b).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_time(0.0).unwrap(), 0);
        assert_eq!(quantize_time(1.0).unwrap(), 10_000);
        assert_eq!(quantize_time(0.00005).unwrap(), 1);
        assert_eq!(quantize_time(0.00004999).unwrap(), 0);
        assert!(matches!(quantize_time(-1.0), Err(Error::Format { .. })));
        assert!(quantize_time(f64::NAN).is_err());
        assert!(quantize_time(f64::INFINITY).is_err());
    }

    #[test]
    fn parse_seconds_forms() {
        assert_eq!(parse_seconds("2.50").unwrap(), 25_000);
        assert_eq!(parse_seconds("1e-3").unwrap(), 10);
        assert_eq!(parse_seconds("5E-5").unwrap(), 1);
        assert_eq!(parse_seconds(".5").unwrap(), 5_000);
        assert_eq!(parse_seconds("-0.000").unwrap(), 0);
        assert!(parse_seconds("-0.1").is_err());
        assert!(parse_seconds("abc").is_err());
        assert!(parse_seconds(".").is_err());
    }

    #[test]
    fn format_seconds_rounds_half_up() {
        assert_eq!(format_seconds(25_000, 3), "2.500");
        assert_eq!(format_seconds(12_345, 3), "1.235");
        assert_eq!(format_seconds(12_344, 3), "1.234");
        assert_eq!(format_seconds(7, 4), "0.0007");
    }

    #[test]
    fn turn_validation() {
        assert!(Turn::new("s", "A", 5, 5).is_err());
        assert!(Turn::new("s", "A", -1, 5).is_err());
    }

    #[test]
    fn timeline_rejects_foreign_session() {
        let t = Turn::new("other", "A", 0, 1).unwrap();
        assert!(Timeline::new("s", vec![t]).is_err());
    }

    #[test]
    fn activities_merge_same_speaker() {
        let a = speaker_activities(&tl("s", &[("A", 0, 10), ("A", 5, 15)]));
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].intervals.intervals(), &[(0, 15)]);

        let a = speaker_activities(&tl("s", &[("A", 0, 5), ("B", 3, 8)]));
        assert_eq!(a[0].intervals.intervals(), &[(0, 5)]);
        assert_eq!(a[1].intervals.intervals(), &[(3, 8)]);

        assert!(speaker_activities(&Timeline::empty("s")).is_empty());
    }

    #[test]
    fn timeline_merges_overlap_keeps_touching() {
        let t = tl("s", &[("A", 0, 10), ("A", 5, 15), ("A", 15, 20)]);
        let spans: Vec<_> = t.turns().iter().map(|t| (t.start, t.end)).collect();
        assert_eq!(spans, vec![(0, 15), (15, 20)]);
    }

    #[test]
    fn regions_examples() {
        let r = build_regions(&[tl("s", &[("A", 0, 10)])]).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].start, r[0].end), (0, 10));
        assert!(r[0].per_hypothesis_speakers[0].contains("A"));

        let r = build_regions(&[tl("s", &[("A", 0, 10)]), tl("s", &[("B", 5, 15)])]).unwrap();
        let spans: Vec<_> = r.iter().map(|r| (r.start, r.end)).collect();
        assert_eq!(spans, vec![(0, 5), (5, 10), (10, 15)]);

        let h = tl("s", &[("A", 0, 10), ("B", 20, 30)]);
        let r = build_regions(&[h.clone(), h]).unwrap();
        let spans: Vec<_> = r.iter().map(|r| (r.start, r.end)).collect();
        assert_eq!(spans, vec![(0, 10), (20, 30)]);
    }

    #[test]
    fn regions_reject_mixed_sessions() {
        let err = build_regions(&[tl("a", &[("A", 0, 1)]), tl("b", &[("A", 0, 1)])]);
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn interval_set_algebra() {
        let a = IntervalSet::from_intervals(vec![(0, 10)]);
        let b = IntervalSet::from_intervals(vec![(5, 15)]);
        assert_eq!(a.intersection_len(&b), 5);
        assert_eq!(a.union_len(&b), 15);
        assert!(a.contains(0) && a.contains(9) && !a.contains(10));
    }
}
