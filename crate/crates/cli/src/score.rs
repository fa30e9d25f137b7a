use std::collections::{BTreeMap, BTreeSet};

use anyhow::bail;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use diartool_core::io::{parse_rttm, parse_tagged_transcripts, parse_transcripts, TaggedSegment, TranscriptSegment};
use diartool_core::metrics::{compute_cpwer, compute_der, compute_orcwer, compute_wder};
use diartool_core::{Error, Tick, Timeline};

use crate::{read, Pair};

#[derive(Args)]
pub struct DerArgs {
    #[command(flatten)]
    pair: Pair,
    /// Seconds around each reference boundary left unscored.
    #[arg(long, default_value_t = 0.0)]
    collar: f64,
    /// Skip regions where more than one reference speaker is active.
    #[arg(long)]
    ignore_overlap: bool,
}

#[derive(Args)]
pub struct WerArgs {
    #[command(flatten)]
    pair: Pair,
}

#[derive(Args)]
pub struct OrcArgs {
    #[command(flatten)]
    pair: Pair,
    /// Number of hypothesis channels. Defaults to the highest channel seen plus one.
    #[arg(long)]
    channels: Option<usize>,
}

/// Union of session ids, warning (or failing under `strict`) on one-sided ones.
fn sessions<'a>(
    reference: impl Iterator<Item = &'a String>,
    hypothesis: impl Iterator<Item = &'a String>,
    strict: bool,
) -> anyhow::Result<Vec<String>> {
    let r: BTreeSet<&String> = reference.collect();
    let h: BTreeSet<&String> = hypothesis.collect();
    for s in r.symmetric_difference(&h) {
        let side = if r.contains(s) { "hypothesis" } else { "reference" };
        if strict {
            return Err(Error::input(format!("session {s:?} missing from {side}")).into());
        }
        eprintln!("warning: session {s:?} missing from {side}");
    }
    Ok(r.union(&h).map(|s| (*s).clone()).collect())
}

fn report(metric: &str, sessions: Vec<Value>, aggregate: Value) -> anyhow::Result<()> {
    let doc = json!({
        "schema": 1,
        "metric": metric,
        "sessions": sessions,
        "aggregate": aggregate,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn rate(num: u64, den: u64) -> Value {
    if den > 0 {
        json!(num as f64 / den as f64)
    } else if num == 0 {
        json!(0.0)
    } else {
        Value::Null
    }
}

fn with_session<T: Serialize>(session: &str, r: &T) -> anyhow::Result<Value> {
    let mut v = serde_json::to_value(r)?;
    if let Value::Object(m) = &mut v {
        m.insert("session".into(), json!(session));
    }
    Ok(v)
}

fn by_session_rttm(text: &str) -> anyhow::Result<BTreeMap<String, Timeline>> {
    Ok(parse_rttm(text)?
        .into_iter()
        .map(|t| (t.session().to_owned(), t))
        .collect())
}

pub fn der(a: DerArgs) -> anyhow::Result<()> {
    if !(a.collar >= 0.0 && a.collar.is_finite()) {
        bail!(Error::input(format!("collar {} must be a non-negative number", a.collar)));
    }
    let reference = by_session_rttm(&read(&a.pair.reference)?)?;
    let hypothesis = by_session_rttm(&read(&a.pair.hyp)?)?;
    let ids = sessions(reference.keys(), hypothesis.keys(), a.pair.strict)?;
    let reports = ids
        .par_iter()
        .map(|s| {
            let empty = Timeline::empty(s.as_str());
            let r = reference.get(s).unwrap_or(&empty);
            let h = hypothesis.get(s).unwrap_or(&empty);
            compute_der(r, h, a.collar, a.ignore_overlap)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let (mut miss, mut fa, mut conf, mut total): (Tick, Tick, Tick, Tick) = (0, 0, 0, 0);
    let mut per = Vec::new();
    for (s, r) in ids.iter().zip(&reports) {
        miss += r.missed;
        fa += r.false_alarm;
        conf += r.confusion;
        total += r.total_ref_speech;
        per.push(with_session(s, r)?);
    }
    let den = total as u64;
    let aggregate = json!({
        "missed": miss,
        "false_alarm": fa,
        "confusion": conf,
        "total_ref_speech": total,
        "missed_rate": rate(miss as u64, den),
        "false_alarm_rate": rate(fa as u64, den),
        "confusion_rate": rate(conf as u64, den),
        "der": rate((miss + fa + conf) as u64, den),
    });
    report("der", per, aggregate)
}

fn group<T, F: Fn(&T) -> &str>(items: Vec<T>, key: F) -> BTreeMap<String, Vec<T>> {
    let mut out: BTreeMap<String, Vec<T>> = BTreeMap::new();
    for it in items {
        out.entry(key(&it).to_owned()).or_default().push(it);
    }
    out
}

fn sorted_reference(segments: &[TranscriptSegment]) -> Vec<TranscriptSegment> {
    let mut v = segments.to_vec();
    v.sort_by_key(|s| (s.start, s.end));
    v
}

#[derive(Default)]
struct WerTotals {
    insertions: usize,
    deletions: usize,
    substitutions: usize,
    ref_words: usize,
}

impl WerTotals {
    fn add(&mut self, r: &diartool_core::metrics::WerReport) {
        self.insertions += r.insertions;
        self.deletions += r.deletions;
        self.substitutions += r.substitutions;
        self.ref_words += r.ref_words;
    }

    fn json(&self) -> Value {
        let errors = self.insertions + self.deletions + self.substitutions;
        json!({
            "insertions": self.insertions,
            "deletions": self.deletions,
            "substitutions": self.substitutions,
            "errors": errors,
            "ref_words": self.ref_words,
            "rate": rate(errors as u64, self.ref_words as u64),
        })
    }
}

pub fn cpwer(a: WerArgs) -> anyhow::Result<()> {
    let reference = group(parse_transcripts(&read(&a.pair.reference)?)?, |s| &s.session);
    let hypothesis = group(parse_transcripts(&read(&a.pair.hyp)?)?, |s| &s.session);
    let ids = sessions(reference.keys(), hypothesis.keys(), a.pair.strict)?;
    let reports: Vec<_> = ids
        .par_iter()
        .map(|s| {
            let r = reference.get(s).map(Vec::as_slice).unwrap_or(&[]);
            let h = hypothesis.get(s).map(Vec::as_slice).unwrap_or(&[]);
            compute_cpwer(r, h)
        })
        .collect();
    let mut totals = WerTotals::default();
    let mut per = Vec::new();
    for (s, r) in ids.iter().zip(&reports) {
        totals.add(r);
        per.push(with_session(s, r)?);
    }
    report("cpwer", per, totals.json())
}

pub fn orcwer(a: OrcArgs) -> anyhow::Result<()> {
    let reference = group(parse_transcripts(&read(&a.pair.reference)?)?, |s| &s.session);
    let tagged = parse_tagged_transcripts(&read(&a.pair.hyp)?)?;
    let seen = tagged.iter().map(|t| t.channel + 1).max().unwrap_or(0);
    let n = match a.channels {
        Some(n) if n < seen => {
            bail!(Error::input(format!("--channels {n} but the hypothesis uses {seen} channels")))
        }
        Some(n) => n,
        None => seen.max(1),
    };
    let hypothesis = group(tagged, |t| &t.segment.session);
    let ids = sessions(reference.keys(), hypothesis.keys(), a.pair.strict)?;
    let reports = ids
        .par_iter()
        .map(|s| {
            let r = sorted_reference(reference.get(s).map(Vec::as_slice).unwrap_or(&[]));
            let mut segs: Vec<&TaggedSegment> =
                hypothesis.get(s).map(|v| v.iter().collect()).unwrap_or_default();
            segs.sort_by_key(|t| (t.segment.start, t.segment.end));
            let mut channels: Vec<Vec<&str>> = vec![Vec::new(); n];
            for t in segs {
                channels[t.channel].extend(t.segment.words());
            }
            compute_orcwer(&r, &channels)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut totals = WerTotals::default();
    let mut per = Vec::new();
    for (s, r) in ids.iter().zip(&reports) {
        totals.add(r);
        per.push(with_session(s, r)?);
    }
    report("orcwer", per, totals.json())
}

pub fn wder(a: WerArgs) -> anyhow::Result<()> {
    let reference = group(parse_transcripts(&read(&a.pair.reference)?)?, |s| &s.session);
    let hypothesis = group(parse_tagged_transcripts(&read(&a.pair.hyp)?)?, |t| &t.segment.session);
    let ids = sessions(reference.keys(), hypothesis.keys(), a.pair.strict)?;
    let reports = ids
        .par_iter()
        .map(|s| {
            let r = sorted_reference(reference.get(s).map(Vec::as_slice).unwrap_or(&[]));
            let h = hypothesis.get(s).map(Vec::as_slice).unwrap_or(&[]);
            compute_wder(&r, h)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (mut correct, mut errors) = (0, 0);
    let mut per = Vec::new();
    for (s, r) in ids.iter().zip(&reports) {
        correct += r.correct_words;
        errors += r.speaker_errors;
        per.push(with_session(s, r)?);
    }
    let aggregate = json!({
        "correct_words": correct,
        "speaker_errors": errors,
        "rate": if correct == 0 { 0.0 } else { errors as f64 / correct as f64 },
    });
    report("wder", per, aggregate)
}
