use serde::Serialize;

use crate::error::{Error, Result};
use crate::hungarian::lexmin_assignment;
use crate::timeline::{quantize_time, Tick, Timeline};

/// Diarization error breakdown. Tick fields are speaker-time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerReport {
    pub missed: Tick,
    pub false_alarm: Tick,
    pub confusion: Tick,
    pub total_ref_speech: Tick,
    pub rates: DerRates,
    /// `(hypothesis speaker, reference speaker)` pairs with positive overlap.
    pub mapping: Vec<(String, String)>,
}

/// Error components as fractions of reference speaker-time. When there is no
/// scored reference speech, rates are 0 if there are no errors and infinite
/// (serialized as `null`) otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerRates {
    pub missed: f64,
    pub false_alarm: f64,
    pub confusion: f64,
    pub der: f64,
}

impl DerReport {
    pub fn total_errors(&self) -> Tick {
        self.missed + self.false_alarm + self.confusion
    }

    pub(crate) fn from_counts(
        missed: Tick,
        false_alarm: Tick,
        confusion: Tick,
        total_ref_speech: Tick,
        mapping: Vec<(String, String)>,
    ) -> Self {
        let rate = |x: Tick| -> f64 {
            if total_ref_speech > 0 {
                x as f64 / total_ref_speech as f64
            } else if x == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        DerReport {
            missed,
            false_alarm,
            confusion,
            total_ref_speech,
            rates: DerRates {
                missed: rate(missed),
                false_alarm: rate(false_alarm),
                confusion: rate(confusion),
                der: rate(missed + false_alarm + confusion),
            },
            mapping,
        }
    }
}

/// Elementary scored span with the active reference and hypothesis speakers.
struct Span {
    dur: Tick,
    refs: Vec<usize>,
    hyps: Vec<usize>,
}

fn scored_spans(
    reference: &Timeline,
    hypothesis: &Timeline,
    ref_ids: &[String],
    hyp_ids: &[String],
    collar: Tick,
    ignore_overlap: bool,
) -> Vec<Span> {
    const REF: u8 = 0;
    const HYP: u8 = 1;
    const COLLAR: u8 = 2;
    // (time, delta, kind, speaker index); ends sort first at equal times.
    let mut events: Vec<(Tick, i32, u8, usize)> = Vec::new();
    for t in reference.turns() {
        let s = ref_ids.binary_search(&t.speaker).expect("ref speaker");
        events.push((t.start, 1, REF, s));
        events.push((t.end, -1, REF, s));
        if collar > 0 {
            for b in [t.start, t.end] {
                events.push(((b - collar).max(0), 1, COLLAR, 0));
                events.push((b + collar, -1, COLLAR, 0));
            }
        }
    }
    for t in hypothesis.turns() {
        let s = hyp_ids.binary_search(&t.speaker).expect("hyp speaker");
        events.push((t.start, 1, HYP, s));
        events.push((t.end, -1, HYP, s));
    }
    events.sort_unstable();

    let mut ref_active = vec![0i32; ref_ids.len()];
    let mut hyp_active = vec![0i32; hyp_ids.len()];
    let mut collar_depth = 0i32;
    let mut spans = Vec::new();
    let mut i = 0;
    while i < events.len() {
        let now = events[i].0;
        while i < events.len() && events[i].0 == now {
            let (_, d, kind, s) = events[i];
            match kind {
                REF => ref_active[s] += d,
                HYP => hyp_active[s] += d,
                _ => collar_depth += d,
            }
            i += 1;
        }
        let Some(&(next, ..)) = events.get(i) else {
            break;
        };
        if collar_depth > 0 || next <= now {
            continue;
        }
        let refs: Vec<usize> = (0..ref_ids.len()).filter(|&s| ref_active[s] > 0).collect();
        let hyps: Vec<usize> = (0..hyp_ids.len()).filter(|&s| hyp_active[s] > 0).collect();
        if refs.is_empty() && hyps.is_empty() {
            continue;
        }
        if ignore_overlap && refs.len() > 1 {
            continue;
        }
        spans.push(Span {
            dur: next - now,
            refs,
            hyps,
        });
    }
    spans
}

/// Overlap-aware DER with an optimal one-to-one speaker mapping.
///
/// Ticks within `collar_seconds` of any reference turn boundary are not scored.
/// With `ignore_overlap`, ticks with more than one reference speaker are not scored.
pub fn compute_der(
    reference: &Timeline,
    hypothesis: &Timeline,
    collar_seconds: f64,
    ignore_overlap: bool,
) -> Result<DerReport> {
    if reference.session() != hypothesis.session() {
        return Err(Error::input(format!(
            "session mismatch: reference {:?}, hypothesis {:?}",
            reference.session(),
            hypothesis.session()
        )));
    }
    let collar = quantize_time(collar_seconds).map_err(|_| {
        Error::input(format!("collar must be a non-negative number, got {collar_seconds}"))
    })?;
    let ref_ids = reference.speakers();
    let hyp_ids = hypothesis.speakers();
    let spans = scored_spans(reference, hypothesis, &ref_ids, &hyp_ids, collar, ignore_overlap);

    let mut overlap = vec![vec![0i64; hyp_ids.len()]; ref_ids.len()];
    for sp in &spans {
        for &r in &sp.refs {
            for &h in &sp.hyps {
                overlap[r][h] += sp.dur;
            }
        }
    }
    let costs: Vec<Vec<i64>> = overlap.iter().map(|row| row.iter().map(|&v| -v).collect()).collect();
    let (_, pairs) = lexmin_assignment(&costs, hyp_ids.len());
    let mut hyp_to_ref: Vec<Option<usize>> = vec![None; hyp_ids.len()];
    for (r, h) in pairs.iter().enumerate() {
        if let Some(h) = *h {
            hyp_to_ref[h] = Some(r);
        }
    }

    let (mut missed, mut fa, mut conf, mut total) = (0, 0, 0, 0);
    for sp in &spans {
        let (nr, nh) = (sp.refs.len() as i64, sp.hyps.len() as i64);
        let matched = sp
            .hyps
            .iter()
            .filter(|&&h| hyp_to_ref[h].is_some_and(|r| sp.refs.contains(&r)))
            .count() as i64;
        total += nr * sp.dur;
        missed += (nr - nh).max(0) * sp.dur;
        fa += (nh - nr).max(0) * sp.dur;
        conf += (nr.min(nh) - matched) * sp.dur;
    }

    let mapping: Vec<(String, String)> = hyp_to_ref
        .iter()
        .enumerate()
        .filter_map(|(h, r)| {
            r.filter(|&r| overlap[r][h] > 0)
                .map(|r| (hyp_ids[h].clone(), ref_ids[r].clone()))
        })
        .collect();
    Ok(DerReport::from_counts(missed, fa, conf, total, mapping))
}
