use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::io::{TaggedSegment, TranscriptSegment};

use super::cpwer::compute_cpwer;
use super::levenshtein::EditOp;
use super::orcwer::{check_sorted, orc_align};
use super::WerAssignment;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WderReport {
    pub correct_words: usize,
    pub speaker_errors: usize,
    /// `speaker_errors / correct_words`, 0 when no word is correct.
    pub rate: f64,
}

impl WderReport {
    pub fn from_counts(correct_words: usize, speaker_errors: usize) -> Self {
        let rate = if correct_words == 0 {
            0.0
        } else {
            speaker_errors as f64 / correct_words as f64
        };
        WderReport {
            correct_words,
            speaker_errors,
            rate,
        }
    }
}

/// Build speaker-tagged word channels from hypothesis segments.
///
/// Channel `c` holds the words of every segment tagged `c`, ordered by
/// `(start, end)`. Channels without segments are empty.
pub fn tagged_channels(hypothesis: &[TaggedSegment]) -> Vec<Vec<(&str, &str)>> {
    let n = hypothesis.iter().map(|t| t.channel + 1).max().unwrap_or(0);
    let mut segs: Vec<Vec<&TranscriptSegment>> = vec![Vec::new(); n];
    for t in hypothesis {
        segs[t.channel].push(&t.segment);
    }
    segs.into_iter()
        .map(|mut list| {
            list.sort_by_key(|s| (s.start, s.end));
            list.iter()
                .flat_map(|s| s.words().into_iter().map(move |w| (w, s.speaker.as_str())))
                .collect()
        })
        .collect()
}

/// Word-level diarization error rate.
///
/// Correct words are the matches of the optimal reference combination
/// alignment; a correct word is a speaker error when its hypothesis speaker,
/// mapped through the optimal cpWER speaker pairing, differs from the
/// reference speaker.
pub fn compute_wder(reference: &[TranscriptSegment], hypothesis: &[TaggedSegment]) -> Result<WderReport> {
    check_sorted(reference)?;
    let mut channels = tagged_channels(hypothesis);
    if channels.is_empty() {
        channels.push(Vec::new());
    }
    let segments: Vec<Vec<&str>> = reference.iter().map(|s| s.words()).collect();
    let words: Vec<Vec<&str>> = channels
        .iter()
        .map(|c| c.iter().map(|w| w.0).collect())
        .collect();
    let orc = orc_align(&segments, &words)?;

    let hyp_segments: Vec<TranscriptSegment> = hypothesis.iter().map(|t| t.segment.clone()).collect();
    let cp = compute_cpwer(reference, &hyp_segments);
    let mut hyp_to_ref: BTreeMap<&str, &str> = BTreeMap::new();
    if let WerAssignment::Speakers(pairs) = &cp.assignment {
        for p in pairs {
            if let (Some(r), Some(h)) = (&p.reference, &p.hypothesis) {
                hyp_to_ref.insert(h.as_str(), r.as_str());
            }
        }
    }

    let (mut correct, mut errors) = (0, 0);
    for (c, ch) in orc.channels.iter().enumerate() {
        for op in &ch.ops {
            if let EditOp::Match { r, h } = *op {
                correct += 1;
                let (seg, _) = ch.ref_words[r];
                let tag = channels[c][h].1;
                if hyp_to_ref.get(tag).copied() != Some(reference[seg].speaker.as_str()) {
                    errors += 1;
                }
            }
        }
    }
    Ok(WderReport::from_counts(correct, errors))
}
