use std::collections::BTreeMap;

use crate::hungarian::lexmin_assignment;
use crate::io::TranscriptSegment;

use super::levenshtein::{edit_distance, levenshtein, EditCounts};
use super::{SpeakerPair, WerAssignment, WerReport};

/// Concatenate each speaker's segments in `(start, end)` order.
/// Speakers are returned sorted by label.
pub fn speaker_transcripts(segments: &[TranscriptSegment]) -> Vec<(String, Vec<&str>)> {
    let mut by_speaker: BTreeMap<&str, Vec<&TranscriptSegment>> = BTreeMap::new();
    for s in segments {
        by_speaker.entry(s.speaker.as_str()).or_default().push(s);
    }
    by_speaker
        .into_iter()
        .map(|(spk, mut segs)| {
            segs.sort_by_key(|s| (s.start, s.end));
            let words = segs.iter().flat_map(|s| s.words()).collect();
            (spk.to_owned(), words)
        })
        .collect()
}

/// Concatenated minimum-permutation WER.
///
/// Speaker counts are equalized with empty transcripts, so an unmatched
/// reference speaker costs all its words as deletions and an unmatched
/// hypothesis speaker costs all its words as insertions. Among optimal pairings
/// the one that is lexicographically smallest by reference speaker is reported.
pub fn compute_cpwer(
    reference: &[TranscriptSegment],
    hypothesis: &[TranscriptSegment],
) -> WerReport {
    let refs = speaker_transcripts(reference);
    let hyps = speaker_transcripts(hypothesis);
    let n = refs.len().max(hyps.len());
    fn words<'s, 'a>(side: &'s [(String, Vec<&'a str>)], i: usize) -> &'s [&'a str] {
        side.get(i).map(|(_, w)| w.as_slice()).unwrap_or(&[])
    }

    let costs: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            let r = words(&refs, i);
            (0..n)
                .map(|j| edit_distance(r, words(&hyps, j)) as i64)
                .collect()
        })
        .collect();
    let (_, pairs) = lexmin_assignment(&costs, n);

    let mut counts = EditCounts::default();
    let mut assignment = Vec::with_capacity(n);
    for (i, j) in pairs.iter().enumerate() {
        let j = j.expect("square assignment is perfect");
        counts.add(&levenshtein(words(&refs, i), words(&hyps, j)));
        let pair = SpeakerPair {
            reference: refs.get(i).map(|(s, _)| s.clone()),
            hypothesis: hyps.get(j).map(|(s, _)| s.clone()),
        };
        if pair.reference.is_some() || pair.hypothesis.is_some() {
            assignment.push(pair);
        }
    }
    let ref_words = refs.iter().map(|(_, w)| w.len()).sum();
    WerReport::from_counts(counts, ref_words, WerAssignment::Speakers(assignment))
}
