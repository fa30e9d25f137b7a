//! Diarization and multi-talker ASR scoring.

mod cpwer;
mod der;
mod levenshtein;
mod orcwer;
mod wder;

use serde::Serialize;

pub use cpwer::{compute_cpwer, speaker_transcripts};
pub use der::{compute_der, DerRates, DerReport};
pub use levenshtein::{align, count_ops, edit_distance, levenshtein, EditCounts, EditOp};
pub use orcwer::{compute_orcwer, orc_align, ChannelAlignment, OrcAlignment, MAX_ORC_CHANNELS};
pub use wder::{compute_wder, tagged_channels, WderReport};

/// Word error counts for one session or an aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WerReport {
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
    pub errors: usize,
    pub ref_words: usize,
    /// `errors / ref_words`; with no reference words, 0 if there are no errors
    /// and infinite (serialized as `null`) otherwise.
    pub rate: f64,
    pub assignment: WerAssignment,
}

/// How hypothesis material was matched to the reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WerAssignment {
    /// cpWER speaker pairing; `None` on either side means the speaker was
    /// scored against an empty transcript.
    Speakers(Vec<SpeakerPair>),
    /// ORC-WER output channel for each reference segment, in input order.
    Channels(Vec<usize>),
    /// Aggregates carry no assignment.
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpeakerPair {
    pub reference: Option<String>,
    pub hypothesis: Option<String>,
}

impl WerReport {
    pub fn from_counts(counts: EditCounts, ref_words: usize, assignment: WerAssignment) -> Self {
        let rate = if ref_words > 0 {
            counts.distance as f64 / ref_words as f64
        } else if counts.distance == 0 {
            0.0
        } else {
            f64::INFINITY
        };
        WerReport {
            insertions: counts.insertions,
            deletions: counts.deletions,
            substitutions: counts.substitutions,
            errors: counts.distance,
            ref_words,
            rate,
            assignment,
        }
    }

    pub fn counts(&self) -> EditCounts {
        EditCounts {
            distance: self.errors,
            insertions: self.insertions,
            deletions: self.deletions,
            substitutions: self.substitutions,
        }
    }
}
