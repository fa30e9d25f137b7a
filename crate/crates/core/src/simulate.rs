//! Meeting-style session simulation from pause and overlap statistics.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeline::{Tick, Timeline, Turn};

/// Histogram bin width: 0.1 s.
pub const BIN_TICKS: Tick = 1_000;

/// A source utterance available for placement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub speaker: String,
    pub duration: Tick,
}

/// An utterance placed in a simulated session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub utterance_id: String,
    pub speaker: String,
    pub offset: Tick,
    pub duration: Tick,
}

impl Placement {
    pub fn end(&self) -> Tick {
        self.offset + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSession {
    pub id: String,
    pub placements: Vec<Placement>,
}

impl SimSession {
    pub fn timeline(&self) -> Result<Timeline> {
        let turns = self
            .placements
            .iter()
            .map(|p| Turn::new(self.id.as_str(), p.speaker.as_str(), p.offset, p.end()))
            .collect::<Result<Vec<_>>>()?;
        Timeline::new(self.id.as_str(), turns)
    }
}

/// A duration distribution in ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Counts per 0.1 s bin, keyed by bin index.
    Histogram(BTreeMap<i64, u64>),
    Fixed(Tick),
}

impl Distribution {
    pub fn from_values(values: &[Tick]) -> Self {
        let mut bins = BTreeMap::new();
        for &v in values {
            *bins.entry(v.div_euclid(BIN_TICKS)).or_insert(0u64) += 1;
        }
        Distribution::Histogram(bins)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Distribution::Histogram(b) if b.is_empty())
    }

    pub fn count(&self) -> u64 {
        match self {
            Distribution::Histogram(b) => b.values().sum(),
            Distribution::Fixed(_) => 1,
        }
    }

    /// Pick a bin in proportion to its count, then a uniform tick inside it.
    /// Never returns less than one tick.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Option<Tick> {
        match self {
            Distribution::Fixed(t) => Some((*t).max(1)),
            Distribution::Histogram(bins) => {
                let total = self.count();
                if total == 0 {
                    return None;
                }
                let mut pick = rng.random_range(0..total);
                for (&bin, &n) in bins {
                    if pick < n {
                        let v = bin * BIN_TICKS + rng.random_range(0..BIN_TICKS);
                        return Some(v.max(1));
                    }
                    pick -= n;
                }
                unreachable!("pick is below the total count")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationStats {
    pub same_speaker_pause: Distribution,
    pub diff_speaker_pause: Distribution,
    pub overlap_duration: Distribution,
    pub p_overlap: f64,
}

impl ConversationStats {
    /// Fixed parameters used for artificial meeting mixtures: 0.5 s pauses,
    /// 1.0 s overlaps, overlap probability 0.8.
    pub fn aimix() -> Self {
        ConversationStats {
            same_speaker_pause: Distribution::Fixed(5_000),
            diff_speaker_pause: Distribution::Fixed(5_000),
            overlap_duration: Distribution::Fixed(10_000),
            p_overlap: 0.8,
        }
    }
}

/// Gap statistics between consecutive turns, in turn order.
pub fn fit_stats(sessions: &[Timeline]) -> ConversationStats {
    let (mut same, mut diff, mut ovl) = (Vec::new(), Vec::new(), Vec::new());
    for tl in sessions {
        for pair in tl.turns().windows(2) {
            let t = pair[1].start - pair[0].end;
            if pair[1].speaker == pair[0].speaker {
                same.push(t);
            } else if t > 0 {
                diff.push(t);
            } else {
                ovl.push(-t);
            }
        }
    }
    let denom = diff.len() + ovl.len();
    ConversationStats {
        same_speaker_pause: Distribution::from_values(&same),
        diff_speaker_pause: Distribution::from_values(&diff),
        overlap_duration: Distribution::from_values(&ovl),
        p_overlap: if denom == 0 {
            0.0
        } else {
            ovl.len() as f64 / denom as f64
        },
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub max_speakers: usize,
    pub max_dur_per_speaker: Tick,
    pub seed: u64,
    /// Replaces the fitted overlap probability.
    pub p_overlap: Option<f64>,
    /// Fixed number of speakers per session instead of a uniform draw from
    /// `1..=max_speakers` (still clipped to the speakers left).
    pub speakers_per_session: Option<usize>,
}

fn sample_gap<R: Rng>(primary: &Distribution, fallback: &Distribution, rng: &mut R) -> Tick {
    primary
        .sample(rng)
        .or_else(|| fallback.sample(rng))
        .unwrap_or(0)
}

/// Generate sessions until every utterance has been placed exactly once.
pub fn simulate(
    utterances: &[Utterance],
    stats: &ConversationStats,
    config: &SimConfig,
) -> Result<Vec<SimSession>> {
    if utterances.is_empty() {
        return Err(Error::input("no utterances to simulate from"));
    }
    if config.max_speakers == 0 {
        return Err(Error::input("max speakers must be at least 1"));
    }
    if config.max_dur_per_speaker <= 0 {
        return Err(Error::input("max duration per speaker must be positive"));
    }
    if let Some(u) = utterances.iter().find(|u| u.duration <= 0) {
        return Err(Error::input(format!("utterance {:?} has non-positive duration", u.id)));
    }
    let p_overlap = config.p_overlap.unwrap_or(stats.p_overlap);
    if !(0.0..=1.0).contains(&p_overlap) {
        return Err(Error::input(format!("p_overlap {p_overlap} outside [0, 1]")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut buckets: BTreeMap<&str, Vec<&Utterance>> = BTreeMap::new();
    for u in utterances {
        buckets.entry(u.speaker.as_str()).or_default().push(u);
    }
    let mut buckets: Vec<Vec<&Utterance>> = buckets.into_values().collect();
    for b in &mut buckets {
        b.shuffle(&mut rng);
    }

    let mut sessions = Vec::new();
    loop {
        let live: Vec<usize> = (0..buckets.len()).filter(|&s| !buckets[s].is_empty()).collect();
        if live.is_empty() {
            break;
        }
        let k = config
            .speakers_per_session
            .unwrap_or_else(|| rng.random_range(1..=config.max_speakers))
            .clamp(1, live.len());
        let chosen: Vec<usize> = live.choose_multiple(&mut rng, k).copied().collect();

        let mut picked: Vec<&Utterance> = Vec::new();
        for s in chosen {
            let mut total = 0;
            while total < config.max_dur_per_speaker {
                let Some(u) = buckets[s].pop() else { break };
                total += u.duration;
                picked.push(u);
            }
        }
        picked.shuffle(&mut rng);

        let mut placements: Vec<Placement> = Vec::with_capacity(picked.len());
        for (i, u) in picked.iter().enumerate() {
            let offset = match placements.last() {
                None => 0,
                Some(prev) => {
                    let gap = if picked[i - 1].speaker == u.speaker {
                        sample_gap(&stats.same_speaker_pause, &stats.diff_speaker_pause, &mut rng)
                    } else if rng.random_bool(p_overlap) {
                        -sample_gap(&stats.overlap_duration, &Distribution::Fixed(1), &mut rng)
                    } else {
                        sample_gap(&stats.diff_speaker_pause, &stats.same_speaker_pause, &mut rng)
                    };
                    (prev.end() + gap).max(prev.offset).max(0)
                }
            };
            placements.push(Placement {
                utterance_id: u.id.clone(),
                speaker: u.speaker.clone(),
                offset,
                duration: u.duration,
            });
        }
        sessions.push(SimSession {
            id: format!("sim-{:05}", sessions.len()),
            placements,
        });
    }
    Ok(sessions)
}

/// Count `(overlapping, total)` speaker-change transitions in placement order.
pub fn overlap_transitions(sessions: &[SimSession]) -> (usize, usize) {
    let (mut ovl, mut total) = (0, 0);
    for s in sessions {
        for pair in s.placements.windows(2) {
            if pair[0].speaker != pair[1].speaker {
                total += 1;
                if pair[1].offset < pair[0].end() {
                    ovl += 1;
                }
            }
        }
    }
    (ovl, total)
}
