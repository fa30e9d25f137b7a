use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeline::{build_regions, Tick, Timeline, Turn};

use super::graph::SpeakerGraph;

/// Exponent of the rank decay `1 / r^0.1`.
const RANK_DECAY: f64 = 0.1;

/// Whether hypotheses with more agreement rank first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOrder {
    #[default]
    Descending,
    Ascending,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankWeights {
    /// Hypothesis indices, best rank first.
    pub order: Vec<usize>,
    /// Normalized weight of each hypothesis, indexed like the input.
    pub weights: Vec<f64>,
    /// Total edge weight from each hypothesis to all others.
    pub scores: Vec<f64>,
}

/// Raw rank weights `1 / r^0.1` for ranks `1..=k`, normalized to sum to one.
pub fn normalized_rank_weights(k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=k).map(|r| (r as f64).powf(-RANK_DECAY)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Rank hypotheses by their total edge weight to all other hypotheses. Scores
/// are compared at a resolution of 1e-9 so that equal agreement ties
/// regardless of summation order; ties keep input order.
pub fn rank_weights(g: &SpeakerGraph, order: RankOrder) -> RankWeights {
    let k = g.num_hypotheses();
    let scores: Vec<f64> = (0..k)
        .map(|a| {
            let mut s = 0.0;
            for b in (0..k).filter(|&b| b != a) {
                for i in 0..g.size() {
                    for j in 0..g.size() {
                        s += g.weight(a, i, b, j);
                    }
                }
            }
            s
        })
        .collect();
    let keys: Vec<i64> = scores.iter().map(|s| (s * 1e9).round() as i64).collect();
    let mut ranked: Vec<usize> = (0..k).collect();
    match order {
        RankOrder::Descending => ranked.sort_by_key(|&h| std::cmp::Reverse(keys[h])),
        RankOrder::Ascending => ranked.sort_by_key(|&h| keys[h]),
    }
    let by_rank = normalized_rank_weights(k);
    let mut weights = vec![0.0; k];
    for (r, &h) in ranked.iter().enumerate() {
        weights[h] = by_rank[r];
    }
    RankWeights {
        order: ranked,
        weights,
        scores,
    }
}

/// Per-region outcome of voting, for diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VoteStats {
    pub regions: usize,
    /// Regions with some hypothesis speech where the rounded count was zero.
    pub silenced_regions: usize,
    /// Regions where ties at the cut added labels beyond the rounded count.
    pub tie_expanded_regions: usize,
}

/// Overlap-aware weighted voting over hypotheses in a shared label space.
///
/// Each region gets `round(sum_k w_k n_k)` speakers (half up, capped at
/// `max_speakers`): the labels with the largest summed weight, plus any label
/// tied with the last one taken.
pub fn vote(mapped: &[Timeline], weights: &[f64], max_speakers: usize) -> Result<(Timeline, VoteStats)> {
    if mapped.len() != weights.len() {
        return Err(Error::input(format!(
            "{} hypotheses but {} weights",
            mapped.len(),
            weights.len()
        )));
    }
    let regions = build_regions(mapped)?;
    let session = mapped[0].session().to_owned();
    let mut stats = VoteStats {
        regions: regions.len(),
        ..Default::default()
    };
    let mut spans: BTreeMap<String, Vec<(Tick, Tick)>> = BTreeMap::new();
    for region in &regions {
        let mean: f64 = region
            .per_hypothesis_speakers
            .iter()
            .zip(weights)
            .map(|(s, w)| w * s.len() as f64)
            .sum();
        let n_hat = ((mean + 0.5 + 1e-9).floor() as usize).min(max_speakers);
        if n_hat == 0 {
            stats.silenced_regions += 1;
            continue;
        }
        let mut score: BTreeMap<&str, f64> = BTreeMap::new();
        for (set, w) in region.per_hypothesis_speakers.iter().zip(weights) {
            for s in set {
                *score.entry(s.as_str()).or_insert(0.0) += w;
            }
        }
        let mut ranked: Vec<(&str, f64)> = score.into_iter().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut take = n_hat.min(ranked.len());
        let cut = ranked[take - 1].1;
        while take < ranked.len() && (ranked[take].1 - cut).abs() <= 1e-12 {
            take += 1;
        }
        if take > n_hat {
            stats.tie_expanded_regions += 1;
        }
        for &(label, _) in &ranked[..take] {
            let list = spans.entry(label.to_owned()).or_default();
            match list.last_mut() {
                Some(last) if last.1 == region.start => last.1 = region.end,
                _ => list.push((region.start, region.end)),
            }
        }
    }
    let turns = spans
        .into_iter()
        .flat_map(|(label, list)| {
            let session = session.clone();
            list.into_iter()
                .map(move |(s, e)| Turn::new(session.as_str(), label.as_str(), s, e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Timeline::new(session, turns)?, stats))
}
