//! Ensemble combination of overlap-aware diarization hypotheses.
//!
//! Speakers from all hypotheses form a weighted K-partite graph; a label
//! mapping partitions it into cliques, each clique becomes one output speaker,
//! and weighted voting over regions decides who speaks when.

mod graph;
mod local_search;
mod mapping;
mod vote;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeline::Timeline;

pub use graph::{build_graph, clique_weight, partition_weight, Partition, SpeakerGraph};
pub use local_search::{
    default_iterations, exchange_gain, local_search_polish, map_labels_rls, neighbors, Exchange,
    DEFAULT_EPOCHS,
};
pub use mapping::{
    exponential_search, map_labels_exponential, map_labels_greedy, map_labels_hungarian, CostTensor,
    ExponentialMapping, DEFAULT_BUDGET,
};
pub use vote::{normalized_rank_weights, rank_weights, vote, RankOrder, RankWeights, VoteStats};

pub use crate::hungarian::{hungarian_matching, Matching};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exponential,
    Hungarian,
    Rls,
    /// Exponential when the clique count fits the budget, else Hungarian.
    Auto,
}

#[derive(Debug, Clone)]
pub struct CombineOptions {
    pub method: Method,
    pub budget: u128,
    pub rls_epochs: usize,
    /// Defaults to `2K + 1`.
    pub rls_iterations: Option<usize>,
    pub seed: u64,
    pub max_speakers: usize,
    pub rank_order: RankOrder,
}

impl Default for CombineOptions {
    fn default() -> Self {
        CombineOptions {
            method: Method::Auto,
            budget: DEFAULT_BUDGET,
            rls_epochs: DEFAULT_EPOCHS,
            rls_iterations: None,
            seed: 0,
            max_speakers: 2,
            rank_order: RankOrder::Descending,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Combination {
    pub timeline: Timeline,
    /// `"hyp_<index>:<speaker>"` to output label, for every input speaker.
    pub mapping: BTreeMap<String, String>,
    pub method: Method,
    pub partition_weight: f64,
    pub graph_weight: f64,
    /// False only when the exponential search hit its node limit.
    pub proven_optimal: bool,
    pub vote: VoteStats,
}

/// Label mapping with the requested method. Rank order drives the Hungarian
/// merge order; randomized search is followed by deterministic polishing.
pub fn map_labels(
    g: &SpeakerGraph,
    ranks: &RankWeights,
    opts: &CombineOptions,
) -> Result<(Partition, Method, bool)> {
    let method = match opts.method {
        Method::Auto if g.clique_count() <= opts.budget => Method::Exponential,
        Method::Auto => Method::Hungarian,
        m => m,
    };
    let (p, proven) = match method {
        Method::Exponential => {
            let res = exponential_search(g, opts.budget, &ranks.order)?;
            (res.partition, res.proven_optimal)
        }
        Method::Hungarian => (map_labels_hungarian(g, &ranks.order)?, true),
        Method::Rls => {
            let iters = opts
                .rls_iterations
                .unwrap_or_else(|| default_iterations(g.num_hypotheses()));
            let p = map_labels_rls(g, opts.rls_epochs, iters, opts.seed)?;
            (local_search_polish(g, &p)?, true)
        }
        Method::Auto => unreachable!("auto resolved above"),
    };
    p.validate(g)?;
    Ok((p, method, proven))
}

/// Name each clique after its first real speaker in rank order that no earlier
/// clique has taken; cliques without one are named `spk_<index>`.
fn clique_names(g: &SpeakerGraph, p: &Partition, ranks: &RankWeights) -> Vec<String> {
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut names = Vec::with_capacity(p.members.len());
    for (c, m) in p.members.iter().enumerate() {
        let candidate = ranks
            .order
            .iter()
            .filter(|&&k| !g.is_dummy(k, m[k]))
            .map(|&k| &g.labels(k)[m[k]])
            .find(|s| !used.contains(*s))
            .cloned();
        let name = candidate.unwrap_or_else(|| {
            let mut n = format!("spk_{c}");
            while used.contains(&n) {
                n.push('_');
            }
            n
        });
        used.insert(name.clone());
        names.push(name);
    }
    names
}

/// Combine hypotheses of one session into a single timeline.
///
/// Hypotheses without speech are left out. A single remaining hypothesis is
/// returned as is.
pub fn combine(hyps: &[Timeline], opts: &CombineOptions) -> Result<Combination> {
    let Some(first) = hyps.first() else {
        return Err(Error::input("nothing to combine"));
    };
    let session = first.session().to_owned();
    if let Some(h) = hyps.iter().find(|h| h.session() != session) {
        return Err(Error::input(format!(
            "mixed sessions {:?} and {:?}",
            session,
            h.session()
        )));
    }
    let present: Vec<usize> = (0..hyps.len()).filter(|&k| !hyps[k].is_empty()).collect();
    if present.len() < 2 {
        let timeline = present
            .first()
            .map(|&k| hyps[k].clone())
            .unwrap_or_else(|| Timeline::empty(session.as_str()));
        let mapping = present
            .first()
            .map(|&k| {
                timeline
                    .speakers()
                    .into_iter()
                    .map(|s| (format!("hyp_{k}:{s}"), s))
                    .collect()
            })
            .unwrap_or_default();
        return Ok(Combination {
            timeline,
            mapping,
            method: opts.method,
            partition_weight: 0.0,
            graph_weight: 0.0,
            proven_optimal: true,
            vote: VoteStats::default(),
        });
    }

    let inputs: Vec<Timeline> = present.iter().map(|&k| hyps[k].clone()).collect();
    let g = build_graph(&inputs)?;
    let ranks = rank_weights(&g, opts.rank_order);
    let (partition, method, proven_optimal) = map_labels(&g, &ranks, opts)?;
    let names = clique_names(&g, &partition, &ranks);

    let mut per_hyp: Vec<BTreeMap<String, String>> = vec![BTreeMap::new(); inputs.len()];
    let mut mapping = BTreeMap::new();
    for (clique, name) in partition.real_cliques(&g).iter().zip(&names) {
        for &(k, i) in clique {
            let speaker = g.labels(k)[i].clone();
            mapping.insert(format!("hyp_{}:{}", present[k], speaker), name.clone());
            per_hyp[k].insert(speaker, name.clone());
        }
    }
    let mapped: Vec<Timeline> = inputs
        .iter()
        .zip(&per_hyp)
        .map(|(h, m)| h.relabel(m))
        .collect();
    let (timeline, vote_stats) = vote(&mapped, &ranks.weights, opts.max_speakers)?;
    Ok(Combination {
        timeline,
        mapping,
        method,
        partition_weight: partition.weight,
        graph_weight: g.total_weight(),
        proven_optimal,
        vote: vote_stats,
    })
}
