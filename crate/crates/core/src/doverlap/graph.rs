use serde::Serialize;

use crate::error::{Error, Result};
use crate::timeline::{speaker_activities, Timeline};

/// Complete K-partite speaker graph.
///
/// Hypothesis `k` owns vertices `0..size()`; indices at or beyond its real
/// speaker count are zero-weight padding vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerGraph {
    labels: Vec<Vec<String>>,
    size: usize,
    weights: Vec<f64>,
}

impl SpeakerGraph {
    /// Build from per-hypothesis speaker counts and a weight function
    /// `w(k, i, l, j)` called for real vertices with `k < l`. Speakers are named
    /// `s0`, `s1`, and so on.
    pub fn from_weights(counts: &[usize], mut w: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let labels = counts
            .iter()
            .map(|&c| (0..c).map(|i| format!("s{i}")).collect())
            .collect();
        let mut g = SpeakerGraph::empty(labels);
        for k in 0..counts.len() {
            for l in k + 1..counts.len() {
                for i in 0..counts[k] {
                    for j in 0..counts[l] {
                        g.set(k, i, l, j, w(k, i, l, j));
                    }
                }
            }
        }
        g
    }

    fn empty(labels: Vec<Vec<String>>) -> Self {
        let size = labels.iter().map(Vec::len).max().unwrap_or(0);
        let n = labels.len() * size;
        SpeakerGraph {
            labels,
            size,
            weights: vec![0.0; n * n],
        }
    }

    fn set(&mut self, k: usize, i: usize, l: usize, j: usize, w: f64) {
        let n = self.num_hypotheses() * self.size;
        let (a, b) = (self.vertex(k, i), self.vertex(l, j));
        self.weights[a * n + b] = w;
        self.weights[b * n + a] = w;
    }

    fn vertex(&self, k: usize, i: usize) -> usize {
        k * self.size + i
    }

    pub fn num_hypotheses(&self) -> usize {
        self.labels.len()
    }

    /// Vertices per hypothesis after completion.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Real speaker labels of hypothesis `k`, sorted.
    pub fn labels(&self, k: usize) -> &[String] {
        &self.labels[k]
    }

    pub fn speaker_count(&self, k: usize) -> usize {
        self.labels[k].len()
    }

    pub fn is_dummy(&self, k: usize, i: usize) -> bool {
        i >= self.labels[k].len()
    }

    /// Weight between vertex `i` of hypothesis `k` and vertex `j` of hypothesis `l`.
    /// Zero within a hypothesis.
    pub fn weight(&self, k: usize, i: usize, l: usize, j: usize) -> f64 {
        if k == l {
            return 0.0;
        }
        let n = self.num_hypotheses() * self.size;
        self.weights[self.vertex(k, i) * n + self.vertex(l, j)]
    }

    /// `C x C` block of weights between hypotheses `k` and `l`.
    pub fn face(&self, k: usize, l: usize) -> Vec<Vec<f64>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.weight(k, i, l, j)).collect())
            .collect()
    }

    /// Sum of all edge weights.
    pub fn total_weight(&self) -> f64 {
        let k = self.num_hypotheses();
        let mut acc = 0.0;
        for a in 0..k {
            for b in a + 1..k {
                for i in 0..self.size {
                    for j in 0..self.size {
                        acc += self.weight(a, i, b, j);
                    }
                }
            }
        }
        acc
    }

    /// Number of maximal cliques of the completed graph, saturating.
    pub fn clique_count(&self) -> u128 {
        (0..self.num_hypotheses()).fold(1u128, |acc, _| acc.saturating_mul(self.size as u128))
    }
}

/// Speaker graph of several hypotheses for one session. Edge weights are the
/// ratio of jointly active time to time where either speaker is active.
pub fn build_graph(hyps: &[Timeline]) -> Result<SpeakerGraph> {
    if hyps.len() < 2 {
        return Err(Error::input("combination needs at least two hypotheses"));
    }
    let session = hyps[0].session();
    if let Some(h) = hyps.iter().find(|h| h.session() != session) {
        return Err(Error::input(format!(
            "mixed sessions {:?} and {:?}",
            session,
            h.session()
        )));
    }
    let activities: Vec<_> = hyps.iter().map(speaker_activities).collect();
    if let Some(k) = activities.iter().position(Vec::is_empty) {
        return Err(Error::input(format!(
            "hypothesis {k} has no speakers in session {session:?}"
        )));
    }
    let labels = activities
        .iter()
        .map(|a| a.iter().map(|s| s.speaker.clone()).collect())
        .collect();
    let mut g = SpeakerGraph::empty(labels);
    for k in 0..activities.len() {
        for l in k + 1..activities.len() {
            for (i, u) in activities[k].iter().enumerate() {
                for (j, v) in activities[l].iter().enumerate() {
                    let inter = u.intervals.intersection_len(&v.intervals);
                    if inter > 0 {
                        let union = u.intervals.union_len(&v.intervals);
                        g.set(k, i, l, j, inter as f64 / union as f64);
                    }
                }
            }
        }
    }
    Ok(g)
}

/// A partition of the completed graph into `C` cliques with exactly one vertex
/// from every hypothesis. `members[c][k]` is the vertex of hypothesis `k` in
/// clique `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub members: Vec<Vec<usize>>,
    pub weight: f64,
}

impl Partition {
    /// Canonicalize clique order (by member tuple) and compute the weight.
    pub fn new(g: &SpeakerGraph, mut members: Vec<Vec<usize>>) -> Self {
        members.sort();
        let weight = partition_weight(g, &members);
        Partition { members, weight }
    }

    /// Orthogonality, full cover and weight consistency.
    pub fn validate(&self, g: &SpeakerGraph) -> Result<()> {
        let (k, c) = (g.num_hypotheses(), g.size());
        if self.members.len() != c || self.members.iter().any(|m| m.len() != k) {
            return Err(Error::Invariant("partition has the wrong shape".into()));
        }
        for h in 0..k {
            let mut seen = vec![false; c];
            for m in &self.members {
                if m[h] >= c || std::mem::replace(&mut seen[m[h]], true) {
                    return Err(Error::Invariant(format!(
                        "hypothesis {h} is not covered exactly once"
                    )));
                }
            }
        }
        let w = partition_weight(g, &self.members);
        if (w - self.weight).abs() > 1e-9 * (1.0 + w.abs()) {
            return Err(Error::Invariant(format!(
                "stored partition weight {} differs from recomputed {w}",
                self.weight
            )));
        }
        Ok(())
    }

    /// Cliques with padding vertices removed: `(hypothesis, vertex)` pairs.
    pub fn real_cliques(&self, g: &SpeakerGraph) -> Vec<Vec<(usize, usize)>> {
        self.members
            .iter()
            .map(|m| {
                m.iter()
                    .enumerate()
                    .filter(|&(k, &i)| !g.is_dummy(k, i))
                    .map(|(k, &i)| (k, i))
                    .collect()
            })
            .collect()
    }
}

pub fn clique_weight(g: &SpeakerGraph, clique: &[usize]) -> f64 {
    let mut acc = 0.0;
    for k in 0..clique.len() {
        for l in k + 1..clique.len() {
            acc += g.weight(k, clique[k], l, clique[l]);
        }
    }
    acc
}

pub fn partition_weight(g: &SpeakerGraph, members: &[Vec<usize>]) -> f64 {
    members.iter().map(|m| clique_weight(g, m)).sum()
}
