use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::graph::{Partition, SpeakerGraph};

const EPS: f64 = 1e-12;

/// Default number of random restarts.
pub const DEFAULT_EPOCHS: usize = 1000;

/// Default iterations per epoch for `k` hypotheses.
pub fn default_iterations(k: usize) -> usize {
    2 * k + 1
}

/// A swap of the hypothesis-`k` vertices of cliques `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exchange {
    pub hypothesis: usize,
    pub a: usize,
    pub b: usize,
}

/// Every neighbor of a partition, hypothesis by hypothesis, then by clique pair.
pub fn neighbors(g: &SpeakerGraph) -> Vec<Exchange> {
    let c = g.size();
    let mut out = Vec::with_capacity(g.num_hypotheses() * c * c.saturating_sub(1) / 2);
    for hypothesis in 0..g.num_hypotheses() {
        for a in 0..c {
            for b in a + 1..c {
                out.push(Exchange { hypothesis, a, b });
            }
        }
    }
    out
}

/// Weight change from applying `x` to `members`.
pub fn exchange_gain(g: &SpeakerGraph, members: &[Vec<usize>], x: Exchange) -> f64 {
    let k = x.hypothesis;
    let (ma, mb) = (&members[x.a], &members[x.b]);
    let (u, v) = (ma[k], mb[k]);
    let mut d = 0.0;
    for l in 0..ma.len() {
        if l != k {
            d += g.weight(k, v, l, ma[l]) + g.weight(k, u, l, mb[l])
                - g.weight(k, u, l, ma[l])
                - g.weight(k, v, l, mb[l]);
        }
    }
    d
}

fn apply(members: &mut [Vec<usize>], x: Exchange) {
    let k = x.hypothesis;
    let u = members[x.a][k];
    members[x.a][k] = members[x.b][k];
    members[x.b][k] = u;
}

/// Deterministic local search from a feasible partition.
///
/// While the weight is below `w(G)/C`, move to the first neighbor that shrinks
/// the shortfall by at least the factor `1 - 2C/|N|`; then take first
/// improvements until no neighbor is heavier.
pub fn local_search_polish(g: &SpeakerGraph, start: &Partition) -> Result<Partition> {
    start.validate(g)?;
    let c = g.size();
    let nbrs = neighbors(g);
    if nbrs.is_empty() {
        return Ok(start.clone());
    }
    let target = g.total_weight() / c as f64;
    let factor = 1.0 - 2.0 * c as f64 / nbrs.len() as f64;
    let mut members = start.members.clone();
    let mut weight = start.weight;
    let mut changed = false;

    while weight - target < -EPS {
        let f = weight - target;
        let step = nbrs
            .iter()
            .map(|&x| (x, exchange_gain(g, &members, x)))
            .find(|&(_, d)| f + d >= factor * f - EPS)
            .or_else(|| {
                nbrs.iter()
                    .map(|&x| (x, exchange_gain(g, &members, x)))
                    .find(|&(_, d)| d > EPS)
            });
        let Some((x, d)) = step else {
            return Err(Error::Invariant(
                "local search found no neighbor below the weight bound".into(),
            ));
        };
        apply(&mut members, x);
        weight += d;
        changed = true;
    }

    loop {
        let Some(x) = nbrs
            .iter()
            .copied()
            .find(|&x| exchange_gain(g, &members, x) > EPS)
        else {
            break;
        };
        apply(&mut members, x);
        changed = true;
    }
    if !changed {
        return Ok(start.clone());
    }
    Ok(Partition::new(g, members))
}

fn run_epoch(g: &SpeakerGraph, iterations: usize, seed: u64, epoch: usize) -> Partition {
    let (k, c) = (g.num_hypotheses(), g.size());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);

    // clique_of[h][i]: clique holding vertex i of hypothesis h.
    let mut clique_of: Vec<Vec<usize>> = (0..k)
        .map(|_| {
            let mut p: Vec<usize> = (0..c).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();

    for _ in 0..iterations {
        // Edges outside the partition, with their weights.
        let mut edges: Vec<((usize, usize), (usize, usize), f64)> = Vec::new();
        let mut total = 0.0;
        for a in 0..k {
            for b in a + 1..k {
                for i in 0..c {
                    for j in 0..c {
                        let w = g.weight(a, i, b, j);
                        if w > 0.0 && clique_of[a][i] != clique_of[b][j] {
                            total += w;
                            edges.push(((a, i), (b, j), w));
                        }
                    }
                }
            }
        }
        if total <= 0.0 {
            break;
        }
        let mut pick = rng.random_range(0.0..total);
        let mut chosen = edges[edges.len() - 1];
        for e in &edges {
            if pick < e.2 {
                chosen = *e;
                break;
            }
            pick -= e.2;
        }
        for (h, i) in [chosen.0, chosen.1] {
            if c > 1 && rng.random_bool(0.5) {
                let mut partner = rng.random_range(0..c - 1);
                if partner >= i {
                    partner += 1;
                }
                clique_of[h].swap(i, partner);
            }
        }
    }

    let mut members = vec![vec![0usize; k]; c];
    for (h, row) in clique_of.iter().enumerate() {
        for (i, &q) in row.iter().enumerate() {
            members[q][h] = i;
        }
    }
    Partition::new(g, members)
}

/// Randomized local search: independent epochs from random partitions, each
/// sampling an outside edge in proportion to its weight and swapping each of
/// its endpoints with probability one half. Returns the heaviest end-of-epoch
/// partition, ties going to the earliest epoch.
///
/// Epoch `n` draws from stream `n` of a generator seeded with `seed`, so the
/// result does not depend on how epochs are scheduled across threads.
pub fn map_labels_rls(g: &SpeakerGraph, epochs: usize, iterations: usize, seed: u64) -> Result<Partition> {
    if epochs == 0 || iterations == 0 {
        return Err(Error::input("rls needs at least one epoch and one iteration"));
    }
    let results: Vec<Partition> = (0..epochs)
        .into_par_iter()
        .map(|n| run_epoch(g, iterations, seed, n))
        .collect();
    let mut best = 0;
    for (n, p) in results.iter().enumerate() {
        if p.weight > results[best].weight + EPS {
            best = n;
        }
    }
    Ok(results.into_iter().nth(best).expect("at least one epoch"))
}
