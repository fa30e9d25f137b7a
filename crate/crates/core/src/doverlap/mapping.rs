use crate::error::{Error, Result};
use crate::hungarian::hungarian_matching;

use super::graph::{Partition, SpeakerGraph};

/// Default limit on the number of maximal cliques for the exponential method.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Search nodes explored before the exact search settles for its incumbent.
const NODE_LIMIT: usize = 200_000;

const EPS: f64 = 1e-12;

/// Weight of every maximal clique of the completed graph.
///
/// Entry `(i_0, ..., i_{K-1})` lives at `sum_k i_k * C^(K-1-k)`, so flat index
/// order is lexicographic tuple order.
#[derive(Debug, Clone)]
pub struct CostTensor {
    hyps: usize,
    size: usize,
    data: Vec<f64>,
}

impl CostTensor {
    /// Sum the pairwise faces by broadcasting, one hypothesis axis at a time.
    pub fn new(g: &SpeakerGraph, budget: u128) -> Result<Self> {
        let (k, c) = (g.num_hypotheses(), g.size());
        let cliques = g.clique_count();
        if cliques > budget {
            return Err(Error::Budget(format!(
                "exponential mapping needs {cliques} cliques ({c}^{k}), over the budget of {budget}; \
                 use the hungarian or rls method, or raise the budget"
            )));
        }
        let mut data = vec![0.0f64];
        for l in 0..k {
            let mut next = Vec::with_capacity(data.len() * c);
            for &v in &data {
                next.extend(std::iter::repeat_n(v, c));
            }
            for a in 0..l {
                let face = g.face(a, l);
                let stride = c.pow((l - a) as u32);
                for (idx, v) in next.iter_mut().enumerate() {
                    *v += face[(idx / stride) % c][idx % c];
                }
            }
            data = next;
        }
        Ok(CostTensor { hyps: k, size: c, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, tuple: &[usize]) -> f64 {
        self.data[self.index(tuple)]
    }

    fn index(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &i| acc * self.size + i)
    }

    fn tuple(&self, mut idx: usize) -> Vec<usize> {
        let mut t = vec![0; self.hyps];
        for slot in t.iter_mut().rev() {
            *slot = idx % self.size;
            idx /= self.size;
        }
        t
    }
}

/// Repeatedly take the heaviest clique among unused vertices. Ties go to the
/// lexicographically smallest vertex tuple.
pub fn map_labels_greedy(g: &SpeakerGraph, budget: u128) -> Result<Partition> {
    let tensor = CostTensor::new(g, budget)?;
    Ok(greedy_from_tensor(g, &tensor))
}

fn greedy_from_tensor(g: &SpeakerGraph, tensor: &CostTensor) -> Partition {
    let (k, c) = (g.num_hypotheses(), g.size());
    let mut used = vec![vec![false; c]; k];
    let mut members = Vec::with_capacity(c);
    for _ in 0..c {
        let mut best: Option<(f64, usize)> = None;
        'scan: for (idx, &w) in tensor.data.iter().enumerate() {
            if best.is_some_and(|(bw, _)| w <= bw) {
                continue;
            }
            let mut rest = idx;
            for h in (0..k).rev() {
                if used[h][rest % c] {
                    continue 'scan;
                }
                rest /= c;
            }
            best = Some((w, idx));
        }
        let (_, idx) = best.expect("an unused clique remains");
        let tuple = tensor.tuple(idx);
        for (h, &i) in tuple.iter().enumerate() {
            used[h][i] = true;
        }
        members.push(tuple);
    }
    Partition::new(g, members)
}

/// Outcome of the exact clique-partition search.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialMapping {
    pub partition: Partition,
    /// False when the search stopped at its node limit; the partition is then
    /// the best one found, still at least as heavy as the greedy and
    /// Hungarian mappings.
    pub proven_optimal: bool,
}

struct Search<'a> {
    g: &'a SpeakerGraph,
    tensor: &'a CostTensor,
    best: f64,
    best_members: Vec<Vec<usize>>,
    nodes: usize,
    exhausted: bool,
}

impl Search<'_> {
    /// Sum over hypothesis pairs of the best matching among remaining vertices.
    fn upper_bound(&self, remaining: &[Vec<usize>]) -> f64 {
        let k = remaining.len();
        let mut ub = 0.0;
        for a in 0..k {
            for b in a + 1..k {
                let n = remaining[a].len().max(remaining[b].len());
                let w: Vec<Vec<f64>> = (0..n)
                    .map(|x| {
                        (0..n)
                            .map(|y| match (remaining[a].get(x), remaining[b].get(y)) {
                                (Some(&i), Some(&j)) => self.g.weight(a, i, b, j),
                                _ => 0.0,
                            })
                            .collect()
                    })
                    .collect();
                ub += hungarian_matching(&w).weight;
            }
        }
        ub
    }

    fn run(&mut self, remaining: &mut Vec<Vec<usize>>, cur: f64, chosen: &mut Vec<Vec<usize>>) {
        if remaining[0].is_empty() {
            if cur > self.best + EPS {
                self.best = cur;
                self.best_members = chosen.clone();
            }
            return;
        }
        self.nodes += 1;
        if self.nodes > NODE_LIMIT {
            self.exhausted = true;
            return;
        }
        if cur + self.upper_bound(remaining) <= self.best + EPS {
            return;
        }

        // Every clique holds exactly one vertex of hypothesis 0: branch on the
        // cliques through its smallest remaining vertex, heaviest first.
        let pivot = remaining[0][0];
        let mut children: Vec<(f64, Vec<usize>)> = Vec::new();
        let mut tuple = vec![pivot; remaining.len()];
        let mut pos = vec![0usize; remaining.len()];
        loop {
            for h in 1..remaining.len() {
                tuple[h] = remaining[h][pos[h]];
            }
            children.push((self.tensor.get(&tuple), tuple.clone()));
            let mut h = remaining.len() - 1;
            loop {
                if h == 0 {
                    break;
                }
                pos[h] += 1;
                if pos[h] < remaining[h].len() {
                    break;
                }
                pos[h] = 0;
                h -= 1;
            }
            if h == 0 {
                break;
            }
        }
        children.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

        remaining[0].remove(0);
        let loose = self.upper_bound(remaining);
        remaining[0].insert(0, pivot);

        for (w, clique) in children {
            if cur + w + loose <= self.best + EPS || self.exhausted {
                break;
            }
            let saved = remaining.clone();
            for (h, &i) in clique.iter().enumerate() {
                remaining[h].retain(|&v| v != i);
            }
            chosen.push(clique);
            self.run(remaining, cur + w, chosen);
            chosen.pop();
            *remaining = saved;
        }
    }
}

/// Maximum-weight clique partition by branch and bound over the cost tensor.
///
/// The incumbent starts as the better of the greedy clique extraction and the
/// Hungarian mapping in `order`, so the result is never lighter than either.
pub fn exponential_search(g: &SpeakerGraph, budget: u128, order: &[usize]) -> Result<ExponentialMapping> {
    let tensor = CostTensor::new(g, budget)?;
    let greedy = greedy_from_tensor(g, &tensor);
    let hungarian = map_labels_hungarian(g, order)?;
    let seed = if hungarian.weight > greedy.weight + EPS {
        hungarian
    } else {
        greedy
    };
    let mut search = Search {
        g,
        tensor: &tensor,
        best: seed.weight,
        best_members: seed.members.clone(),
        nodes: 0,
        exhausted: false,
    };
    let mut remaining: Vec<Vec<usize>> = (0..g.num_hypotheses()).map(|_| (0..g.size()).collect()).collect();
    if g.size() > 0 && g.num_hypotheses() > 0 {
        search.run(&mut remaining, 0.0, &mut Vec::new());
    }
    let proven_optimal = !search.exhausted;
    Ok(ExponentialMapping {
        partition: Partition::new(g, search.best_members),
        proven_optimal,
    })
}

/// Exponential mapping with hypotheses in input order for the Hungarian seed.
pub fn map_labels_exponential(g: &SpeakerGraph, budget: u128) -> Result<Partition> {
    let order: Vec<usize> = (0..g.num_hypotheses()).collect();
    Ok(exponential_search(g, budget, &order)?.partition)
}

/// Pairwise Hungarian matching and merging of hypotheses in `order`.
///
/// The running merged set keeps one group per clique; matching hypothesis `k`
/// against it uses, for each group, the summed weight of its members to each
/// vertex of `k`.
pub fn map_labels_hungarian(g: &SpeakerGraph, order: &[usize]) -> Result<Partition> {
    let (k, c) = (g.num_hypotheses(), g.size());
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..k).collect::<Vec<_>>() {
        return Err(Error::input(format!(
            "hypothesis order {order:?} is not a permutation of 0..{k}"
        )));
    }
    let mut members = vec![vec![usize::MAX; k]; c];
    let Some(&first) = order.first() else {
        return Ok(Partition::new(g, members));
    };
    for (i, m) in members.iter_mut().enumerate() {
        m[first] = i;
    }
    for (step, &h) in order.iter().enumerate().skip(1) {
        let merged = &order[..step];
        let w: Vec<Vec<f64>> = members
            .iter()
            .map(|m| {
                (0..c)
                    .map(|j| merged.iter().map(|&p| g.weight(p, m[p], h, j)).sum())
                    .collect()
            })
            .collect();
        let matching = hungarian_matching(&w);
        for (m, &j) in members.iter_mut().zip(&matching.pairs) {
            m[h] = j;
        }
    }
    Ok(Partition::new(g, members))
}
