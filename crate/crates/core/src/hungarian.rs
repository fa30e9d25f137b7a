//! Maximum-weight perfect matching on complete bipartite graphs (Kuhn-Munkres).
//!
//! The solver keeps a feasible vertex labeling (`l(x) + l(y) >= w(x, y)`) and grows
//! the matching along augmenting paths of the equality subgraph. When no tight
//! edge leaves the alternating tree the labeling is improved by the minimum slack.

use serde::Serialize;

/// A perfect matching: `pairs[row] = col`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matching {
    pub pairs: Vec<usize>,
    pub weight: f64,
}

/// Maximum-weight perfect matching of a square matrix. Runs in O(n^3).
///
/// Panics if the matrix is not square.
pub fn hungarian_matching(weights: &[Vec<f64>]) -> Matching {
    let n = weights.len();
    assert!(
        weights.iter().all(|r| r.len() == n),
        "hungarian_matching needs a square matrix"
    );
    if n == 0 {
        return Matching {
            pairs: Vec::new(),
            weight: 0.0,
        };
    }

    // Row labels start at the row maximum, column labels at zero.
    let mut lx: Vec<f64> = weights
        .iter()
        .map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut ly = vec![0.0f64; n];
    let mut match_x: Vec<Option<usize>> = vec![None; n];
    let mut match_y: Vec<Option<usize>> = vec![None; n];

    for root in 0..n {
        // slack[y] = min over tree rows x of l(x) + l(y) - w(x, y)
        let mut slack = vec![f64::INFINITY; n];
        let mut slack_x = vec![0usize; n];
        let mut in_tree_x = vec![false; n];
        let mut parent_y: Vec<Option<usize>> = vec![None; n];
        in_tree_x[root] = true;
        for y in 0..n {
            slack[y] = lx[root] + ly[y] - weights[root][y];
            slack_x[y] = root;
        }

        let end_y = loop {
            // Pick the column with the smallest slack outside the tree.
            let (mut best_y, mut delta) = (usize::MAX, f64::INFINITY);
            for y in 0..n {
                if parent_y[y].is_none() && slack[y] < delta {
                    delta = slack[y];
                    best_y = y;
                }
            }
            debug_assert!(best_y != usize::MAX);

            if delta > 0.0 {
                // Improve the labeling: S loses delta, T gains delta.
                for x in 0..n {
                    if in_tree_x[x] {
                        lx[x] -= delta;
                    }
                }
                for y in 0..n {
                    if parent_y[y].is_some() {
                        ly[y] += delta;
                    } else {
                        slack[y] -= delta;
                    }
                }
            }

            // best_y is now tight; extend the tree through it.
            parent_y[best_y] = Some(slack_x[best_y]);
            match match_y[best_y] {
                None => break best_y,
                Some(x) => {
                    in_tree_x[x] = true;
                    for y in 0..n {
                        if parent_y[y].is_none() {
                            let s = lx[x] + ly[y] - weights[x][y];
                            if s < slack[y] {
                                slack[y] = s;
                                slack_x[y] = x;
                            }
                        }
                    }
                }
            }
        };

        // Flip the augmenting path.
        let mut y = end_y;
        loop {
            let x = parent_y[y].expect("augmenting path");
            let prev = match_x[x];
            match_x[x] = Some(y);
            match_y[y] = Some(x);
            match prev {
                Some(py) => y = py,
                None => break,
            }
        }
    }

    let pairs: Vec<usize> = match_x.into_iter().map(|m| m.expect("perfect")).collect();
    let weight = pairs.iter().enumerate().map(|(x, &y)| weights[x][y]).sum();
    Matching { pairs, weight }
}

/// Minimum-cost assignment for an integer cost matrix of any shape.
///
/// Returns `(cost, pairs)` where `pairs[row] = Some(col)` or `None` for rows left
/// unassigned when there are more rows than columns. Among optimal assignments
/// the lexicographically smallest column vector (with `None` last) is chosen.
pub fn lexmin_assignment(costs: &[Vec<i64>], cols: usize) -> (i64, Vec<Option<usize>>) {
    let rows = costs.len();
    let n = rows.max(cols);
    if n == 0 {
        return (0, Vec::new());
    }
    // Pad to square; padded cells cost 0. Real rows can only take a padded
    // column when rows > cols.
    let cell = |r: usize, c: usize| -> i64 {
        if r < rows && c < cols {
            costs[r][c]
        } else {
            0
        }
    };
    let solve = |fixed: &[(usize, usize)]| -> i64 {
        let used_r: Vec<bool> = (0..n).map(|r| fixed.iter().any(|f| f.0 == r)).collect();
        let used_c: Vec<bool> = (0..n).map(|c| fixed.iter().any(|f| f.1 == c)).collect();
        let free_r: Vec<usize> = (0..n).filter(|&r| !used_r[r]).collect();
        let free_c: Vec<usize> = (0..n).filter(|&c| !used_c[c]).collect();
        let w: Vec<Vec<f64>> = free_r
            .iter()
            .map(|&r| free_c.iter().map(|&c| -(cell(r, c) as f64)).collect())
            .collect();
        let m = hungarian_matching(&w);
        let rest: i64 = m
            .pairs
            .iter()
            .enumerate()
            .map(|(i, &j)| cell(free_r[i], free_c[j]))
            .sum();
        rest + fixed.iter().map(|&(r, c)| cell(r, c)).sum::<i64>()
    };

    let best = solve(&[]);
    let mut fixed: Vec<(usize, usize)> = Vec::with_capacity(n);
    for r in 0..n {
        let mut chosen = None;
        for c in 0..n {
            if fixed.iter().any(|f| f.1 == c) {
                continue;
            }
            fixed.push((r, c));
            if solve(&fixed) == best {
                chosen = Some(c);
                break;
            }
            fixed.pop();
        }
        debug_assert!(chosen.is_some());
    }
    let mut pairs = vec![None; rows];
    for &(r, c) in &fixed {
        if r < rows && c < cols {
            pairs[r] = Some(c);
        }
    }
    (best, pairs)
}
