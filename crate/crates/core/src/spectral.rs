//! Overlap-aware multi-class spectral clustering of a precomputed affinity matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::AffinityInput;

/// Added to the largest eigenvalue when normalizing the maximum eigengap.
pub const NME_EPS: f64 = 1e-10;

/// Eigen-decomposition of a symmetric matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    /// Columns are sign-normalized so their largest-magnitude entry is positive.
    pub fn of(m: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(m.clone());
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(src).into_owned();
            let pivot = (0..n)
                .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)))
                .unwrap_or(0);
            if n > 0 && col[pivot] < 0.0 {
                col.neg_mut();
            }
            vectors.set_column(dst, &col);
        }
        Spectrum {
            eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
            eigenvectors: vectors,
        }
    }
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::input(format!(
            "affinity must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Set to 1 every off-diagonal entry of a row that is at least the row's
/// `p`-th largest off-diagonal value, zero the rest, and symmetrize as
/// `(A_p + A_p^T) / 2`. Entries tied with the cut are all kept, so a row can
/// hold more than `p` ones.
pub fn p_binarize(a: &DMatrix<f64>, p: usize) -> Result<DMatrix<f64>> {
    check_square(a)?;
    let n = a.nrows();
    if p == 0 || p >= n {
        return Err(Error::input(format!("p = {p} outside 1..{n}")));
    }
    let mut ap = DMatrix::zeros(n, n);
    let mut row: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| a[(i, j)]));
        row.sort_by(|x, y| y.total_cmp(x));
        let cut = row[p - 1];
        for j in (0..n).filter(|&j| j != i) {
            if a[(i, j)] >= cut {
                ap[(i, j)] = 1.0;
            }
        }
    }
    Ok((&ap + ap.transpose()) * 0.5)
}

/// Unnormalized Laplacian `D - A`.
pub fn laplacian(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    let mut l = -a.clone();
    for i in 0..a.nrows() {
        l[(i, i)] += a.row(i).sum();
    }
    Ok(l)
}

/// Normalized maximum eigengap sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmeResult {
    pub best_p: usize,
    pub k_hat: usize,
    /// `(p, g_p)` for every candidate.
    pub g_p: Vec<(usize, f64)>,
    /// `(p, p / g_p)` for every candidate.
    pub r_p: Vec<(usize, f64)>,
    /// Eigengaps of the Laplacian at `best_p`, as far as they were searched.
    pub eigengaps: Vec<f64>,
}

fn off_diagonal_is_zero(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == 0.0))
}

fn eigengaps(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

/// 1-based index of the first maximum.
fn argmax_gap(gaps: &[f64]) -> usize {
    let mut best = 0;
    for (i, &g) in gaps.iter().enumerate() {
        if g > gaps[best] {
            best = i;
        }
    }
    best + 1
}

/// Estimate the number of clusters. Candidates above `N - 1` are dropped.
pub fn estimate_k(a: &DMatrix<f64>, p_min: usize, p_max: usize) -> Result<NmeResult> {
    estimate_k_bounded(a, p_min, p_max, None)
}

/// As [`estimate_k`], but only the first `k_max` eigengaps are considered, so
/// the estimate never exceeds `k_max`.
pub fn estimate_k_bounded(
    a: &DMatrix<f64>,
    p_min: usize,
    p_max: usize,
    k_max: Option<usize>,
) -> Result<NmeResult> {
    check_square(a)?;
    let n = a.nrows();
    if n < 2 {
        return Err(Error::input("need at least two windows to estimate a speaker count"));
    }
    if k_max == Some(0) {
        return Err(Error::input("maximum speaker count must be at least 1"));
    }
    if off_diagonal_is_zero(a) {
        return Err(Error::input(
            "affinity has no off-diagonal similarity; the speaker count is undefined",
        ));
    }
    let p_min = p_min.max(1);
    let p_max = p_max.min(n - 1);
    if p_min > p_max {
        return Err(Error::input(format!(
            "p range {p_min}..={p_max} is empty for {n} windows"
        )));
    }
    let keep = k_max.unwrap_or(n).min(n - 1);
    let sweep: Vec<(usize, f64, Vec<f64>)> = (p_min..=p_max)
        .into_par_iter()
        .map(|p| -> Result<(usize, f64, Vec<f64>)> {
            let l = laplacian(&p_binarize(a, p)?)?;
            let values = Spectrum::of(&l).eigenvalues;
            let mut gaps = eigengaps(&values);
            gaps.truncate(keep);
            let max_gap = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let g = max_gap / (values[n - 1] + NME_EPS);
            Ok((p, g, gaps))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, &(p, g, _)) in sweep.iter().enumerate() {
        let (bp, bg, _) = sweep[best];
        if (p as f64) / g < (bp as f64) / bg {
            best = i;
        }
    }
    let (best_p, _, gaps) = &sweep[best];
    Ok(NmeResult {
        best_p: *best_p,
        k_hat: argmax_gap(gaps),
        g_p: sweep.iter().map(|(p, g, _)| (*p, *g)).collect(),
        r_p: sweep.iter().map(|(p, g, _)| (*p, *p as f64 / g)).collect(),
        eigengaps: gaps.clone(),
    })
}

/// Relaxed solution: eigenvectors of `P = D^-1 A` for the `k` largest
/// eigenvalues (`z_star`), and the same rows scaled to unit length (`x_tilde`).
#[derive(Debug, Clone)]
pub struct Embedding {
    pub z_star: DMatrix<f64>,
    pub x_tilde: DMatrix<f64>,
}

/// Negative affinities are clipped to zero first.
pub fn spectral_embed(a: &DMatrix<f64>, k: usize) -> Result<Embedding> {
    check_square(a)?;
    let n = a.nrows();
    if k == 0 || k > n {
        return Err(Error::input(format!("cluster count {k} outside 1..={n}")));
    }
    let a = a.map(|v| v.max(0.0));
    let degrees: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    if let Some(i) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::input(format!(
            "window {i} has zero total affinity; add a small positive floor to the affinity matrix"
        )));
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| d.sqrt().recip()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * a[(i, j)] * inv_sqrt[j]);
    let eig = Spectrum::of(&sym);
    // Largest eigenvalues are last; take them largest first.
    let z_star = DMatrix::from_fn(n, k, |i, c| inv_sqrt[i] * eig.eigenvectors[(i, n - 1 - c)]);
    let mut x_tilde = z_star.clone();
    for i in 0..n {
        let norm = x_tilde.row(i).norm();
        if norm > 0.0 {
            x_tilde.row_mut(i).scale_mut(norm.recip());
        }
    }
    Ok(Embedding { z_star, x_tilde })
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscreteAssignment {
    /// `N x K` indicator matrix.
    pub x: Vec<Vec<u8>>,
    /// `K x K` rotation, row-major.
    pub r: Vec<Vec<f64>>,
    pub phi: f64,
    /// Objective after each indicator update.
    pub phi_history: Vec<f64>,
    pub iterations: usize,
}

impl DiscreteAssignment {
    /// Cluster indices of each row, ascending.
    pub fn labels(&self) -> Vec<Vec<usize>> {
        self.x
            .iter()
            .map(|row| (0..row.len()).filter(|&c| row[c] == 1).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizeOptions {
    /// Stop when `|delta phi| < tol * N`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        DiscretizeOptions {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Per row, the largest entry (and the second largest where flagged) set to 1.
fn suppress(y: &DMatrix<f64>, flags: &[bool]) -> DMatrix<f64> {
    let (n, k) = y.shape();
    let mut x = DMatrix::zeros(n, k);
    for i in 0..n {
        let mut cols: Vec<usize> = (0..k).collect();
        cols.sort_by(|&a, &b| y[(i, b)].total_cmp(&y[(i, a)]).then(a.cmp(&b)));
        x[(i, cols[0])] = 1.0;
        if flags[i] {
            x[(i, cols[1])] = 1.0;
        }
    }
    x
}

/// Alternate between the best indicator matrix for the current rotation and
/// the best rotation for the current indicators, starting from the identity.
pub fn discretize(
    x_tilde: &DMatrix<f64>,
    overlap: Option<&[bool]>,
    opts: DiscretizeOptions,
) -> Result<DiscreteAssignment> {
    let (n, k) = x_tilde.shape();
    let flags: Vec<bool> = match overlap {
        Some(f) if f.len() != n => {
            return Err(Error::input(format!(
                "{} overlap flags for {n} windows",
                f.len()
            )))
        }
        Some(f) => f.to_vec(),
        None => vec![false; n],
    };
    if k == 0 {
        return Err(Error::input("discretization needs at least one cluster"));
    }
    if k < 2 && flags.iter().any(|&f| f) {
        return Err(Error::input(
            "overlap flags need at least two clusters, but only one was found",
        ));
    }
    if opts.max_iter == 0 {
        return Err(Error::input("max_iter must be at least 1"));
    }

    let mut r = DMatrix::<f64>::identity(k, k);
    let mut history = Vec::new();
    let mut x = DMatrix::zeros(n, k);
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        x = suppress(&(x_tilde * &r), &flags);
        for i in 0..n {
            let want = 1.0 + f64::from(u8::from(flags[i]));
            if x.row(i).sum() != want {
                return Err(Error::Invariant(format!("row {i} violates the label-count constraint")));
            }
        }
        let phi = (&x - x_tilde * &r).norm_squared();
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| (prev - phi).abs() < opts.tol * n as f64);
        history.push(phi);
        if converged {
            break;
        }
        let svd = (x.transpose() * x_tilde).svd(true, true);
        let (u, v_t) = (
            svd.u.expect("left singular vectors"),
            svd.v_t.expect("right singular vectors"),
        );
        r = v_t.transpose() * u.transpose();
        let err = (r.transpose() * &r - DMatrix::<f64>::identity(k, k)).amax();
        if err > 1e-8 {
            return Err(Error::Invariant(format!("rotation lost orthogonality ({err:e})")));
        }
    }
    let phi = *history.last().expect("at least one iteration");
    Ok(DiscreteAssignment {
        x: (0..n)
            .map(|i| (0..k).map(|c| x[(i, c)] as u8).collect())
            .collect(),
        r: (0..k).map(|i| (0..k).map(|j| r[(i, j)]).collect()).collect(),
        phi,
        phi_history: history,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    pub p_min: usize,
    pub p_max: usize,
    pub k: Option<usize>,
    /// Upper bound for the estimated count.
    pub max_speakers: Option<usize>,
    pub discretize: DiscretizeOptions,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            p_min: 2,
            p_max: 20,
            k: None,
            max_speakers: None,
            discretize: DiscretizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Clustering {
    pub labels: Vec<Vec<usize>>,
    pub k: usize,
    pub nme: NmeResult,
    pub assignment: DiscreteAssignment,
}

/// Estimate the speaker count (unless given), embed the affinity binarized at
/// the selected `p`, and discretize under the overlap flags.
///
/// Flags are taken as given: deciding which windows overlap is up to the caller.
pub fn cluster(input: &AffinityInput, opts: &ClusterOptions) -> Result<Clustering> {
    let nme = estimate_k_bounded(&input.matrix, opts.p_min, opts.p_max, opts.max_speakers)?;
    let k = opts.k.unwrap_or(nme.k_hat);
    let binarized = p_binarize(&input.matrix, nme.best_p)?;
    let emb = spectral_embed(&binarized, k)?;
    let assignment = discretize(&emb.x_tilde, input.overlap_flags.as_deref(), opts.discretize)?;
    Ok(Clustering {
        labels: assignment.labels(),
        k,
        nme,
        assignment,
    })
}
