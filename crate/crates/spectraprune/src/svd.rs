//! Singular value decomposition and spectral norms.
//!
//! `svd_full` is a one-sided Jacobi (Hestenes) SVD: plenty for the desk-scale
//! weight matrices this crate targets and free of external numerical
//! dependencies. `svd_truncated` is the usual randomized range finder with
//! oversampling 10 and two power iterations, followed by a full SVD of the
//! projected matrix. `spectral_norm` is power iteration on `A^T A` from fixed
//! start vectors, so norm queries need no seed.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Default relative tolerance for power iteration.
pub const POWER_TOL: f64 = 1e-10;
/// Default iteration cap for power iteration.
pub const POWER_MAX_ITER: usize = 1000;
/// Sweep cap for the Jacobi SVD.
pub const JACOBI_MAX_SWEEPS: usize = 60;
/// Oversampling columns for the randomized range finder.
const RANGE_OVERSAMPLING: usize = 10;
/// Power (subspace) iterations for the randomized range finder.
const RANGE_POWER_ITERS: usize = 2;

/// Thin SVD factors `A ~= U . diag(sigma) . V^T`.
///
/// `u` is m x r and `v` is n x r, both with orthonormal columns; `sigma` is
/// non-negative and non-increasing. For a full decomposition r = min(m, n).
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
    pub rank_requested: usize,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U . diag(sigma) . V^T` over all retained factors.
    pub fn reconstruct(&self) -> Matrix {
        low_rank_reconstruct(self, self.sigma.len()).expect("k == r is always in range")
    }
}

/// Result of a power-iteration norm query.
#[derive(Debug, Clone, Copy)]
pub struct SpectralEstimate {
    pub value: f64,
    /// False when the iteration cap was reached before the tolerance;
    /// `value` is then the best estimate so far.
    pub converged: bool,
    pub iterations: usize,
}

// Columns as contiguous vectors; Jacobi rotates column pairs.
fn to_columns(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a.get(i, j)).collect())
        .collect()
}

fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Matrix {
    let mut m = Matrix::zeros(rows, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            m.set(i, j, v);
        }
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// One-sided Jacobi on a tall matrix (rows >= cols). Returns (U cols, sigma, V cols).
fn jacobi_tall(a: &Matrix) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)> {
    let m = a.rows();
    let n = a.cols();
    debug_assert!(m >= n);

    let mut w = to_columns(a);
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut col = vec![0.0; n];
            col[j] = 1.0;
            col
        })
        .collect();

    let tol = 1e-14;
    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                let scale = (alpha * beta).sqrt();
                if scale == 0.0 || gamma.abs() <= tol * scale {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wp, wq) = pair_mut(&mut w, p, q);
                rotate(wp, wq, c, s);
                let (vp, vq) = pair_mut(&mut v, p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            rows: m,
            cols: n,
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }

    let mut sigma: Vec<f64> = w.iter().map(|col| norm(col)).collect();

    // Sort non-increasing; equal values keep their column order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap().then(i.cmp(&j)));
    let w: Vec<Vec<f64>> = order.iter().map(|&i| w[i].clone()).collect();
    let v: Vec<Vec<f64>> = order.iter().map(|&i| v[i].clone()).collect();
    sigma = order.iter().map(|&i| sigma[i]).collect();

    // Normalize the left vectors; columns whose singular value underflows get
    // a deterministic orthonormal completion so U^T U = I even at low rank.
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let cutoff = sigma_max * 1e-13;
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (j, col) in w.into_iter().enumerate() {
        if sigma[j] > cutoff && sigma[j] > 0.0 {
            u.push(col.iter().map(|x| x / sigma[j]).collect());
        } else {
            u.push(complete_column(&u, m));
        }
    }

    Ok((u, sigma, v))
}

// Pick the canonical basis vector with the largest residual against the
// accepted columns, orthonormalize it, and return it.
fn complete_column(accepted: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 0..m {
        let mut cand = vec![0.0; m];
        cand[k] = 1.0;
        for col in accepted {
            let proj = dot(col, &cand);
            for (c, &u) in cand.iter_mut().zip(col.iter()) {
                *c -= proj * u;
            }
        }
        let n2 = dot(&cand, &cand);
        if best.as_ref().map_or(true, |(b, _)| n2 > *b) {
            best = Some((n2, cand));
        }
    }
    let (_, mut col) = best.expect("m >= 1");
    // One re-orthogonalization pass tightens the result near machine precision.
    for prev in accepted {
        let proj = dot(prev, &col);
        for (c, &u) in col.iter_mut().zip(prev.iter()) {
            *c -= proj * u;
        }
    }
    let nrm = norm(&col);
    col.iter_mut().for_each(|c| *c /= nrm);
    col
}

fn pair_mut(cols: &mut [Vec<f64>], p: usize, q: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
    debug_assert!(p < q);
    let (head, tail) = cols.split_at_mut(q);
    (&mut head[p], &mut tail[0])
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let xp = c * *xi - s * *yi;
        let yq = s * *xi + c * *yi;
        *xi = xp;
        *yi = yq;
    }
}

/// Full SVD with r = min(m, n). Deterministic for a given input.
pub fn svd_full(a: &Matrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    if m >= n {
        let (u, sigma, v) = jacobi_tall(a)?;
        Ok(SvdFactors {
            u: from_columns(m, &u),
            rank_requested: sigma.len(),
            v: from_columns(n, &v),
            sigma,
        })
    } else {
        // A = (A^T)^T: decompose the transpose and swap the factors.
        let (u, sigma, v) = jacobi_tall(&a.transpose())?;
        Ok(SvdFactors {
            u: from_columns(m, &v),
            rank_requested: sigma.len(),
            v: from_columns(n, &u),
            sigma,
        })
    }
}

// Modified Gram-Schmidt with re-orthogonalization. Columns that deflate to
// zero are replaced by deterministic completions, so the output always has
// exactly `cols.len()` orthonormal columns.
fn orthonormalize(cols: &mut Vec<Vec<f64>>) {
    let m = cols.first().map_or(0, |c| c.len());
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for col in cols.iter() {
        let scale = norm(col).max(1.0);
        let mut v = col.clone();
        for _ in 0..2 {
            for prev in &accepted {
                let proj = dot(prev, &v);
                for (c, &u) in v.iter_mut().zip(prev.iter()) {
                    *c -= proj * u;
                }
            }
        }
        let nrm = norm(&v);
        if nrm > 1e-12 * scale {
            v.iter_mut().for_each(|c| *c /= nrm);
            accepted.push(v);
        } else {
            accepted.push(complete_column(&accepted, m));
        }
    }
    *cols = accepted;
}

/// Top-k SVD via randomized range finding; bit-reproducible for a fixed seed.
pub fn svd_truncated(a: &Matrix, k: usize, seed: u64) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    let min_dim = m.min(n);
    if k == 0 || k > min_dim {
        return Err(Error::InvalidParameter(format!(
            "rank {k} out of range for a {m}x{n} matrix (expected 1..={min_dim})"
        )));
    }

    let l = (k + RANGE_OVERSAMPLING).min(min_dim);

    // Gaussian test matrix, keyed per entry so the draw order is irrelevant.
    let omega = {
        let mut data = vec![0.0; n * l];
        for i in 0..n {
            for j in 0..l {
                data[i * l + j] = rng::normal(seed, rng::STREAM_GAUSSIAN, i as u64, j as u64);
            }
        }
        Matrix::from_raw(n, l, data)
    };

    let mut q = to_columns(&a.matmul(&omega)?);
    orthonormalize(&mut q);
    for _ in 0..RANGE_POWER_ITERS {
        let qm = from_columns(m, &q);
        let mut z = to_columns(&a.transpose().matmul(&qm)?);
        orthonormalize(&mut z);
        let zm = from_columns(n, &z);
        q = to_columns(&a.matmul(&zm)?);
        orthonormalize(&mut q);
    }
    let qm = from_columns(m, &q);

    // Project, decompose the small matrix, and lift the left factor back.
    let b = qm.transpose().matmul(a)?;
    let small = svd_full(&b)?;
    let u_full = qm.matmul(&small.u)?;

    let mut u = Matrix::zeros(m, k);
    let mut v = Matrix::zeros(n, k);
    for j in 0..k {
        for i in 0..m {
            u.set(i, j, u_full.get(i, j));
        }
        for i in 0..n {
            v.set(i, j, small.v.get(i, j));
        }
    }
    Ok(SvdFactors {
        u,
        sigma: small.sigma[..k].to_vec(),
        v,
        rank_requested: k,
    })
}

/// Sum of the first k rank-one terms, `sum_{i<k} sigma_i u_i v_i^T`.
pub fn low_rank_reconstruct(f: &SvdFactors, k: usize) -> Result<Matrix> {
    if k > f.sigma.len() {
        return Err(Error::InvalidParameter(format!(
            "rank {k} exceeds the {} retained factors",
            f.sigma.len()
        )));
    }
    let m = f.u.rows();
    let n = f.v.rows();
    let mut out = Matrix::zeros(m, n);
    for l in 0..k {
        let s = f.sigma[l];
        if s == 0.0 {
            continue;
        }
        for i in 0..m {
            let ui = s * f.u.get(i, l);
            for j in 0..n {
                let x = out.get(i, j) + ui * f.v.get(j, l);
                out.set(i, j, x);
            }
        }
    }
    Ok(out)
}

fn power_iteration_from(a: &Matrix, start: Vec<f64>, tol: f64, max_iter: usize) -> SpectralEstimate {
    let (m, n) = a.shape();
    let mut v = start;
    let nrm = norm(&v);
    v.iter_mut().for_each(|x| *x /= nrm);

    let mut prev = 0.0;
    for it in 1..=max_iter {
        // w = A v, u = A^T w
        let mut w = vec![0.0; m];
        for i in 0..m {
            w[i] = dot(a.row(i), &v);
        }
        let sigma = norm(&w);
        if sigma == 0.0 {
            return SpectralEstimate {
                value: 0.0,
                converged: true,
                iterations: it,
            };
        }
        let mut u = vec![0.0; n];
        for i in 0..m {
            let wi = w[i];
            for (uj, &aij) in u.iter_mut().zip(a.row(i)) {
                *uj += aij * wi;
            }
        }
        let nu = norm(&u);
        v = u.into_iter().map(|x| x / nu).collect();

        if (sigma - prev).abs() <= tol * sigma {
            return SpectralEstimate {
                value: sigma,
                converged: true,
                iterations: it,
            };
        }
        prev = sigma;
    }
    SpectralEstimate {
        value: prev,
        converged: false,
        iterations: max_iter,
    }
}

/// Largest singular value by power iteration on `A^T A`.
///
/// Runs from the normalized all-ones vector, plus a second fixed start that
/// covers inputs whose dominant right singular vector is orthogonal to ones;
/// the larger estimate wins. No randomness, so no seed.
pub fn spectral_norm(a: &Matrix, tol: f64, max_iter: usize) -> Result<SpectralEstimate> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = a.cols();
    let ones = vec![1.0; n];
    let ramp: Vec<f64> = (0..n)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * (1.0 + i as f64 / n as f64)
        })
        .collect();
    let first = power_iteration_from(a, ones, tol, max_iter);
    let second = power_iteration_from(a, ramp, tol, max_iter);
    Ok(if second.value > first.value {
        second
    } else {
        first
    })
}

/// `spectral_norm` with the default tolerance and iteration cap.
pub fn two_norm(a: &Matrix) -> f64 {
    spectral_norm(a, POWER_TOL, POWER_MAX_ITER)
        .expect("default tolerance is positive")
        .value
}
