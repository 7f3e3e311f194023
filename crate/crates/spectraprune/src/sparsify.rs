//! Matrix sparsification: hard thresholding, truncated Bernoulli sampling,
//! and low-rank-guided sampling.
//!
//! All three share the same quantile machinery and produce a [`SparsifyResult`]
//! carrying the sketch, its retained-support mask, and the error norms against
//! the input. The samplers draw per entry from a counter-based generator keyed
//! by `(seed, i, j)`, so outputs are independent of evaluation order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use crate::svd::{low_rank_reconstruct, svd_truncated, two_norm};

/// Default quantile below which entries are sampled.
pub const DEFAULT_Q: f64 = 0.3;
/// Default lower probability cutoff for zeroing.
pub const DEFAULT_C: f64 = 0.5;
/// Default rank for the low-rank-guided sampler.
pub const DEFAULT_RANK: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparsifyMethod {
    Threshold,
    Bernoulli,
    #[serde(rename = "lowrank")]
    LowRank,
}

impl SparsifyMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SparsifyMethod::Threshold => "threshold",
            SparsifyMethod::Bernoulli => "bernoulli",
            SparsifyMethod::LowRank => "lowrank",
        }
    }
}

impl std::str::FromStr for SparsifyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(SparsifyMethod::Threshold),
            "bernoulli" => Ok(SparsifyMethod::Bernoulli),
            "lowrank" => Ok(SparsifyMethod::LowRank),
            other => Err(Error::InvalidParameter(format!(
                "unknown method '{other}' (expected threshold, bernoulli or lowrank)"
            ))),
        }
    }
}

/// One sparsification setting. Only the fields relevant to `method` may be
/// set; the rest must stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsifyConfig {
    pub method: SparsifyMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keep_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_k: Option<usize>,
    pub seed: u64,
}

impl SparsifyConfig {
    pub fn threshold(keep_fraction: f64) -> Self {
        Self {
            method: SparsifyMethod::Threshold,
            keep_fraction: Some(keep_fraction),
            q: None,
            c: None,
            rank_k: None,
            seed: 0,
        }
    }

    pub fn bernoulli(q: f64, c: f64) -> Self {
        Self {
            method: SparsifyMethod::Bernoulli,
            keep_fraction: None,
            q: Some(q),
            c: Some(c),
            rank_k: None,
            seed: 0,
        }
    }

    pub fn lowrank(q: f64, c: f64, rank_k: usize) -> Self {
        Self {
            method: SparsifyMethod::LowRank,
            keep_fraction: None,
            q: Some(q),
            c: Some(c),
            rank_k: Some(rank_k),
            seed: 0,
        }
    }

    /// The low-rank sampler with the reference defaults (q 0.3, c 0.5, rank 5).
    pub fn lowrank_defaults() -> Self {
        Self::lowrank(DEFAULT_Q, DEFAULT_C, DEFAULT_RANK)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Run the configured method on `a`.
    pub fn run(&self, a: &Matrix) -> Result<SparsifyResult> {
        let reject_irrelevant = |name: &str, set: bool| -> Result<()> {
            if set {
                Err(Error::InvalidParameter(format!(
                    "field '{name}' does not apply to method '{}'",
                    self.method.name()
                )))
            } else {
                Ok(())
            }
        };
        match self.method {
            SparsifyMethod::Threshold => {
                reject_irrelevant("q", self.q.is_some())?;
                reject_irrelevant("c", self.c.is_some())?;
                reject_irrelevant("rank_k", self.rank_k.is_some())?;
                let keep = self.keep_fraction.ok_or_else(|| {
                    Error::InvalidParameter("threshold method requires keep_fraction".into())
                })?;
                threshold_sparsify(a, keep)
            }
            SparsifyMethod::Bernoulli => {
                reject_irrelevant("keep_fraction", self.keep_fraction.is_some())?;
                reject_irrelevant("rank_k", self.rank_k.is_some())?;
                bernoulli_sparsify(
                    a,
                    self.q.unwrap_or(DEFAULT_Q),
                    self.c.unwrap_or(DEFAULT_C),
                    self.seed,
                )
            }
            SparsifyMethod::LowRank => {
                reject_irrelevant("keep_fraction", self.keep_fraction.is_some())?;
                lowrank_sparsify(
                    a,
                    self.q.unwrap_or(DEFAULT_Q),
                    self.c.unwrap_or(DEFAULT_C),
                    self.rank_k.unwrap_or(DEFAULT_RANK),
                    self.seed,
                )
            }
        }
    }
}

/// A sparsified matrix plus everything needed to judge it.
#[derive(Debug, Clone)]
pub struct SparsifyResult {
    /// The sketch: zeros outside the retained support.
    pub sparse: Matrix,
    /// 0/1 indicator of retained entries.
    pub mask: Matrix,
    /// The magnitude cut used (quantile value, or the smallest kept magnitude
    /// for thresholding; infinity when nothing was kept).
    pub threshold_t: f64,
    /// Fraction of zero entries in `sparse`.
    pub achieved_sparsity: f64,
    /// `|A - sketch|_2`.
    pub err_two_norm: f64,
    /// `|A - sketch|_F`.
    pub err_f_norm: f64,
    /// True when the quantile cut degenerated to zero and every entry was
    /// kept as-is.
    pub degenerate: bool,
}

fn finish(a: &Matrix, sparse: Matrix, mask: Matrix, threshold_t: f64, degenerate: bool) -> SparsifyResult {
    let total = (a.rows() * a.cols()) as f64;
    let zeros = sparse.data().iter().filter(|&&v| v == 0.0).count() as f64;
    let (err_two_norm, err_f_norm) =
        sparsification_error(a, &sparse).expect("shapes match by construction");
    SparsifyResult {
        sparse,
        mask,
        threshold_t,
        achieved_sparsity: zeros / total,
        err_two_norm,
        err_f_norm,
        degenerate,
    }
}

/// The value at 0-based position `floor(n * q)` in the sorted order of
/// `values`, ties broken by position. Expected O(n) via quickselect.
pub fn quantile_threshold(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(
            "quantile of an empty list".into(),
        ));
    }
    if !(0.0 < q && q < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile q must be in (0, 1), got {q}"
        )));
    }
    let idx = ((values.len() as f64) * q).floor() as usize;
    let mut keyed: Vec<(f64, usize)> = values.iter().copied().zip(0..).collect();
    let (_, t, _) = keyed.select_nth_unstable_by(idx, |a, b| {
        a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
    });
    Ok(t.0)
}

/// Round-half-up count of retained entries for a keep fraction.
fn keep_count(keep_fraction: f64, total: usize) -> usize {
    (keep_fraction * total as f64 + 0.5).floor() as usize
}

/// Keep the `round(keep_fraction * m * n)` largest entries by magnitude,
/// ties broken toward lower row-major index; zero the rest.
pub fn threshold_sparsify(a: &Matrix, keep_fraction: f64) -> Result<SparsifyResult> {
    if !(0.0 < keep_fraction && keep_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "keep_fraction must be in (0, 1], got {keep_fraction}"
        )));
    }
    let total = a.rows() * a.cols();
    let n_keep = keep_count(keep_fraction, total).min(total);

    let mut keyed: Vec<(f64, usize)> = a
        .data()
        .iter()
        .map(|v| v.abs())
        .zip(0..)
        .collect();
    // Descending magnitude, then ascending index: the first n_keep survive.
    let cmp = |x: &(f64, usize), y: &(f64, usize)| {
        y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1))
    };
    if n_keep > 0 && n_keep < total {
        keyed.select_nth_unstable_by(n_keep - 1, cmp);
    }

    let mut sparse_data = vec![0.0; total];
    let mut mask_data = vec![0.0; total];
    let mut threshold_t = f64::INFINITY;
    for &(mag, idx) in keyed.iter().take(n_keep) {
        sparse_data[idx] = a.data()[idx];
        mask_data[idx] = 1.0;
        if mag < threshold_t {
            threshold_t = mag;
        }
    }
    let sparse = Matrix::from_raw(a.rows(), a.cols(), sparse_data);
    let mask = Matrix::from_raw(a.rows(), a.cols(), mask_data);
    Ok(finish(a, sparse, mask, threshold_t, false))
}

// Shared sampling rule: `guide` supplies the magnitudes that set the quantile
// and the keep/sample decision; values are taken (and rescaled) from `a`.
fn sample_against_guide(
    a: &Matrix,
    guide: &Matrix,
    q: f64,
    c: f64,
    seed: u64,
) -> Result<SparsifyResult> {
    if !(0.0 < q && q < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "q must be in (0, 1), got {q}"
        )));
    }
    if !(0.0..1.0).contains(&c) {
        return Err(Error::InvalidParameter(format!(
            "c must be in [0, 1), got {c}"
        )));
    }
    let abs_guide: Vec<f64> = guide.data().iter().map(|v| v.abs()).collect();
    let t = quantile_threshold(&abs_guide, q)?;

    let (rows, cols) = a.shape();
    if t == 0.0 {
        // More than a q-fraction of the guide is exactly zero: nothing can be
        // sampled, every entry falls in the keep region. Flag it.
        let mask = Matrix::from_raw(rows, cols, vec![1.0; rows * cols]);
        return Ok(finish(a, a.clone(), mask, t, true));
    }

    let mut sparse_data = vec![0.0; rows * cols];
    let mut mask_data = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let idx = i * cols + j;
            let a_ij = a.data()[idx];
            let g_ij = guide.data()[idx];
            if g_ij.abs() >= t {
                sparse_data[idx] = a_ij;
                mask_data[idx] = 1.0;
                continue;
            }
            // |g| < t here, so p < 1; the clamp is belt and braces.
            let p = ((g_ij / t) * (g_ij / t)).min(1.0);
            if p < c {
                continue;
            }
            let u = rng::uniform(seed, rng::STREAM_BERNOULLI, i as u64, j as u64);
            if u < p {
                sparse_data[idx] = a_ij / p;
                mask_data[idx] = 1.0;
            }
        }
    }
    let sparse = Matrix::from_raw(rows, cols, sparse_data);
    let mask = Matrix::from_raw(rows, cols, mask_data);
    Ok(finish(a, sparse, mask, t, false))
}

/// Truncated Bernoulli sampling: entries at or above the magnitude quantile
/// are kept as-is; below it, entry (i, j) survives with probability
/// `p = (A_ij / t)^2` (zeroed outright when `p < c`) and is rescaled to
/// `A_ij / p` when it survives.
pub fn bernoulli_sparsify(a: &Matrix, q: f64, c: f64, seed: u64) -> Result<SparsifyResult> {
    sample_against_guide(a, a, q, c, seed)
}

/// Low-rank-guided sampling: the quantile and the sampling probabilities come
/// from the magnitudes of the rank-k reconstruction of `a`, while kept and
/// sampled values are taken from `a` itself.
pub fn lowrank_sparsify(
    a: &Matrix,
    q: f64,
    c: f64,
    rank_k: usize,
    seed: u64,
) -> Result<SparsifyResult> {
    let factors = svd_truncated(a, rank_k, seed)?;
    let b = low_rank_reconstruct(&factors, rank_k)?;
    sample_against_guide(a, &b, q, c, seed)
}

/// `(|a - a_tilde|_2, |a - a_tilde|_F)`.
pub fn sparsification_error(a: &Matrix, a_tilde: &Matrix) -> Result<(f64, f64)> {
    let diff = a.sub(a_tilde).map_err(|_| Error::ShapeMismatch {
        op: "sparsification_error",
        left: format!("{}x{}", a.rows(), a.cols()),
        right: format!("{}x{}", a_tilde.rows(), a_tilde.cols()),
    })?;
    Ok((two_norm(&diff), diff.frobenius_norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let data = (0..rows * cols)
            .map(|k| {
                rng::normal(seed, rng::STREAM_GAUSSIAN, (k / cols) as u64, (k % cols) as u64)
            })
            .collect();
        Matrix::from_raw(rows, cols, data)
    }

    #[test]
    fn quantile_matches_sort_oracle() {
        assert_eq!(quantile_threshold(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 3.0);
        assert_eq!(quantile_threshold(&[5.0], 0.2).unwrap(), 5.0);
        assert_eq!(quantile_threshold(&[2.0, 2.0, 2.0, 2.0], 0.5).unwrap(), 2.0);
        for seed in 0..20u64 {
            let vals: Vec<f64> = (0..37)
                .map(|k| rng::uniform(seed, rng::STREAM_BERNOULLI, k, 0) * 10.0)
                .collect();
            for &q in &[0.1, 0.3, 0.5, 0.9] {
                let mut sorted = vals.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let idx = (vals.len() as f64 * q).floor() as usize;
                assert_eq!(quantile_threshold(&vals, q).unwrap(), sorted[idx]);
            }
        }
    }

    #[test]
    fn quantile_rejects_bad_input() {
        assert!(quantile_threshold(&[], 0.5).is_err());
        assert!(quantile_threshold(&[1.0], 0.0).is_err());
        assert!(quantile_threshold(&[1.0], 1.0).is_err());
    }

    #[test]
    fn threshold_keeps_top_magnitudes() {
        let a = Matrix::from_vec(2, 2, vec![3.0, 1.0, -2.0, 0.5]).unwrap();
        let r = threshold_sparsify(&a, 0.5).unwrap();
        assert_eq!(r.sparse.data(), &[3.0, 0.0, -2.0, 0.0]);
        assert_eq!(r.mask.data(), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(r.achieved_sparsity, 0.5);
        assert_eq!(r.threshold_t, 2.0);
    }

    #[test]
    fn threshold_keep_all_is_identity() {
        let a = random_matrix(4, 5, 3);
        let r = threshold_sparsify(&a, 1.0).unwrap();
        assert!(r.sparse.bit_eq(&a));
        assert!(r.mask.data().iter().all(|&m| m == 1.0));
        assert_eq!(r.err_f_norm, 0.0);
    }

    #[test]
    fn threshold_breaks_ties_by_flat_index() {
        let a = Matrix::from_vec(1, 4, vec![2.0, -2.0, 2.0, -2.0]).unwrap();
        let r = threshold_sparsify(&a, 0.5).unwrap();
        assert_eq!(r.mask.data(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn threshold_rejects_bad_fraction() {
        let a = Matrix::identity(2);
        assert!(threshold_sparsify(&a, 0.0).is_err());
        assert!(threshold_sparsify(&a, 1.5).is_err());
    }

    // Remark-style oracle: among all masks of the same support size, the
    // magnitude cut minimizes the Frobenius error.
    #[test]
    fn threshold_is_f_norm_optimal_small() {
        let a = random_matrix(3, 3, 77);
        let entries = a.data();
        for k in 1..=8usize {
            let r = threshold_sparsify(&a, k as f64 / 9.0).unwrap();
            let mut best = f64::INFINITY;
            for bits in 0u32..512 {
                if bits.count_ones() as usize != k {
                    continue;
                }
                let err: f64 = (0..9)
                    .filter(|i| bits & (1 << i) == 0)
                    .map(|i| entries[i] * entries[i])
                    .sum();
                best = best.min(err.sqrt());
            }
            assert!(
                (r.err_f_norm - best).abs() < 1e-12,
                "k={k}: {} vs brute force {best}",
                r.err_f_norm
            );
        }
    }

    #[test]
    fn threshold_error_monotone_in_keep_fraction() {
        let a = random_matrix(6, 6, 41);
        let mut prev = f64::INFINITY;
        for &keep in &[0.01, 0.02, 0.05, 0.10, 0.15, 0.20, 0.5, 1.0] {
            let r = threshold_sparsify(&a, keep).unwrap();
            assert!(r.err_f_norm <= prev + 1e-15);
            prev = r.err_f_norm;
        }
    }

    #[test]
    fn bernoulli_keep_region_only() {
        // diag(1, 1): t = 1, the two unit entries are at/above the cut and the
        // zeros are forced to zero, so the output equals the input.
        let a = Matrix::identity(2);
        for seed in [0u64, 1, 99] {
            let r = bernoulli_sparsify(&a, 0.5, 0.5, seed).unwrap();
            assert!(r.sparse.bit_eq(&a), "seed {seed}");
            assert!(!r.degenerate);
        }
    }

    #[test]
    fn bernoulli_forces_low_probability_to_zero() {
        // One entry at 0.6 t with c = 0.5: p = 0.36 < c, zeroed for any seed.
        let a = Matrix::from_vec(2, 2, vec![6.0, 10.0, 10.0, 10.0]).unwrap();
        for seed in 0..10u64 {
            let r = bernoulli_sparsify(&a, 0.25, 0.5, seed).unwrap();
            assert_eq!(r.threshold_t, 10.0);
            assert_eq!(r.sparse.get(0, 0), 0.0, "seed {seed}");
            assert_eq!(r.sparse.get(0, 1), 10.0);
        }
    }

    #[test]
    fn bernoulli_keep_region_is_bit_identical() {
        let a = random_matrix(10, 10, 4);
        let r = bernoulli_sparsify(&a, 0.3, 0.5, 12).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                if a.get(i, j).abs() >= r.threshold_t {
                    assert_eq!(a.get(i, j).to_bits(), r.sparse.get(i, j).to_bits());
                }
            }
        }
    }

    #[test]
    fn bernoulli_is_deterministic_per_seed() {
        let a = random_matrix(12, 9, 8);
        let r1 = bernoulli_sparsify(&a, 0.4, 0.3, 77).unwrap();
        let r2 = bernoulli_sparsify(&a, 0.4, 0.3, 77).unwrap();
        assert!(r1.sparse.bit_eq(&r2.sparse));
        assert!(r1.mask.bit_eq(&r2.mask));
        assert_eq!(r1.err_two_norm.to_bits(), r2.err_two_norm.to_bits());
        let r3 = bernoulli_sparsify(&a, 0.4, 0.3, 78).unwrap();
        assert!(!r1.sparse.bit_eq(&r3.sparse));
    }

    // Matrix whose sampled region has p in (0.5, 1): 50 entries of magnitude
    // 10 and 50 drawn uniformly from (7.2, 9.9), quantile q = 0.5 puts the cut
    // at 10.
    fn unbiasedness_fixture() -> Matrix {
        let mut data = vec![0.0; 100];
        for (k, slot) in data.iter_mut().enumerate() {
            if k % 2 == 0 {
                *slot = 10.0;
            } else {
                let u = rng::uniform(2024, rng::STREAM_BERNOULLI, 1_000 + k as u64, 0);
                let sign = if k % 4 == 1 { 1.0 } else { -1.0 };
                *slot = sign * (7.2 + 2.7 * u);
            }
        }
        Matrix::from_raw(10, 10, data)
    }

    #[test]
    fn bernoulli_sampling_is_unbiased() {
        let a = unbiasedness_fixture();
        let trials = 2_000u64;
        let mut sums = vec![0.0; 100];
        let mut sums_sq = vec![0.0; 100];
        let mut t_seen = None;
        for seed in 0..trials {
            let r = bernoulli_sparsify(&a, 0.5, 0.5, seed).unwrap();
            t_seen.get_or_insert(r.threshold_t);
            for (k, &v) in r.sparse.data().iter().enumerate() {
                sums[k] += v;
                sums_sq[k] += v * v;
            }
        }
        assert_eq!(t_seen.unwrap(), 10.0);
        let n = trials as f64;
        for (k, &a_val) in a.data().iter().enumerate() {
            if a_val.abs() >= 10.0 {
                continue; // keep region is exact
            }
            let mean = sums[k] / n;
            let var = (sums_sq[k] / n - mean * mean).max(0.0);
            let bound = 4.0 * (var / n).sqrt();
            assert!(
                (mean - a_val).abs() < bound.max(1e-12),
                "entry {k}: mean {mean} vs {a_val} (bound {bound})"
            );
        }
    }

    #[test]
    fn bernoulli_sampling_variance_matches_identity() {
        let a = unbiasedness_fixture();
        let trials = 4_000u64;
        let t = 10.0;
        let mut sums = vec![0.0; 100];
        let mut sums_sq = vec![0.0; 100];
        for seed in 10_000..10_000 + trials {
            let r = bernoulli_sparsify(&a, 0.5, 0.5, seed).unwrap();
            for (k, &v) in r.sparse.data().iter().enumerate() {
                sums[k] += v;
                sums_sq[k] += v * v;
            }
        }
        let n = trials as f64;
        for (k, &a_val) in a.data().iter().enumerate() {
            if a_val.abs() >= t {
                continue;
            }
            let p = (a_val / t) * (a_val / t);
            let theory = a_val * a_val * (1.0 - p) / p;
            let mean = sums[k] / n;
            let var = (sums_sq[k] / n - mean * mean).max(0.0);
            // Fourth central moment of the rescaled Bernoulli sets the
            // standard error of the sample variance.
            let mu4 = a_val.powi(4) * ((1.0 - p).powi(4) / p.powi(3) + (1.0 - p));
            let se = ((mu4 - theory * theory) / n).sqrt();
            assert!(
                (var - theory).abs() < 4.0 * se,
                "entry {k}: var {var} vs {theory} (se {se})"
            );
        }
    }

    #[test]
    fn degenerate_quantile_keeps_everything() {
        // 3/4 zeros with q = 0.5 puts the cut at zero.
        let a = Matrix::from_vec(2, 2, vec![0.0, 0.0, 0.0, 5.0]).unwrap();
        let r = bernoulli_sparsify(&a, 0.5, 0.5, 3).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.threshold_t, 0.0);
        assert!(r.sparse.bit_eq(&a));
        assert!(r.sparse.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lowrank_on_exact_rank_one_tracks_bernoulli() {
        // For an exactly rank-1 input the guide B reproduces A up to float
        // noise, so the two samplers agree except on measure-zero draws.
        let mut a = Matrix::zeros(8, 6);
        for i in 0..8 {
            for j in 0..6 {
                a.set(i, j, (1.0 + i as f64) * (0.5 + j as f64) * 0.2);
            }
        }
        let lr = lowrank_sparsify(&a, 0.4, 0.5, 1, 5).unwrap();
        let be = bernoulli_sparsify(&a, 0.4, 0.5, 5).unwrap();
        assert!(lr.mask.bit_eq(&be.mask));
        for (x, y) in lr.sparse.data().iter().zip(be.sparse.data()) {
            let scale = y.abs().max(1.0);
            assert!((x - y).abs() < 1e-9 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn lowrank_keep_region_follows_guide() {
        let a = random_matrix(16, 16, 31);
        let r = lowrank_sparsify(&a, 0.3, 0.5, 3, 9).unwrap();
        let b = low_rank_reconstruct(&svd_truncated(&a, 3, 9).unwrap(), 3).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                if b.get(i, j).abs() >= r.threshold_t {
                    assert_eq!(a.get(i, j).to_bits(), r.sparse.get(i, j).to_bits());
                }
            }
        }
    }

    #[test]
    fn lowrank_validates_rank() {
        let a = random_matrix(4, 4, 1);
        assert!(lowrank_sparsify(&a, 0.3, 0.5, 0, 0).is_err());
        assert!(lowrank_sparsify(&a, 0.3, 0.5, 5, 0).is_err());
    }

    #[test]
    fn config_defaults_match_reference() {
        let cfg = SparsifyConfig::lowrank_defaults();
        assert_eq!(cfg.q, Some(0.3));
        assert_eq!(cfg.c, Some(0.5));
        assert_eq!(cfg.rank_k, Some(5));
    }

    #[test]
    fn config_rejects_irrelevant_fields() {
        let a = Matrix::identity(3);
        let mut cfg = SparsifyConfig::threshold(0.5);
        cfg.q = Some(0.3);
        assert!(cfg.run(&a).is_err());
        let mut cfg = SparsifyConfig::bernoulli(0.3, 0.5);
        cfg.keep_fraction = Some(0.5);
        assert!(cfg.run(&a).is_err());
    }

    #[test]
    fn triangle_decomposition_holds() {
        for seed in 0..40u64 {
            let a = random_matrix(8, 7, 200 + seed);
            let r = bernoulli_sparsify(&a, 0.4, 0.5, seed).unwrap();
            let kept = r.sparse.nnz();
            let total = a.rows() * a.cols();
            let d = threshold_sparsify(&a, kept.max(1) as f64 / total as f64).unwrap();
            let a_d = a.sub(&d.sparse).unwrap().frobenius_norm();
            let d_s = d.sparse.sub(&r.sparse).unwrap().frobenius_norm();
            assert!(r.err_f_norm <= a_d + d_s + 1e-10);
        }
    }

    #[test]
    fn error_examples() {
        let a = random_matrix(5, 4, 55);
        let (two, fro) = sparsification_error(&a, &a).unwrap();
        assert_eq!((two, fro), (0.0, 0.0));

        let zero = Matrix::zeros(5, 4);
        let (two, fro) = sparsification_error(&a, &zero).unwrap();
        assert!((two - two_norm(&a)).abs() < 1e-10);
        assert!((fro - a.frobenius_norm()).abs() < 1e-12);

        let (two, fro) =
            sparsification_error(&Matrix::diag(&[3.0, 1.0]), &Matrix::diag(&[3.0, 0.0])).unwrap();
        assert!((two - 1.0).abs() < 1e-9);
        assert!((fro - 1.0).abs() < 1e-12);

        assert!(sparsification_error(&a, &Matrix::zeros(4, 5)).is_err());
    }
}
