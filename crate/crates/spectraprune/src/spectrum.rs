//! Measurement layer: spectrum summaries, before/after comparisons, norm
//! trajectories over training snapshots, sparsity sweeps, and channel sweeps.

use serde::{Deserialize, Serialize};

use crate::conv::{channel_scores, unfold_kernel, KernelTensor};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sparsify::{sparsification_error, SparsifyConfig, SparsifyMethod};
use crate::svd::{svd_full, svd_truncated, two_norm};

/// Matrices up to this minimum dimension get a full SVD in summaries; larger
/// ones fall back to the randomized truncated decomposition (seed 0).
pub const FULL_SVD_CUTOFF: usize = 512;

/// Spectrum and norms of one matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub rows: usize,
    pub cols: usize,
    pub top_singular_values: Vec<f64>,
    pub two_norm: f64,
    pub f_norm: f64,
    pub nnz: usize,
}

/// Paired spectra of two same-shaped matrices plus their difference norms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumDelta {
    pub sigma_a: Vec<f64>,
    pub sigma_b: Vec<f64>,
    pub err_two_norm: f64,
    pub err_f_norm: f64,
}

/// Norms of an ordered list of weight snapshots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormTrajectory {
    pub labels: Vec<String>,
    pub two_norms: Vec<f64>,
    pub f_norms: Vec<f64>,
}

/// One sparsification setting and its measured outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub config: SparsifyConfig,
    pub achieved_sparsity: f64,
    pub err_two_norm: f64,
    pub err_f_norm: f64,
    /// Frobenius norm of the sketch itself.
    pub tilde_f_norm: f64,
}

/// Single-channel removal outcome for the channel sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSweepRow {
    pub channel: usize,
    pub l1_mass: f64,
    pub l2_mass: f64,
    /// Frobenius norm of the unfolded matrix with only this channel removed.
    pub tilde_f_norm: f64,
}

fn top_values(a: &Matrix, top_k: usize) -> Result<Vec<f64>> {
    let min_dim = a.rows().min(a.cols());
    let k = top_k.min(min_dim);
    let sigma = if min_dim <= FULL_SVD_CUTOFF {
        svd_full(a)?.sigma
    } else {
        svd_truncated(a, k, 0)?.sigma
    };
    Ok(sigma[..k].to_vec())
}

/// Top-k singular values plus spectral/Frobenius norms and the nonzero count.
pub fn spectrum_summary(a: &Matrix, top_k: usize) -> Result<SpectrumSummary> {
    if top_k == 0 {
        return Err(Error::InvalidParameter("top_k must be >= 1".into()));
    }
    Ok(SpectrumSummary {
        rows: a.rows(),
        cols: a.cols(),
        top_singular_values: top_values(a, top_k)?,
        two_norm: two_norm(a),
        f_norm: a.frobenius_norm(),
        nnz: a.nnz(),
    })
}

/// Paired top-k spectra of `a` and `a_tilde` with the difference norms —
/// the before/after overlay data for pruning experiments.
pub fn compare_spectra(a: &Matrix, a_tilde: &Matrix, top_k: usize) -> Result<SpectrumDelta> {
    if top_k == 0 {
        return Err(Error::InvalidParameter("top_k must be >= 1".into()));
    }
    if a.shape() != a_tilde.shape() {
        return Err(Error::ShapeMismatch {
            op: "compare_spectra",
            left: format!("{}x{}", a.rows(), a.cols()),
            right: format!("{}x{}", a_tilde.rows(), a_tilde.cols()),
        });
    }
    let (err_two_norm, err_f_norm) = sparsification_error(a, a_tilde)?;
    Ok(SpectrumDelta {
        sigma_a: top_values(a, top_k)?,
        sigma_b: top_values(a_tilde, top_k)?,
        err_two_norm,
        err_f_norm,
    })
}

/// Two-norm and F-norm per snapshot, in input order.
pub fn trajectory_report(snapshots: &[(String, Matrix)]) -> Result<NormTrajectory> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::InvalidParameter("trajectory needs at least one snapshot".into()))?;
    let shape = first.1.shape();
    for (label, m) in snapshots {
        if m.shape() != shape {
            return Err(Error::ShapeMismatch {
                op: "trajectory_report",
                left: format!("{}x{} (snapshot '{}')", shape.0, shape.1, first.0),
                right: format!("{}x{} (snapshot '{label}')", m.rows(), m.cols()),
            });
        }
    }
    Ok(NormTrajectory {
        labels: snapshots.iter().map(|(l, _)| l.clone()).collect(),
        two_norms: snapshots.iter().map(|(_, m)| two_norm(m)).collect(),
        f_norms: snapshots.iter().map(|(_, m)| m.frobenius_norm()).collect(),
    })
}

/// Evaluate one sparsification setting on `a`.
pub fn sweep_row(a: &Matrix, config: &SparsifyConfig) -> Result<SweepRow> {
    let result = config.run(a)?;
    Ok(SweepRow {
        config: config.clone(),
        achieved_sparsity: result.achieved_sparsity,
        err_two_norm: result.err_two_norm,
        err_f_norm: result.err_f_norm,
        tilde_f_norm: result.sparse.frobenius_norm(),
    })
}

/// Sweep one method over a list of settings on the same matrix.
///
/// For the threshold method `values` are keep fractions; for the samplers
/// they are quantiles q, with c and rank taken from `fixed`.
pub fn sparsity_sweep(
    a: &Matrix,
    method: SparsifyMethod,
    values: &[f64],
    fixed: &SparsifyConfig,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one setting".into()));
    }
    values
        .iter()
        .map(|&v| {
            let config = match method {
                SparsifyMethod::Threshold => SparsifyConfig::threshold(v),
                SparsifyMethod::Bernoulli => {
                    SparsifyConfig::bernoulli(v, fixed.c.unwrap_or(crate::sparsify::DEFAULT_C))
                }
                SparsifyMethod::LowRank => SparsifyConfig::lowrank(
                    v,
                    fixed.c.unwrap_or(crate::sparsify::DEFAULT_C),
                    fixed.rank_k.unwrap_or(crate::sparsify::DEFAULT_RANK),
                ),
            }
            .with_seed(seed);
            sweep_row(a, &config)
        })
        .collect()
    }

/// Remove each output channel alone and record the remaining F-norm,
/// ordered by channel index.
pub fn channel_sweep(t: &KernelTensor) -> Result<Vec<ChannelSweepRow>> {
    if t.out_channels() < 2 {
        return Err(Error::InvalidParameter(
            "channel sweep needs at least two output channels".into(),
        ));
    }
    let a = unfold_kernel(t);
    let mut scores = channel_scores(t);
    scores.sort_by_key(|s| s.channel_index);
    Ok(scores
        .into_iter()
        .map(|s| {
            let mut removed = a.clone();
            for r in 0..a.rows() {
                removed.set(r, s.channel_index, 0.0);
            }
            ChannelSweepRow {
                channel: s.channel_index,
                l1_mass: s.l1_mass,
                l2_mass: s.l2_mass,
                tilde_f_norm: removed.frobenius_norm(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::KernelTensor;
    use crate::rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let data = (0..rows * cols)
            .map(|k| {
                rng::normal(seed, rng::STREAM_GAUSSIAN, (k / cols) as u64, (k % cols) as u64)
            })
            .collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn summary_examples() {
        let s = spectrum_summary(&Matrix::diag(&[3.0, 1.0]), 2).unwrap();
        assert!((s.top_singular_values[0] - 3.0).abs() < 1e-10);
        assert!((s.top_singular_values[1] - 1.0).abs() < 1e-10);
        assert!((s.two_norm - 3.0).abs() < 1e-8);
        assert!((s.f_norm - 10f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.nnz, 2);

        let z = spectrum_summary(&Matrix::zeros(4, 4), 4).unwrap();
        assert!(z.top_singular_values.iter().all(|&v| v == 0.0));
        assert_eq!(z.two_norm, 0.0);
        assert_eq!(z.f_norm, 0.0);
        assert_eq!(z.nnz, 0);
    }

    #[test]
    fn summary_clips_top_k_and_matches_full() {
        let a = random_matrix(100, 60, 3);
        let s = spectrum_summary(&a, 10).unwrap();
        assert_eq!(s.top_singular_values.len(), 10);
        let full = svd_full(&a).unwrap();
        for (got, want) in s.top_singular_values.iter().zip(&full.sigma) {
            assert!((got - want).abs() < 1e-6 * want);
        }
        assert!((s.two_norm - full.sigma[0]).abs() < 1e-8 * full.sigma[0]);

        let clipped = spectrum_summary(&a, 500).unwrap();
        assert_eq!(clipped.top_singular_values.len(), 60);
    }

    #[test]
    fn compare_examples() {
        let a = random_matrix(5, 5, 9);
        let d = compare_spectra(&a, &a, 3).unwrap();
        assert_eq!(d.sigma_a, d.sigma_b);
        assert_eq!((d.err_two_norm, d.err_f_norm), (0.0, 0.0));

        let d = compare_spectra(&Matrix::diag(&[3.0, 1.0]), &Matrix::diag(&[3.0, 0.0]), 2).unwrap();
        assert!((d.sigma_a[0] - 3.0).abs() < 1e-10 && (d.sigma_b[0] - 3.0).abs() < 1e-10);
        assert!((d.sigma_a[1] - 1.0).abs() < 1e-10 && d.sigma_b[1].abs() < 1e-10);
        assert!((d.err_two_norm - 1.0).abs() < 1e-9);
        assert!((d.err_f_norm - 1.0).abs() < 1e-12);

        assert!(compare_spectra(&a, &Matrix::zeros(4, 5), 2).is_err());
    }

    #[test]
    fn compare_respects_weyl_bound() {
        for seed in 0..10u64 {
            let a = random_matrix(8, 6, 300 + seed);
            let e = random_matrix(8, 6, 400 + seed);
            let perturbed = Matrix::from_vec(
                8,
                6,
                a.data()
                    .iter()
                    .zip(e.data())
                    .map(|(x, y)| x + 0.1 * y)
                    .collect(),
            )
            .unwrap();
            let sa = svd_full(&a).unwrap().sigma;
            let sb = svd_full(&perturbed).unwrap().sigma;
            let gap = sa
                .iter()
                .zip(&sb)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let (err_two, _) = sparsification_error(&a, &perturbed).unwrap();
            assert!(gap <= err_two + 1e-8, "gap {gap} vs {err_two}");
        }
    }

    #[test]
    fn trajectory_examples() {
        let a = random_matrix(4, 4, 17);
        let single = trajectory_report(&[("e0".into(), a.clone())]).unwrap();
        assert_eq!(single.labels.len(), 1);

        let twice = trajectory_report(&[("e0".into(), a.clone()), ("e1".into(), a.clone())]).unwrap();
        assert_eq!(twice.two_norms[0], twice.two_norms[1]);
        assert_eq!(twice.f_norms[0], twice.f_norms[1]);

        let err = trajectory_report(&[
            ("e0".into(), a.clone()),
            ("bad".into(), Matrix::zeros(3, 3)),
        ])
        .unwrap_err()
        .to_string();
        assert!(err.contains("bad"), "{err}");
    }

    #[test]
    fn trajectory_tracks_geometric_convergence() {
        // A_t = A_inf + 0.5^t N gives norm deltas that halve each step.
        let base = random_matrix(6, 6, 23);
        let noise = random_matrix(6, 6, 29);
        let correlated = Matrix::from_vec(
            6,
            6,
            base.data()
                .iter()
                .zip(noise.data())
                .map(|(a, n)| 0.3 * a + 0.2 * n)
                .collect(),
        )
        .unwrap();
        let snaps: Vec<(String, Matrix)> = (0..10)
            .map(|t| {
                let scale = 0.5f64.powi(t);
                let m = Matrix::from_vec(
                    6,
                    6,
                    base.data()
                        .iter()
                        .zip(correlated.data())
                        .map(|(a, n)| a + scale * n)
                        .collect(),
                )
                .unwrap();
                (format!("epoch{t}"), m)
            })
            .collect();
        let traj = trajectory_report(&snaps).unwrap();
        for t in 2..8 {
            let d1 = (traj.f_norms[t] - traj.f_norms[t - 1]).abs();
            let d2 = (traj.f_norms[t + 1] - traj.f_norms[t]).abs();
            let ratio = d2 / d1;
            assert!((ratio - 0.5).abs() < 0.1, "t={t} ratio {ratio}");
        }
    }

    #[test]
    fn sweep_examples() {
        let a = random_matrix(10, 10, 37);
        let rows = sparsity_sweep(
            &a,
            SparsifyMethod::Threshold,
            &[1.0],
            &SparsifyConfig::threshold(1.0),
            0,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].err_f_norm, 0.0);
        assert_eq!(rows[0].err_two_norm, 0.0);

        let grid = [0.20, 0.15, 0.10, 0.05, 0.02, 0.01];
        let rows = sparsity_sweep(
            &a,
            SparsifyMethod::Threshold,
            &grid,
            &SparsifyConfig::threshold(1.0),
            0,
        )
        .unwrap();
        assert_eq!(rows.len(), 6);
        for pair in rows.windows(2) {
            assert!(pair[1].err_f_norm >= pair[0].err_f_norm - 1e-15);
        }
        // Stored errors must be a fresh recomputation, bit for bit.
        for row in &rows {
            let result = row.config.run(&a).unwrap();
            let (two, fro) = sparsification_error(&a, &result.sparse).unwrap();
            assert_eq!(two.to_bits(), row.err_two_norm.to_bits());
            assert_eq!(fro.to_bits(), row.err_f_norm.to_bits());
        }

        assert!(sparsity_sweep(
            &a,
            SparsifyMethod::Threshold,
            &[],
            &SparsifyConfig::threshold(1.0),
            0
        )
        .is_err());
    }

    #[test]
    fn channel_sweep_identities() {
        let mut data: Vec<f64> = (0..4 * 8).map(|i| (i % 7) as f64 - 3.0).collect();
        // Make channels 0 and 1 identical and channel 3 all zero.
        let per = 8;
        let (first, rest) = data.split_at_mut(per);
        rest[..per].copy_from_slice(first);
        for v in &mut data[3 * per..4 * per] {
            *v = 0.0;
        }
        let t = KernelTensor::from_vec(4, 2, 2, 2, data).unwrap();
        let a = unfold_kernel(&t);
        let rows = channel_sweep(&t).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].l1_mass, rows[1].l1_mass);
        assert_eq!(rows[0].tilde_f_norm, rows[1].tilde_f_norm);
        assert_eq!(rows[3].tilde_f_norm, a.frobenius_norm());
        for row in &rows {
            let lhs = row.tilde_f_norm.powi(2) + row.l2_mass.powi(2);
            let rhs = a.frobenius_norm().powi(2);
            assert!((lhs - rhs).abs() < 1e-10);
        }

        let single = KernelTensor::from_vec(1, 1, 1, 1, vec![1.0]).unwrap();
        assert!(channel_sweep(&single).is_err());
    }
}
