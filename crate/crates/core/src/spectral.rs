//! Spectral (L²-weighted) eigendecomposition of the same grid covariances,
//! and a side-by-side comparison with the greedy sup-norm decomposition.
//!
//! The two constructions optimize in different geometries and are not mixed:
//! the report lists each method's own values, partial sums, and native
//! truncation errors. One contrast is structural: the spectral eigenvalue
//! sum is bounded by the trace, while the greedy value sums can grow without
//! bound (they do for Brownian motion, by a quarter per dyadic level). In
//! the L² setting finite trace characterizes Gaussian covariances; no
//! analogous summability criterion is known for the sup-norm values, so the
//! report presents both sums without declaring a winner.

use serde::Serialize;

use crate::cov::GridCovariance;
use crate::error::{Error, Result};
use crate::greedy::Decomposition;
use crate::grid::Grid;
use crate::matrix;

/// Trapezoid quadrature weights for a (possibly non-uniform) grid.
/// A single-point grid gets unit weight.
pub fn trapezoid_weights(grid: &Grid) -> Vec<f64> {
    let pts = grid.points();
    let m = pts.len();
    if m == 1 {
        return vec![1.0];
    }
    let mut w = vec![0.0; m];
    w[0] = (pts[1] - pts[0]) / 2.0;
    w[m - 1] = (pts[m - 1] - pts[m - 2]) / 2.0;
    for i in 1..m - 1 {
        w[i] = (pts[i + 1] - pts[i - 1]) / 2.0;
    }
    w
}

/// Eigsystem of the weighted covariance, approximating the L² Mercer
/// spectrum of the kernel for analytic kernels on fine grids.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub grid: Grid,
    pub weights: Vec<f64>,
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` is the k-th eigenfunction on the grid, orthonormal
    /// in the weighted inner product `⟨u, v⟩_W = Σ w_i u_i v_i`.
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Diagonalizes `W^{1/2} R W^{1/2}` and back-transforms the eigenvectors to
/// the weighted geometry. Weights must be strictly positive.
pub fn spectral_decompose(cov: &GridCovariance, weights: &[f64]) -> Result<SpectralDecomposition> {
    let m = cov.dim();
    if weights.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: weights.len(),
        });
    }
    if weights.iter().any(|&w| !w.is_finite() || w <= 0.0) {
        return Err(Error::NonPositiveWeights);
    }
    let s: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut b = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            // (s_i * s_j) first keeps the weighted matrix bit-symmetric.
            b[i * m + j] = cov.entry(i, j) * (s[i] * s[j]);
        }
    }
    let (eigenvalues, raw) = matrix::jacobi_eigen(m, &b);
    let eigenvectors = raw
        .into_iter()
        .map(|u| u.iter().zip(&s).map(|(ui, si)| ui / si).collect())
        .collect();
    Ok(SpectralDecomposition {
        grid: cov.grid().clone(),
        weights: weights.to_vec(),
        eigenvalues,
        eigenvectors,
    })
}

impl SpectralDecomposition {
    /// Weighted inner product of two grid vectors.
    pub fn weighted_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b.iter()))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    /// Σ of the leading `n` eigenvalues.
    pub fn partial_trace(&self, n: usize) -> f64 {
        self.eigenvalues.iter().take(n).sum()
    }
}

/// One comparison row; errors are each method's own truncation identity
/// (max-entry norm for greedy, next eigenvalue for spectral).
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub n: usize,
    pub greedy_lambda: f64,
    pub spectral_lambda: f64,
    pub greedy_partial_sum: f64,
    pub spectral_partial_sum: f64,
    pub greedy_trunc_error: f64,
    pub spectral_trunc_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    /// Weighted diagonal sum of the source; equals the eigenvalue sum.
    pub spectral_trace: f64,
    /// First `n` at which the greedy partial sum exceeds the trace, if any.
    pub greedy_exceeds_trace_at: Option<usize>,
}

/// Side-by-side diagnostics for the first `n + 1` components of both
/// decompositions of the same source.
pub fn compare_decompositions(
    dec: &Decomposition,
    spectral: &SpectralDecomposition,
    n: usize,
) -> Result<CompareReport> {
    if dec.grid() != &spectral.grid {
        return Err(Error::SourceMismatch);
    }
    if n >= dec.len() || n >= spectral.eigenvalues.len() {
        return Err(Error::OutOfRange {
            requested: n,
            available: dec.len().min(spectral.eigenvalues.len()),
        });
    }
    let m = dec.source.dim();
    let spectral_trace: f64 = (0..m)
        .map(|i| spectral.weights[i] * dec.source.entry(i, i))
        .sum();

    let mut rows = Vec::with_capacity(n + 1);
    let mut greedy_sum = 0.0;
    let mut spectral_sum = 0.0;
    let mut greedy_exceeds_trace_at = None;
    for k in 0..=n {
        greedy_sum += dec.steps[k].lambda;
        spectral_sum += spectral.eigenvalues[k];
        if greedy_exceeds_trace_at.is_none() && greedy_sum > spectral_trace {
            greedy_exceeds_trace_at = Some(k);
        }
        rows.push(CompareRow {
            n: k,
            greedy_lambda: dec.steps[k].lambda,
            spectral_lambda: spectral.eigenvalues[k],
            greedy_partial_sum: greedy_sum,
            spectral_partial_sum: spectral_sum,
            greedy_trunc_error: dec.steps[k].residual_max_entry,
            spectral_trunc_error: spectral.eigenvalues.get(k + 1).copied().unwrap_or(0.0),
        });
    }
    Ok(CompareReport {
        rows,
        spectral_trace,
        greedy_exceeds_trace_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::decompose;
    use crate::kernel::KernelSpec;

    fn unit_grid(m: usize) -> Grid {
        Grid::new((0..m).map(|i| i as f64 / (m - 1) as f64).collect()).unwrap()
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let g = Grid::dyadic(4).unwrap();
        let w = trapezoid_weights(&g);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let g = Grid::new(vec![0.0, 0.1, 0.7, 1.0]).unwrap();
        let w = trapezoid_weights(&g);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_matrix_with_unit_weights() {
        let g = unit_grid(2);
        let cov = GridCovariance::new(g, &[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let sd = spectral_decompose(&cov, &[1.0, 1.0]).unwrap();
        assert!((sd.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((sd.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one_spectrum_is_weighted_norm() {
        let m = 6;
        let g = unit_grid(m);
        let v: Vec<f64> = (0..m).map(|i| (0.3 * i as f64).cos()).collect();
        let lam = 0.8;
        let mut rows = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                rows[i][j] = lam * v[i] * v[j];
            }
        }
        let cov = GridCovariance::new(g.clone(), &rows).unwrap();
        let w = trapezoid_weights(&g);
        let sd = spectral_decompose(&cov, &w).unwrap();
        let norm_w: f64 = w.iter().zip(&v).map(|(wi, vi)| wi * vi * vi).sum();
        assert!((sd.eigenvalues[0] - lam * norm_w).abs() < 1e-12);
        for &e in &sd.eigenvalues[1..] {
            assert!(e.abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_weights_are_rejected() {
        let g = unit_grid(2);
        let cov = GridCovariance::new(g, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            spectral_decompose(&cov, &[1.0, 0.0]),
            Err(Error::NonPositiveWeights)
        ));
        assert!(spectral_decompose(&cov, &[1.0]).is_err());
    }

    #[test]
    fn eigenvectors_are_weighted_orthonormal_and_reconstruct() {
        let g = Grid::dyadic(4).unwrap();
        let cov = KernelSpec::BrownianMotion.discretize(&g).unwrap();
        let w = trapezoid_weights(&g);
        let sd = spectral_decompose(&cov, &w).unwrap();
        let m = cov.dim();
        for a in 0..m {
            for b in a..m {
                let dot = sd.weighted_dot(&sd.eigenvectors[a], &sd.eigenvectors[b]);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "({a},{b}) -> {dot}");
            }
        }
        for i in 0..m {
            for j in 0..m {
                let mut r = 0.0;
                for k in 0..m {
                    r += sd.eigenvalues[k] * sd.eigenvectors[k][i] * sd.eigenvectors[k][j];
                }
                assert!((r - cov.entry(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn brownian_leading_eigenvalue_approaches_mercer_value() {
        // L² spectrum of min(s,t) on [0,1]: 4 / ((2k-1)^2 π^2).
        let mercer0 = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
        let mut errs = Vec::new();
        for level in [4, 5, 6] {
            let g = Grid::dyadic(level).unwrap();
            let cov = KernelSpec::BrownianMotion.discretize(&g).unwrap();
            let sd = spectral_decompose(&cov, &trapezoid_weights(&g)).unwrap();
            errs.push((sd.eigenvalues[0] - mercer0).abs());
        }
        // Error shrinks under refinement and is already small at level 6.
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
        assert!(errs[2] < 2e-3 * mercer0, "level-6 error {:e}", errs[2]);
    }

    #[test]
    fn comparison_report_on_wiener() {
        let g = Grid::dyadic(5).unwrap();
        let cov = KernelSpec::BrownianMotion.discretize(&g).unwrap();
        let dec = decompose(&cov, 16, 0.0);
        let sd = spectral_decompose(&cov, &trapezoid_weights(&g)).unwrap();
        let report = compare_decompositions(&dec, &sd, 15).unwrap();
        // Trapezoid quadrature of t over [0,1] is exact: trace = 1/2.
        assert!((report.spectral_trace - 0.5).abs() < 1e-12);
        // Greedy sums blow past the trace immediately (λ_0 = 1 > 1/2).
        assert_eq!(report.greedy_exceeds_trace_at, Some(0));
        // Spectral sums stay at or below the trace.
        for row in &report.rows {
            assert!(row.spectral_partial_sum <= report.spectral_trace + 1e-12);
        }
    }

    #[test]
    fn rank_one_source_gives_identical_single_component() {
        let m = 5;
        let g = unit_grid(m);
        let v = [1.0, 0.5, 0.25, 0.75, 0.125];
        let mut rows = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                rows[i][j] = 2.0 * v[i] * v[j];
            }
        }
        let cov = GridCovariance::new(g, &rows).unwrap();
        let dec = decompose(&cov, 5, 0.0);
        assert_eq!(dec.len(), 1);
        let sd = spectral_decompose(&cov, &vec![1.0; m]).unwrap();
        // Both see exactly one component; with unit weights the directions
        // agree up to normalization.
        assert!(sd.eigenvalues[1].abs() < 1e-12);
        let report = compare_decompositions(&dec, &sd, 0).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!((report.rows[0].greedy_trunc_error).abs() < 1e-12);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g5 = Grid::dyadic(2).unwrap();
        let g9 = Grid::dyadic(3).unwrap();
        let cov5 = KernelSpec::BrownianMotion.discretize(&g5).unwrap();
        let cov9 = KernelSpec::BrownianMotion.discretize(&g9).unwrap();
        let dec = decompose(&cov5, 4, 0.0);
        let sd = spectral_decompose(&cov9, &trapezoid_weights(&g9)).unwrap();
        assert!(matches!(
            compare_decompositions(&dec, &sd, 2),
            Err(Error::SourceMismatch)
        ));
    }
}
