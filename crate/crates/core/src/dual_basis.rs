//! Biorthogonal dual vectors, projections onto the greedy directions, and
//! the Cameron–Martin inner product.
//!
//! The dual vectors satisfy `⟨x_j, x*_k⟩ = δ_jk`; evaluated against the
//! measure they are independent centered Gaussians with variances `λ_n`,
//! which is what `verify_biorthogonality` checks numerically.

use serde::Serialize;

use crate::cov::{DualFunctional, GridCovariance};
use crate::error::{Error, Result};
use crate::greedy::{Decomposition, DecompositionStep};

/// Dual vectors by the recurrence `x*_0 = f_0`,
/// `x*_n = f_n - Σ_{k<n} ⟨x_k, f_n⟩ x*_k`.
///
/// Since each `f_n` is a point mass, the recurrence closes over the pivot
/// indices and the result stays sparse — a structural fact, not an
/// approximation.
pub fn dual_vectors(steps: &[DecompositionStep]) -> Vec<DualFunctional> {
    let mut out: Vec<DualFunctional> = Vec::with_capacity(steps.len());
    for (n, step) in steps.iter().enumerate() {
        let mut v = step.f();
        for (k, prev) in out.iter().enumerate().take(n) {
            let a = f64::from(step.pivot_sign) * steps[k].x[step.pivot_index];
            if a != 0.0 {
                v.add_scaled(prev, -a);
            }
        }
        out.push(v);
    }
    out
}

/// `h*_n = λ_n^{-1/2} x*_n`, the functional whose evaluation is standard
/// normal under the measure.
pub fn h_star(step: &DecompositionStep) -> DualFunctional {
    let mut f = step.x_star.clone();
    f.scale(1.0 / step.lambda.sqrt());
    f
}

/// Projection of a grid vector onto the span of `x_0..=x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub projected: Vec<f64>,
    /// `coefficients[k] = ⟨x, x*_k⟩`, so `projected = Σ coefficients[k] x_k`.
    pub coefficients: Vec<f64>,
}

/// Projects via the dual coefficients: `P_n x = Σ_{k≤n} ⟨x, x*_k⟩ x_k`.
pub fn project(steps: &[DecompositionStep], x: &[f64], n: usize) -> Result<ProjectionResult> {
    if n >= steps.len() {
        return Err(Error::OutOfRange {
            requested: n,
            available: steps.len(),
        });
    }
    let m = steps[0].x.len();
    if x.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    let mut projected = vec![0.0; m];
    let mut coefficients = Vec::with_capacity(n + 1);
    for step in &steps[..=n] {
        let c = step.x_star.pair(x);
        coefficients.push(c);
        for (p, &xi) in projected.iter_mut().zip(step.x.iter()) {
            *p += c * xi;
        }
    }
    Ok(ProjectionResult {
        projected,
        coefficients,
    })
}

/// Same projection by the recursive route
/// `P_n x = Σ_{k≤n} ⟨x - P_{k-1} x, f_k⟩ x_k`; agrees with [`project`] up to
/// rounding and exists as an independent second formula for tests.
pub fn project_recursive(steps: &[DecompositionStep], x: &[f64], n: usize) -> Result<Vec<f64>> {
    if n >= steps.len() {
        return Err(Error::OutOfRange {
            requested: n,
            available: steps.len(),
        });
    }
    let m = steps[0].x.len();
    if x.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    let mut acc = vec![0.0; m];
    for step in &steps[..=n] {
        // ⟨x - acc, f_k⟩ with f_k = sign * δ_pivot.
        let c = f64::from(step.pivot_sign) * (x[step.pivot_index] - acc[step.pivot_index]);
        for (a, &xi) in acc.iter_mut().zip(step.x.iter()) {
            *a += c * xi;
        }
    }
    Ok(acc)
}

/// Cameron–Martin inner product of the representers of two functionals:
/// `⟨R c, R d⟩_γ = cᵀ R d`.
pub fn cm_inner(cov: &GridCovariance, c: &DualFunctional, d: &DualFunctional) -> Result<f64> {
    let rd = cov.apply_dual(d)?;
    if let Some(max) = c.max_index() {
        if max >= cov.dim() {
            return Err(Error::SupportMismatch {
                index: max,
                size: cov.dim(),
            });
        }
    }
    Ok(c.pair(&rd))
}

/// Worst deviations of the biorthogonality system from its exact values.
#[derive(Debug, Clone, Serialize)]
pub struct BiorthReport {
    /// `max |⟨x_j, x*_k⟩ - δ_jk|`.
    pub max_pairing_dev: f64,
    /// `max |x*_nᵀ R x*_m - λ_n δ_nm|` — the covariance diagonalization.
    pub max_gram_dev: f64,
    /// `max |R x*_n - λ_n x_n|_∞` — the representer identity.
    pub max_representer_dev: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks `⟨x_j, x*_k⟩ = δ_jk`, `x*ᵀ R x* = diag(λ)`, and `R x*_n = λ_n x_n`
/// against the source covariance, at tolerance `1e-8 * λ_0`.
pub fn verify_biorthogonality(dec: &Decomposition) -> Result<BiorthReport> {
    if dec.is_empty() {
        return Err(Error::OutOfRange {
            requested: 1,
            available: 0,
        });
    }
    let lambda0 = dec.lambda0();
    let tolerance = 1e-8 * lambda0;
    let n = dec.len();

    let mut max_pairing_dev = 0.0f64;
    for (j, sj) in dec.steps.iter().enumerate() {
        for (k, sk) in dec.steps.iter().enumerate() {
            let want = if j == k { 1.0 } else { 0.0 };
            let got = sk.x_star.pair(&sj.x);
            max_pairing_dev = max_pairing_dev.max((got - want).abs());
        }
    }

    let mut max_gram_dev = 0.0f64;
    let mut max_representer_dev = 0.0f64;
    for (i, si) in dec.steps.iter().enumerate() {
        let r_star = dec.source.apply_dual(&si.x_star)?;
        for (row, &xi) in r_star.iter().zip(si.x.iter()) {
            max_representer_dev = max_representer_dev.max((row - si.lambda * xi).abs());
        }
        for (j, sj) in dec.steps.iter().enumerate().take(n) {
            let want = if i == j { si.lambda } else { 0.0 };
            let got = sj.x_star.pair(&r_star);
            max_gram_dev = max_gram_dev.max((got - want).abs());
        }
    }

    let passed =
        max_pairing_dev <= 1e-8 && max_gram_dev <= tolerance && max_representer_dev <= tolerance;
    Ok(BiorthReport {
        max_pairing_dev,
        max_gram_dev,
        max_representer_dev,
        tolerance,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::decompose;
    use crate::grid::Grid;
    use crate::kernel::KernelSpec;

    fn wiener_dec(level: u32, steps: usize) -> Decomposition {
        let grid = Grid::dyadic(level).unwrap();
        let cov = KernelSpec::BrownianMotion.discretize(&grid).unwrap();
        decompose(&cov, steps, 0.0)
    }

    fn pseudo_psd(m: usize, seed: u64) -> GridCovariance {
        let grid = Grid::new((0..m).map(|i| i as f64 / (m - 1) as f64).collect()).unwrap();
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a: Vec<f64> = (0..m * m).map(|_| next()).collect();
        let mut rows = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                rows[i][j] = (0..m).map(|k| a[i * m + k] * a[j * m + k]).sum();
            }
        }
        GridCovariance::new(grid, &rows).unwrap()
    }

    #[test]
    fn base_case_is_f0() {
        let dec = wiener_dec(3, 4);
        assert_eq!(dec.steps[0].x_star, dec.steps[0].f());
    }

    #[test]
    fn wiener_second_dual_vector() {
        // x*_1 = δ_{1/2} - (1/2) δ_1, exactly (dyadic arithmetic).
        let dec = wiener_dec(3, 4);
        let grid = dec.grid().clone();
        let i_half = grid.index_of(0.5).unwrap();
        let i_one = grid.index_of(1.0).unwrap();
        let star = &dec.steps[1].x_star;
        assert_eq!(star.support_len(), 2);
        assert_eq!(star.coeff(i_half), 1.0);
        assert_eq!(star.coeff(i_one), -0.5);
    }

    #[test]
    fn dual_vectors_match_dense_projection_transpose_oracle() {
        // Oracle: x*_n = (I - P_{n-1})ᵀ f_n with P built as the dense matrix
        // Σ x_k (x*_k)ᵀ from the already-verified earlier vectors.
        let cov = pseudo_psd(6, 91);
        let dec = decompose(&cov, 6, 0.0);
        let m = cov.dim();
        for n in 0..dec.len() {
            let mut p = vec![0.0; m * m]; // P_{n-1}
            for step in &dec.steps[..n] {
                for i in 0..m {
                    for (j, w) in (0..m).map(|j| (j, step.x_star.coeff(j))) {
                        p[i * m + j] += step.x[i] * w;
                    }
                }
            }
            // (I - P)ᵀ f_n  with f_n = δ_pivot: column `pivot` of (I - P).
            let pivot = dec.steps[n].pivot_index;
            for j in 0..m {
                let want = if j == pivot { 1.0 } else { 0.0 } - p[pivot * m + j];
                let got = dec.steps[n].x_star.coeff(j);
                assert!(
                    (got - want).abs() < 1e-10,
                    "step {n}, coefficient {j}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn projection_fixes_directions() {
        let dec = wiener_dec(3, 6);
        for k in 0..dec.len() {
            let r = project(&dec.steps, &dec.steps[k].x, dec.len() - 1).unwrap();
            for (a, b) in r.projected.iter().zip(dec.steps[k].x.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn first_wiener_projection_is_linear_interpolant_at_one() {
        // P_0 x = x(1) * t.
        let dec = wiener_dec(3, 2);
        let grid = dec.grid().clone();
        let x: Vec<f64> = grid.points().iter().map(|t| (7.0 * t).sin()).collect();
        let r = project(&dec.steps, &x, 0).unwrap();
        let x1 = *x.last().unwrap();
        for (i, &t) in grid.points().iter().enumerate() {
            assert!((r.projected[i] - x1 * t).abs() < 1e-14);
        }
    }

    #[test]
    fn recursive_and_dual_routes_agree() {
        let cov = pseudo_psd(7, 5);
        let dec = decompose(&cov, 7, 0.0);
        let m = cov.dim();
        let mut state = 77u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..100 {
            let x: Vec<f64> = (0..m).map(|_| next()).collect();
            for n in [0, 2, dec.len() - 1] {
                let a = project(&dec.steps, &x, n).unwrap();
                let b = project_recursive(&dec.steps, &x, n).unwrap();
                for (u, v) in a.projected.iter().zip(b.iter()) {
                    assert!((u - v).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let cov = pseudo_psd(6, 29);
        let dec = decompose(&cov, 6, 0.0);
        let x: Vec<f64> = (0..6).map(|i| (i as f64 * 0.77).cos()).collect();
        let n = 3;
        let once = project(&dec.steps, &x, n).unwrap().projected;
        let twice = project(&dec.steps, &once, n).unwrap().projected;
        for (u, v) in once.iter().zip(twice.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn cm_inner_diagonalizes() {
        let dec = wiener_dec(4, 8);
        for (n, sn) in dec.steps.iter().enumerate() {
            let hs = h_star(sn);
            let unit = cm_inner(&dec.source, &hs, &hs).unwrap();
            assert!((unit - 1.0).abs() < 1e-10, "step {n}: {unit}");
            for sm in dec.steps.iter().skip(n + 1) {
                let cross = cm_inner(&dec.source, &sn.x_star, &sm.x_star).unwrap();
                assert!(cross.abs() < 1e-10);
            }
        }
        let zero = DualFunctional::zero();
        assert_eq!(cm_inner(&dec.source, &zero, &zero).unwrap(), 0.0);
    }

    #[test]
    fn biorthogonality_report_on_wiener() {
        let dec = wiener_dec(4, 16);
        let report = verify_biorthogonality(&dec).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.max_pairing_dev < 1e-10);
        assert!(report.max_gram_dev < 1e-10);
        assert!(report.max_representer_dev < 1e-10);
    }

    #[test]
    fn single_step_pairing_is_exact() {
        let dec = wiener_dec(2, 1);
        let s = &dec.steps[0];
        assert_eq!(s.x_star.pair(&s.x), 1.0);
    }

    #[test]
    fn representer_identity_on_random_matrix() {
        let cov = pseudo_psd(6, 101);
        let dec = decompose(&cov, 6, 0.0);
        let report = verify_biorthogonality(&dec).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn empty_decomposition_is_rejected() {
        let grid = Grid::new(vec![0.0, 1.0]).unwrap();
        let cov = GridCovariance::new(grid, &[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let dec = decompose(&cov, 4, 0.0);
        assert!(verify_biorthogonality(&dec).is_err());
    }
}
