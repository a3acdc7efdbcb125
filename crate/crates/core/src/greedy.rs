//! Greedy maximum-variance decomposition of a grid covariance.
//!
//! Each step maximizes the variance quadratic form `⟨R f, f⟩` over the unit
//! dual ball. The form is convex, so the maximum sits at an extreme point of
//! the ball — a signed point mass `±δ_t` — and on a grid the search reduces
//! to the largest diagonal entry of the residual covariance. Splitting off
//! the corresponding rank-one component and iterating yields exactly a
//! diagonally pivoted Cholesky factorization: `R = Σ_k λ_k x_k x_kᵀ` with
//! `λ_0 ≥ λ_1 ≥ ... ≥ 0`, and the sup-norm truncation error after `n + 1`
//! steps equal to the next value `λ_{n+1}`.

use serde::{Deserialize, Serialize};

use crate::cov::{DualFunctional, GridCovariance};
use crate::dual_basis;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix;

/// One step of the decomposition.
///
/// `x` is the unit sup-norm direction with `x[pivot_index] = 1`; the scaled
/// direction `h = sqrt(lambda) * x` has unit Cameron–Martin norm. The dual
/// vector `x_star` is biorthogonal to the directions and is supported on the
/// pivots seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionStep {
    pub lambda: f64,
    pub pivot_index: usize,
    /// Always `+1`: the quadratic form cannot distinguish `±f`, so the
    /// positive point mass is the canonical representative.
    pub pivot_sign: i8,
    pub x: Vec<f64>,
    pub x_star: DualFunctional,
    /// Max absolute entry of the residual after this step's downdate;
    /// this is the sup-norm operator error of the truncation ending here.
    pub residual_max_entry: f64,
}

impl DecompositionStep {
    /// The maximizing functional `sign * δ_pivot`.
    pub fn f(&self) -> DualFunctional {
        let mut f = DualFunctional::dirac(self.pivot_index);
        if self.pivot_sign < 0 {
            f.scale(-1.0);
        }
        f
    }

    /// `h = sqrt(lambda) * x`, the unit Cameron–Martin direction.
    pub fn h(&self) -> Vec<f64> {
        let s = self.lambda.sqrt();
        self.x.iter().map(|v| s * v).collect()
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StepLimit,
    RankExhausted,
    ToleranceReached,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::StepLimit => write!(f, "step limit"),
            Termination::RankExhausted => write!(f, "rank exhausted"),
            Termination::ToleranceReached => write!(f, "tolerance reached"),
        }
    }
}

/// Ordered decomposition steps plus the terminal residual covariance.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub source: GridCovariance,
    pub steps: Vec<DecompositionStep>,
    pub residual: GridCovariance,
    pub termination: Termination,
}

/// Largest diagonal entry of the residual: the maximal variance over the
/// unit dual ball, together with the attaining pivot (`+δ` by convention,
/// smallest index on ties). A zero value means the operator is zero.
pub fn rayleigh_max(residual: &GridCovariance) -> (f64, usize, i8) {
    let (lambda, idx) = residual.max_diag();
    (lambda, idx, 1)
}

/// Splits off the rank-one component at `pivot`.
///
/// Returns `(lambda, x, new_residual)` where `lambda` is the pivot diagonal
/// entry, `x` is the pivot column divided by `lambda` (so `x[pivot] = 1`),
/// and `new_residual = residual - lambda * x xᵀ` with the pivot row and
/// column set to exactly zero.
pub fn split_step(
    residual: &GridCovariance,
    pivot: usize,
) -> Result<(f64, Vec<f64>, GridCovariance)> {
    let m = residual.dim();
    if pivot >= m {
        return Err(Error::OutOfRange {
            requested: pivot,
            available: m,
        });
    }
    let lambda = residual.entry(pivot, pivot);
    if lambda <= 0.0 {
        return Err(Error::DegeneratePivot(pivot));
    }
    let x: Vec<f64> = (0..m).map(|i| residual.entry(i, pivot) / lambda).collect();
    let mut data = residual.data().to_vec();
    matrix::sub_scaled_outer(&mut data, m, lambda, &x);
    // The pivot row and column cancel only up to rounding; force them to zero
    // so later pairings against earlier pivots vanish identically.
    matrix::zero_row_col(&mut data, m, pivot);
    Ok((
        lambda,
        x,
        GridCovariance::from_raw(residual.grid().clone(), data),
    ))
}

/// Runs the iteration: maximize, split, repeat.
///
/// Stops at `max_steps`, when the residual is exactly zero (rank exhausted),
/// or when the maximal variance drops to `lambda_tol` or below. `lambda_tol`
/// is an absolute threshold; callers usually derive it from the leading
/// value, e.g. `1e-12 * lambda_0`.
pub fn decompose(cov: &GridCovariance, max_steps: usize, lambda_tol: f64) -> Decomposition {
    let mut residual = cov.clone();
    let mut steps: Vec<DecompositionStep> = Vec::new();
    let termination;
    loop {
        if steps.len() >= max_steps {
            termination = Termination::StepLimit;
            break;
        }
        let (lambda, pivot, sign) = rayleigh_max(&residual);
        if lambda <= 0.0 {
            termination = Termination::RankExhausted;
            break;
        }
        if lambda <= lambda_tol {
            termination = Termination::ToleranceReached;
            break;
        }
        let (lam, x, next) = split_step(&residual, pivot).expect("pivot diagonal is positive");
        let residual_max_entry = next.max_abs_entry();
        steps.push(DecompositionStep {
            lambda: lam,
            pivot_index: pivot,
            pivot_sign: sign,
            x,
            x_star: DualFunctional::zero(),
            residual_max_entry,
        });
        residual = next;
    }
    let stars = dual_basis::dual_vectors(&steps);
    for (step, star) in steps.iter_mut().zip(stars) {
        step.x_star = star;
    }
    Decomposition {
        source: cov.clone(),
        steps,
        residual,
        termination,
    }
}

impl Decomposition {
    pub fn grid(&self) -> &Grid {
        self.source.grid()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.lambda).collect()
    }

    /// Leading variance; zero for an empty decomposition of a zero matrix.
    pub fn lambda0(&self) -> f64 {
        self.steps
            .first()
            .map(|s| s.lambda)
            .unwrap_or_else(|| self.source.max_diag().0.max(0.0))
    }

    /// Sup-norm operator error of the `n + 1`-term truncation: the max
    /// absolute entry of the residual after steps `0..=n`. Equals the next
    /// value `λ_{n+1}` whenever one exists.
    pub fn truncation_error(&self, n: usize) -> Result<f64> {
        self.steps
            .get(n)
            .map(|s| s.residual_max_entry)
            .ok_or(Error::OutOfRange {
                requested: n,
                available: self.steps.len(),
            })
    }

    /// Covariance of the measure truncated to the first `n_terms` components:
    /// `Σ_{k < n_terms} λ_k x_k x_kᵀ`.
    pub fn partial_covariance(&self, n_terms: usize) -> Result<GridCovariance> {
        if n_terms > self.steps.len() {
            return Err(Error::OutOfRange {
                requested: n_terms,
                available: self.steps.len(),
            });
        }
        let m = self.source.dim();
        let mut data = vec![0.0; m * m];
        for step in &self.steps[..n_terms] {
            matrix::add_scaled_outer(&mut data, m, step.lambda, &step.x);
        }
        Ok(GridCovariance::from_raw(self.grid().clone(), data))
    }

    /// Residual covariance after consuming `count` steps.
    ///
    /// Reconstructed canonically from the terminal residual by adding the
    /// dropped rank-one components back in descending step order, so the
    /// result is identical whether the decomposition lives in memory or was
    /// reloaded from a file.
    pub fn residual_after_steps(&self, count: usize) -> Result<GridCovariance> {
        if count > self.steps.len() {
            return Err(Error::OutOfRange {
                requested: count,
                available: self.steps.len(),
            });
        }
        let m = self.source.dim();
        let mut data = self.residual.data().to_vec();
        for step in self.steps[count..].iter().rev() {
            matrix::add_scaled_outer(&mut data, m, step.lambda, &step.x);
        }
        Ok(GridCovariance::from_raw(self.grid().clone(), data))
    }

    /// Rebuilds a decomposition from stored parts, validating dimensions and
    /// basic step structure.
    pub fn from_parts(
        source: GridCovariance,
        steps: Vec<DecompositionStep>,
        residual: GridCovariance,
        termination: Termination,
    ) -> Result<Self> {
        let m = source.dim();
        if residual.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: residual.dim(),
            });
        }
        for (n, step) in steps.iter().enumerate() {
            if step.x.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: step.x.len(),
                });
            }
            if step.pivot_index >= m {
                return Err(Error::InvalidDecomposition(format!(
                    "step {n}: pivot index {} out of range",
                    step.pivot_index
                )));
            }
            if !(step.lambda.is_finite() && step.lambda >= 0.0) {
                return Err(Error::InvalidDecomposition(format!(
                    "step {n}: lambda {} not a finite nonnegative value",
                    step.lambda
                )));
            }
        }
        Ok(Self {
            source,
            steps,
            residual,
            termination,
        })
    }

    /// Checks the cheap structural invariants the iteration maintains:
    /// the recorded residual errors never increase, the terminal residual
    /// diagonal is nonnegative up to rounding, and its largest absolute
    /// entry sits on the diagonal up to rounding. Returns a description of
    /// the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let lambda0 = self.lambda0();
        let slack = 1e-12 * lambda0;
        for (n, step) in self.steps.iter().enumerate() {
            if step.residual_max_entry > step.lambda * (1.0 + 1e-9) + slack {
                return Err(format!(
                    "step {n}: residual max entry {} exceeds lambda {}",
                    step.residual_max_entry, step.lambda
                ));
            }
        }
        for w in self.steps.windows(2) {
            if w[1].lambda > w[0].lambda {
                return Err(format!(
                    "lambda sequence increases: {} -> {}",
                    w[0].lambda, w[1].lambda
                ));
            }
        }
        let m = self.residual.dim();
        let mut max_diag: f64 = 0.0;
        for i in 0..m {
            let d = self.residual.entry(i, i);
            if d < -1e-10 * lambda0 {
                return Err(format!(
                    "terminal residual diagonal {d:e} at {i} is negative"
                ));
            }
            max_diag = max_diag.max(d);
        }
        let max_entry = self.residual.max_abs_entry();
        if max_entry > max_diag * (1.0 + 1e-9) + slack {
            return Err(format!(
                "terminal residual max entry {max_entry:e} exceeds max diagonal {max_diag:e}"
            ));
        }
        Ok(())
    }
}
