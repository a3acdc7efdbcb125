//! Covariance matrices over grids and the dual functionals acting on them.
//!
//! A grid covariance is the matrix `R[i][j] = Cov(X(t_i), X(t_j))` of a
//! centered Gaussian vector in sup-norm geometry. Dual functionals are
//! finitely supported signed combinations of point evaluations; their natural
//! norm is the total variation of the coefficients (the l1 norm), which is
//! what makes the unit dual ball's extreme points the signed point masses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix;

/// Symmetric positive-semidefinite covariance matrix over a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridCovariance {
    grid: Grid,
    /// Row-major `m x m`, bit-symmetric.
    data: Vec<f64>,
}

/// Relative tolerance for symmetry and PSD validation of user matrices.
pub const PSD_REL_TOL: f64 = 1e-10;

impl GridCovariance {
    /// Validated constructor for explicit matrices: checks squareness and
    /// symmetry within tolerance, symmetrizes as `(A + Aᵀ)/2`, then probes
    /// positive semidefiniteness with a shifted Cholesky factorization.
    pub fn new(grid: Grid, rows: &[Vec<f64>]) -> Result<Self> {
        let m = grid.len();
        if rows.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: rows.len(),
            });
        }
        let mut data = vec![0.0; m * m];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
            data[i * m..(i + 1) * m].copy_from_slice(row);
        }
        let scale = matrix::max_abs(&data);
        for i in 0..m {
            for j in (i + 1)..m {
                let d = (data[matrix::at(m, i, j)] - data[matrix::at(m, j, i)]).abs();
                if d > PSD_REL_TOL * scale {
                    return Err(Error::InvalidKernel(format!(
                        "matrix not symmetric: |A[{i}][{j}] - A[{j}][{i}]| = {d:e}"
                    )));
                }
                // Exact symmetrization; leaves already-symmetric inputs unchanged.
                let avg = (data[matrix::at(m, i, j)] + data[matrix::at(m, j, i)]) / 2.0;
                data[matrix::at(m, i, j)] = avg;
                data[matrix::at(m, j, i)] = avg;
            }
        }
        let (max_diag, _) = matrix::max_diag(m, &data);
        if max_diag < 0.0 {
            return Err(Error::NotPsd("negative diagonal entry".into()));
        }
        let shift = PSD_REL_TOL * max_diag.max(scale);
        if !matrix::cholesky_psd_ok(m, &data, shift) {
            return Err(Error::NotPsd(format!(
                "Cholesky failed even with shift {shift:e}"
            )));
        }
        Ok(Self { grid, data })
    }

    /// Trusted constructor for matrices that are PSD by construction
    /// (analytic kernels, Schur complements, sample covariances).
    pub(crate) fn from_raw(grid: Grid, data: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len() * grid.len(), data.len());
        Self { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[matrix::at(self.dim(), i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.dim();
        &self.data[i * m..(i + 1) * m]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        let m = self.dim();
        (0..m).map(|i| self.data[matrix::at(m, i, i)]).collect()
    }

    /// Largest diagonal entry and its index, smallest index on ties.
    pub fn max_diag(&self) -> (f64, usize) {
        matrix::max_diag(self.dim(), &self.data)
    }

    pub fn max_abs_entry(&self) -> f64 {
        matrix::max_abs(&self.data)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        (0..m).map(|i| self.row(i).to_vec()).collect()
    }

    fn check_support(&self, f: &DualFunctional) -> Result<()> {
        if let Some(max) = f.max_index() {
            if max >= self.dim() {
                return Err(Error::SupportMismatch {
                    index: max,
                    size: self.dim(),
                });
            }
        }
        Ok(())
    }

    /// Quadratic form `fᵀ R f`, the variance of the functional.
    pub fn quadratic_form(&self, f: &DualFunctional) -> Result<f64> {
        self.check_support(f)?;
        let m = self.dim();
        let mut acc = 0.0;
        for (&i, &ci) in f.iter() {
            let mut row_acc = 0.0;
            for (&j, &cj) in f.iter() {
                row_acc += self.data[matrix::at(m, i, j)] * cj;
            }
            acc += ci * row_acc;
        }
        Ok(acc)
    }

    /// Applies the covariance to a functional: `(R f)[i] = Σ_j R[i][j] f_j`.
    pub fn apply_dual(&self, f: &DualFunctional) -> Result<Vec<f64>> {
        self.check_support(f)?;
        let m = self.dim();
        let mut out = vec![0.0; m];
        for (&j, &cj) in f.iter() {
            if cj == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.data[matrix::at(m, i, j)] * cj;
            }
        }
        Ok(out)
    }

    /// Characteristic functional `exp(-fᵀ R f / 2)`; always in `(0, 1]`.
    pub fn characteristic_functional(&self, f: &DualFunctional) -> Result<f64> {
        Ok((-0.5 * self.quadratic_form(f)?).exp())
    }
}

/// Finitely supported signed combination of point masses on the grid,
/// stored as `grid index -> weight`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualFunctional {
    coefficients: BTreeMap<usize, f64>,
}

impl DualFunctional {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The point mass `δ` at a grid index.
    pub fn dirac(index: usize) -> Self {
        let mut coefficients = BTreeMap::new();
        coefficients.insert(index, 1.0);
        Self { coefficients }
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut f = Self::zero();
        for (i, w) in entries {
            f.add(i, w);
        }
        f
    }

    /// Adds `w` to the weight at `index`, dropping entries that cancel to zero.
    pub fn add(&mut self, index: usize, w: f64) {
        let v = self.coefficients.entry(index).or_insert(0.0);
        *v += w;
        if *v == 0.0 {
            self.coefficients.remove(&index);
        }
    }

    /// `self += coef * other`.
    pub fn add_scaled(&mut self, other: &DualFunctional, coef: f64) {
        for (&i, &w) in other.iter() {
            self.add(i, coef * w);
        }
    }

    pub fn scale(&mut self, coef: f64) {
        for v in self.coefficients.values_mut() {
            *v *= coef;
        }
        self.coefficients.retain(|_, v| *v != 0.0);
    }

    pub fn coeff(&self, index: usize) -> f64 {
        self.coefficients.get(&index).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&usize, &f64)> {
        self.coefficients.iter()
    }

    pub fn support_len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.coefficients.keys().next_back().copied()
    }

    /// Total-variation norm of the coefficients: the dual (X*) norm.
    pub fn l1_norm(&self) -> f64 {
        self.coefficients.values().map(|v| v.abs()).sum()
    }

    /// Duality pairing `⟨x, f⟩ = Σ f_i x[t_i]` against a grid vector.
    pub fn pair(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().map(|(&i, &w)| w * x[i]).sum()
    }
}
