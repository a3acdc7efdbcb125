//! Covariance kernels on `[0, 1]` and their discretization onto grids.

use serde::{Deserialize, Serialize};

use crate::cov::GridCovariance;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Kernel description, also the JSON wire format
/// (`{"kind":"brownian_motion"}`, `{"kind":"brownian_bridge"}`,
/// `{"kind":"user_matrix","matrix":[[...]]}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `K(s, t) = min(s, t)`: covariance of standard Brownian motion.
    BrownianMotion,
    /// `K(s, t) = min(s, t) - s t`: covariance of the Brownian bridge.
    BrownianBridge,
    /// Explicit symmetric PSD matrix; `s`, `t` act as row/column indices.
    UserMatrix { matrix: Vec<Vec<f64>> },
}

impl KernelSpec {
    /// Kernel value `K(s, t)`. For the analytic kinds `s, t` are times in
    /// `[0, 1]`; for `UserMatrix` they are integer-valued indices.
    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        match self {
            KernelSpec::BrownianMotion => {
                check_unit_interval(s)?;
                check_unit_interval(t)?;
                Ok(s.min(t))
            }
            KernelSpec::BrownianBridge => {
                check_unit_interval(s)?;
                check_unit_interval(t)?;
                Ok(s.min(t) - s * t)
            }
            KernelSpec::UserMatrix { matrix } => {
                let i = check_index(s, matrix.len())?;
                let j = check_index(t, matrix.len())?;
                Ok(matrix[i][j])
            }
        }
    }

    /// Fills the covariance matrix `R[i][j] = K(t_i, t_j)` over the grid.
    ///
    /// Analytic kernels produce bit-symmetric matrices directly; user
    /// matrices must match the grid size and pass symmetry/PSD validation.
    pub fn discretize(&self, grid: &Grid) -> Result<GridCovariance> {
        match self {
            KernelSpec::UserMatrix { matrix } => GridCovariance::new(grid.clone(), matrix),
            _ => {
                let m = grid.len();
                let pts = grid.points();
                let mut data = vec![0.0; m * m];
                for i in 0..m {
                    for j in 0..m {
                        // min and s*t are both symmetric at bit level.
                        data[i * m + j] = self.eval(pts[i], pts[j])?;
                    }
                }
                Ok(GridCovariance::from_raw(grid.clone(), data))
            }
        }
    }
}

fn check_unit_interval(t: f64) -> Result<()> {
    if !t.is_finite() || !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("{t} not in [0, 1]")));
    }
    Ok(())
}

fn check_index(s: f64, size: usize) -> Result<usize> {
    if !s.is_finite() || s.fract() != 0.0 || s < 0.0 {
        return Err(Error::Domain(format!("{s} is not a matrix index")));
    }
    let i = s as usize;
    if i >= size {
        return Err(Error::Domain(format!("index {i} out of range 0..{size}")));
    }
    Ok(i)
}
