//! Analytic reference for the Brownian-motion decomposition on `[0, 1]`:
//! exact variances, pivot locations, Schauder hat functions, and Haar step
//! derivatives. On dyadic grids the greedy engine must reproduce these
//! values exactly, which is what [`oracle_check`] verifies.
//!
//! Indices `n >= 1` decompose as `n = 2^p + k` with `0 <= k < 2^p`; step `n`
//! lives on the interval `[k/2^p, (k+1)/2^p]` with its peak at the midpoint
//! `(2k+1)/2^{p+1}`. Step 0 is special: variance 1, pivot at `t = 1`,
//! direction `x_0(t) = t`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::greedy::Decomposition;

/// Dyadic index `n = 2^p + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevyIndex {
    pub n: usize,
    /// `(p, k)` for `n >= 1`; `None` for the special index 0.
    pub split: Option<(u32, usize)>,
}

impl LevyIndex {
    pub fn new(n: usize) -> Self {
        if n == 0 {
            return Self { n, split: None };
        }
        let p = usize::BITS - 1 - n.leading_zeros();
        let k = n - (1usize << p);
        Self {
            n,
            split: Some((p, k)),
        }
    }

    /// Inverse of the decomposition; always returns `n`.
    pub fn reassemble(&self) -> usize {
        match self.split {
            None => 0,
            Some((p, k)) => (1usize << p) + k,
        }
    }
}

/// Exact variance of step `n`: 1 for `n = 0`, else `2^-(p+2)`.
pub fn levy_lambda(n: usize) -> f64 {
    match LevyIndex::new(n).split {
        None => 1.0,
        Some((p, _)) => 1.0 / (1u64 << (p + 2)) as f64,
    }
}

/// Schauder direction `x_n(t)`: the identity for `n = 0`, else the unit hat
/// over `[k/2^p, (k+1)/2^p]`.
pub fn schauder_x(n: usize, t: f64) -> Result<f64> {
    if !t.is_finite() || !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("{t} not in [0, 1]")));
    }
    match LevyIndex::new(n).split {
        None => Ok(t),
        Some((p, k)) => {
            let peak = (2 * k + 1) as f64 / (1u64 << (p + 1)) as f64;
            let slope = (1u64 << (p + 1)) as f64;
            Ok((1.0 - (t - peak).abs() * slope).max(0.0))
        }
    }
}

/// Haar derivative `h'_n(s)`: `+sqrt(2^p)` on the rising half of the hat,
/// `-sqrt(2^p)` on the falling half, 0 outside. For `n = 0` the direction is
/// `h_0(t) = t`, whose derivative is identically 1; that value is returned
/// rather than an error.
pub fn haar_h_prime(n: usize, s: f64) -> Result<f64> {
    if !s.is_finite() || !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("{s} not in [0, 1]")));
    }
    match LevyIndex::new(n).split {
        None => Ok(1.0),
        Some((p, k)) => {
            let denom = (1u64 << (p + 1)) as f64;
            let lo = (2 * k) as f64 / denom;
            let mid = (2 * k + 1) as f64 / denom;
            let hi = (2 * k + 2) as f64 / denom;
            let height = ((1u64 << p) as f64).sqrt();
            if (lo..=mid).contains(&s) {
                Ok(height)
            } else if s > mid && s <= hi {
                Ok(-height)
            } else {
                Ok(0.0)
            }
        }
    }
}

/// Pivot location of step `n` under the leftmost tie-break: `t_0 = 1`, then
/// the hat peaks `(2k+1)/2^{p+1}` taken left to right within each level.
pub fn expected_pivot(n: usize) -> f64 {
    match LevyIndex::new(n).split {
        None => 1.0,
        Some((p, k)) => (2 * k + 1) as f64 / (1u64 << (p + 1)) as f64,
    }
}

/// Engine-versus-oracle deviations on a dyadic grid.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub level: u32,
    pub steps_checked: usize,
    /// Max relative error of the variances against `levy_lambda`.
    pub max_lambda_error: f64,
    /// Max absolute offset between engine pivot locations and the hat peaks.
    pub max_pivot_mismatch: f64,
    /// Max absolute deviation of the directions from the Schauder values.
    pub max_x_error: f64,
    pub passed: bool,
}

/// Thresholds for [`OracleReport::passed`].
pub const ORACLE_LAMBDA_RTOL: f64 = 1e-12;
pub const ORACLE_X_ATOL: f64 = 1e-10;

/// Compares a decomposition of the Brownian-motion kernel on a dyadic grid
/// of level `J` against the analytic values, for every recorded step.
///
/// A level-`J` grid resolves hat peaks only up to step `2^J - 1`; a
/// decomposition carrying more steps is refused rather than partially
/// checked.
pub fn oracle_check(dec: &Decomposition) -> Result<OracleReport> {
    let level = dec
        .grid()
        .dyadic_level()
        .ok_or_else(|| Error::NotDyadic("oracle comparison needs points i/2^J".into()))?;
    let max_steps = 1usize << level;
    if dec.len() > max_steps {
        return Err(Error::OutOfRange {
            requested: dec.len(),
            available: max_steps,
        });
    }
    let pts = dec.grid().points();
    let mut max_lambda_error = 0.0f64;
    let mut max_pivot_mismatch = 0.0f64;
    let mut max_x_error = 0.0f64;
    for (n, step) in dec.steps.iter().enumerate() {
        let lam = levy_lambda(n);
        max_lambda_error = max_lambda_error.max((step.lambda - lam).abs() / lam);
        let t_engine = pts[step.pivot_index];
        max_pivot_mismatch = max_pivot_mismatch.max((t_engine - expected_pivot(n)).abs());
        for (i, &t) in pts.iter().enumerate() {
            let want = schauder_x(n, t)?;
            max_x_error = max_x_error.max((step.x[i] - want).abs());
        }
    }
    let passed = max_lambda_error <= ORACLE_LAMBDA_RTOL
        && max_pivot_mismatch == 0.0
        && max_x_error <= ORACLE_X_ATOL;
    Ok(OracleReport {
        level,
        steps_checked: dec.len(),
        max_lambda_error,
        max_pivot_mismatch,
        max_x_error,
        passed,
    })
}
