//! Versioned JSON representations of the persisted artifacts.
//!
//! The decomposition file stores the ordered steps (value, pivot, dense
//! direction, sparse dual vector) with the source grid echoed and the
//! terminal residual optionally attached. serde_json prints floats in
//! shortest round-trip form, so a file written and re-read drives sampling
//! and conditioning to bit-identical outputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cov::{DualFunctional, GridCovariance};
use crate::error::{Error, Result};
use crate::greedy::{Decomposition, DecompositionStep, Termination};
use crate::grid::Grid;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub lambda: f64,
    pub pivot_index: usize,
    pub pivot_t: f64,
    pub x: Vec<f64>,
    /// Sparse map `grid index -> weight`.
    pub x_star: BTreeMap<usize, f64>,
    pub residual_max_entry: f64,
}

/// On-disk form of a [`Decomposition`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionFile {
    pub format_version: u32,
    /// Source grid points, echoed.
    pub grid: Vec<f64>,
    pub termination: Termination,
    pub steps: Vec<StepRecord>,
    /// Terminal residual matrix; omitted when the writer was asked not to
    /// store it, in which case conditioning-style uses are unavailable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<Vec<Vec<f64>>>,
}

impl DecompositionFile {
    pub fn from_decomposition(dec: &Decomposition, include_residual: bool) -> Self {
        let grid = dec.grid();
        Self {
            format_version: FORMAT_VERSION,
            grid: grid.points().to_vec(),
            termination: dec.termination,
            steps: dec
                .steps
                .iter()
                .map(|s| StepRecord {
                    lambda: s.lambda,
                    pivot_index: s.pivot_index,
                    pivot_t: grid.point(s.pivot_index),
                    x: s.x.clone(),
                    x_star: s.x_star.iter().map(|(&i, &w)| (i, w)).collect(),
                    residual_max_entry: s.residual_max_entry,
                })
                .collect(),
            residual: include_residual.then(|| dec.residual.to_rows()),
        }
    }

    pub fn has_residual(&self) -> bool {
        self.residual.is_some()
    }

    /// Rebuilds the in-memory decomposition.
    ///
    /// With the residual present, the source is reconstructed as
    /// `Σ λ_k x_k x_kᵀ + residual`. Without it, the file describes only the
    /// truncated measure: sampling works, but operations needing the
    /// residual must not be driven from such a file.
    pub fn into_decomposition(self) -> Result<Decomposition> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::InvalidDecomposition(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let grid = Grid::new(self.grid)?;
        let m = grid.len();
        let steps: Vec<DecompositionStep> = self
            .steps
            .into_iter()
            .enumerate()
            .map(|(n, r)| {
                if r.pivot_index >= m || grid.point(r.pivot_index) != r.pivot_t {
                    return Err(Error::InvalidDecomposition(format!(
                        "step {n}: pivot_t {} does not match grid point at index {}",
                        r.pivot_t, r.pivot_index
                    )));
                }
                Ok(DecompositionStep {
                    lambda: r.lambda,
                    pivot_index: r.pivot_index,
                    pivot_sign: 1,
                    x: r.x,
                    x_star: DualFunctional::from_entries(r.x_star),
                    residual_max_entry: r.residual_max_entry,
                })
            })
            .collect::<Result<_>>()?;

        let residual = match self.residual {
            Some(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::InvalidDecomposition(
                        "residual matrix does not match the grid size".into(),
                    ));
                }
                let mut data = Vec::with_capacity(m * m);
                for row in &rows {
                    data.extend_from_slice(row);
                }
                GridCovariance::from_raw(grid.clone(), data)
            }
            None => GridCovariance::from_raw(grid.clone(), vec![0.0; m * m]),
        };

        // Canonical source reconstruction: terminal residual plus all
        // components in descending step order, matching residual_after_steps(0).
        let shell = Decomposition::from_parts(
            GridCovariance::from_raw(grid.clone(), vec![0.0; m * m]),
            steps,
            residual,
            self.termination,
        )?;
        let source = shell.residual_after_steps(0)?;
        Decomposition::from_parts(source, shell.steps, shell.residual, shell.termination)
    }
}

/// On-disk form of a conditional measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalMeasureFile {
    pub format_version: u32,
    pub grid: Vec<f64>,
    pub pinned: Vec<(usize, f64)>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

/// Summary emitted next to a sampled batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSummary {
    pub format_version: u32,
    pub n_terms: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// Max-entry distance between the empirical covariance of the batch and
    /// the covariance of the truncated measure it was drawn from.
    pub max_cov_error: f64,
}
