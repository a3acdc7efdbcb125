//! Conditional measures given pinned dual coordinates, and the Monte Carlo
//! deconditioning check.
//!
//! Pinning `x*_0 = t_0, ..., x*_n = t_n` shifts the mean to `Σ t_k x_k` and
//! replaces the covariance by the residual after step `n` — the covariance
//! does not depend on the pinned values. Deconditioning goes the other way:
//! integrating the conditional probability of an event against the product
//! Gaussian law of the pinned coordinates must recover the unconditional
//! probability, which is checked here with two independent estimators.

use rand::RngExt;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cov::GridCovariance;
use crate::error::{Error, Result};
use crate::exec;
use crate::greedy::Decomposition;
use crate::sampling::{self, domain, SampleBatch, SAMPLE_CHUNK};

/// Gaussian measure conditioned on the leading dual coordinates.
#[derive(Debug, Clone)]
pub struct ConditionalMeasure {
    /// `Σ t_k x_k`; lies in the span of the pinned directions.
    pub mean: Vec<f64>,
    /// Residual covariance after the pinned steps; independent of the values.
    pub covariance: GridCovariance,
    /// `(step index, pinned value)` pairs.
    pub pinned: Vec<(usize, f64)>,
}

/// Conditions on `x*_k = values[k]` for `k < values.len()`.
/// An empty list returns the original measure.
pub fn conditional_measure(dec: &Decomposition, values: &[f64]) -> Result<ConditionalMeasure> {
    if values.len() > dec.len() {
        return Err(Error::OutOfRange {
            requested: values.len(),
            available: dec.len(),
        });
    }
    let m = dec.grid().len();
    let mut mean = vec![0.0; m];
    for (step, &t) in dec.steps.iter().zip(values.iter()) {
        for (mu, &xi) in mean.iter_mut().zip(step.x.iter()) {
            *mu += t * xi;
        }
    }
    Ok(ConditionalMeasure {
        mean,
        covariance: dec.residual_after_steps(values.len())?,
        pinned: values.iter().copied().enumerate().collect(),
    })
}

/// Draws paths from the conditional measure: `mean + B z` with `B Bᵀ` the
/// residual covariance. Deterministic under the chunked scheme of
/// [`crate::sampling`].
pub fn sample_conditional(
    dec: &Decomposition,
    values: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if n_samples == 0 {
        return Err(Error::DegenerateBatch { need: 1, got: 0 });
    }
    let cm = conditional_measure(dec, values)?;
    let m = dec.grid().len();
    let b = sampling::psd_factor(&cm.covariance, dec.lambda0())?;
    let mut paths = vec![0.0; n_samples * m];
    for row in paths.chunks_mut(m) {
        row.copy_from_slice(&cm.mean);
    }
    sampling::add_factor_noise(&mut paths, m, &b, seed, domain::CONDITIONAL);
    Ok(SampleBatch {
        grid: dec.grid().clone(),
        paths,
        n_samples,
        n_terms: values.len(),
        seed,
    })
}

/// Single-coordinate threshold event: `path(t) <= level` or `path(t) > level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEvent {
    pub grid_index: usize,
    pub level: f64,
    /// `false` tests `<= level`, `true` tests `> level`.
    pub above: bool,
}

impl ThresholdEvent {
    pub fn hit(&self, value: f64) -> bool {
        if self.above {
            value > self.level
        } else {
            value <= self.level
        }
    }
}

/// Standard normal CDF via the Abramowitz–Stegun 7.1.26 rational
/// approximation of erf; absolute error below 1.5e-7, far inside any Monte
/// Carlo tolerance used here.
pub fn normal_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    0.5 * (1.0 + erf(z))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736
                + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Exact probability of a threshold event under a centered Gaussian with the
/// given covariance, read off the marginal variance. Degenerate marginals
/// give a 0/1 indicator.
pub fn event_probability_exact(cov: &GridCovariance, event: &ThresholdEvent) -> Result<f64> {
    if event.grid_index >= cov.dim() {
        return Err(Error::OutOfRange {
            requested: event.grid_index,
            available: cov.dim(),
        });
    }
    let var = cov.entry(event.grid_index, event.grid_index).max(0.0);
    let p_le = if var == 0.0 {
        if 0.0 <= event.level {
            1.0
        } else {
            0.0
        }
    } else {
        normal_cdf(event.level / var.sqrt())
    };
    Ok(if event.above { 1.0 - p_le } else { p_le })
}

/// Two estimates of the same event probability with their standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct DeconditionReport {
    pub event: ThresholdEvent,
    pub pinned_count: usize,
    pub n_samples: usize,
    /// Direct sampling of the full measure.
    pub direct_estimate: f64,
    pub direct_se: f64,
    /// Pinned values drawn from their product Gaussian law, then the
    /// conditional measure sampled.
    pub conditional_estimate: f64,
    pub conditional_se: f64,
    /// |difference| in combined standard errors.
    pub z_score: f64,
    pub passed: bool,
}

/// Agreement threshold for the two estimators, in combined standard errors.
pub const DECONDITION_Z_MAX: f64 = 3.0;

/// Estimates `P(event)` two ways and checks agreement within
/// [`DECONDITION_Z_MAX`] combined standard errors.
///
/// The direct route samples the full measure (all recorded components plus
/// the terminal residual). The deconditioning route draws the pinned
/// coordinates `t_k ~ N(0, λ_k)` for `k <= n`, then samples the conditional
/// measure around `Σ t_k x_k`.
pub fn decondition_mc(
    dec: &Decomposition,
    n: usize,
    event: &ThresholdEvent,
    n_samples: usize,
    seed: u64,
) -> Result<DeconditionReport> {
    if n >= dec.len() {
        return Err(Error::OutOfRange {
            requested: n,
            available: dec.len(),
        });
    }
    let m = dec.grid().len();
    if event.grid_index >= m {
        return Err(Error::OutOfRange {
            requested: event.grid_index,
            available: m,
        });
    }
    if n_samples == 0 {
        return Err(Error::DegenerateBatch { need: 1, got: 0 });
    }
    let idx = event.grid_index;
    let lambda0 = dec.lambda0();

    // Only the event coordinate matters; precompute its loadings.
    let full_coefs: Vec<f64> = dec
        .steps
        .iter()
        .map(|s| s.lambda.sqrt() * s.x[idx])
        .collect();
    let terminal_factor = sampling::psd_factor(&dec.residual, lambda0)?;
    let terminal_row: Vec<f64> = (0..m).map(|k| terminal_factor[idx * m + k]).collect();

    let pinned_coefs = &full_coefs[..=n];
    let residual_n = dec.residual_after_steps(n + 1)?;
    let cond_factor = sampling::psd_factor(&residual_n, lambda0)?;
    let cond_row: Vec<f64> = (0..m).map(|k| cond_factor[idx * m + k]).collect();

    let direct_hits = count_hits(n_samples, seed, domain::DECONDITION_DIRECT, |rng| {
        let mut v = 0.0;
        for &c in &full_coefs {
            let xi: f64 = rng.sample(StandardNormal);
            v += c * xi;
        }
        for &b in &terminal_row {
            let z: f64 = rng.sample(StandardNormal);
            v += b * z;
        }
        event.hit(v)
    });
    let conditional_hits = count_hits(n_samples, seed, domain::DECONDITION_CONDITIONAL, |rng| {
        let mut v = 0.0;
        for &c in pinned_coefs {
            let xi: f64 = rng.sample(StandardNormal);
            v += c * xi; // t_k x_k[idx] with t_k ~ N(0, λ_k)
        }
        for &b in &cond_row {
            let z: f64 = rng.sample(StandardNormal);
            v += b * z;
        }
        event.hit(v)
    });

    let nf = n_samples as f64;
    let direct_estimate = direct_hits as f64 / nf;
    let conditional_estimate = conditional_hits as f64 / nf;
    let direct_se = (direct_estimate * (1.0 - direct_estimate) / nf).sqrt();
    let conditional_se = (conditional_estimate * (1.0 - conditional_estimate) / nf).sqrt();
    let denom = (direct_se * direct_se + conditional_se * conditional_se).sqrt();
    let z_score = if denom == 0.0 {
        if direct_estimate == conditional_estimate {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (direct_estimate - conditional_estimate).abs() / denom
    };
    Ok(DeconditionReport {
        event: *event,
        pinned_count: n + 1,
        n_samples,
        direct_estimate,
        direct_se,
        conditional_estimate,
        conditional_se,
        z_score,
        passed: z_score <= DECONDITION_Z_MAX,
    })
}

fn count_hits(
    n_samples: usize,
    seed: u64,
    dom: u64,
    per_sample: impl Fn(&mut rand_chacha::ChaCha8Rng) -> bool + Sync + Send,
) -> usize {
    let n_chunks = n_samples.div_ceil(SAMPLE_CHUNK);
    let counts = exec::map_chunks(n_chunks, |c| {
        let mut rng = sampling::chunk_rng(seed, dom, c as u64);
        let in_chunk = SAMPLE_CHUNK.min(n_samples - c * SAMPLE_CHUNK);
        let mut hits = 0usize;
        for _ in 0..in_chunk {
            if per_sample(&mut rng) {
                hits += 1;
            }
        }
        hits
    });
    counts.into_iter().sum()
}
