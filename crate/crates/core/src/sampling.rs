//! Path sampling from the truncated expansion, empirical covariances, and
//! the convolution-factorization check.
//!
//! Randomness is reproducible by construction: every batch is generated in
//! fixed chunks of [`SAMPLE_CHUNK`] paths, and chunk `c` of a run draws from
//! a ChaCha8 stream keyed by SplitMix64 over `(seed, domain, c)` (see
//! [`RNG_SCHEME`]). Chunks are independent, so parallel and sequential
//! builds — and any thread count — produce bit-identical batches. Ports to
//! other languages can reproduce results only statistically, which is why
//! every statistical contract here is stated with Monte Carlo tolerances
//! rather than fixed sample values.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cov::GridCovariance;
use crate::error::{Error, Result};
use crate::exec;
use crate::greedy::Decomposition;
use crate::grid::Grid;
use crate::matrix;

/// Paths per generator chunk; fixed so results do not depend on thread count.
pub const SAMPLE_CHUNK: usize = 512;

/// The reproducible generator contract.
pub const RNG_SCHEME: &str =
    "chacha8 keyed by splitmix64(seed, domain, chunk); standard normals via ziggurat";

/// Stream domains keep draws of different operations independent even under
/// a shared user seed.
pub(crate) mod domain {
    pub const KL: u64 = 1;
    pub const RESIDUAL: u64 = 2;
    pub const CONDITIONAL: u64 = 3;
    pub const DECONDITION_DIRECT: u64 = 4;
    pub const DECONDITION_CONDITIONAL: u64 = 5;
    pub const FIGURE: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub(crate) fn chunk_rng(seed: u64, domain: u64, chunk: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ domain) ^ chunk);
    ChaCha8Rng::seed_from_u64(key)
}

/// One standard-normal draw per component from a dedicated stream; used by
/// front ends rendering per-step contributions `sqrt(λ_n) ξ_n x_n`.
pub fn component_draws(n_components: usize, seed: u64) -> Vec<f64> {
    let mut rng = chunk_rng(seed, domain::FIGURE, 0);
    (0..n_components)
        .map(|_| rng.sample(StandardNormal))
        .collect()
}

/// A batch of sampled paths, one row per path, columns along the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub grid: Grid,
    /// Row-major `n_samples x m`.
    pub paths: Vec<f64>,
    pub n_samples: usize,
    pub n_terms: usize,
    pub seed: u64,
}

impl SampleBatch {
    pub fn path(&self, i: usize) -> &[f64] {
        let m = self.grid.len();
        &self.paths[i * m..(i + 1) * m]
    }
}

/// Draws `path = Σ_{k < n_terms} sqrt(λ_k) ξ_k x_k` with independent
/// standard normal `ξ_k` per path. Deterministic in `(seed, n_terms,
/// n_samples)`; `n_terms = 0` yields identically zero paths.
pub fn sample_paths(
    dec: &Decomposition,
    n_terms: usize,
    n_samples: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if n_terms > dec.len() {
        return Err(Error::OutOfRange {
            requested: n_terms,
            available: dec.len(),
        });
    }
    if n_samples == 0 {
        return Err(Error::DegenerateBatch { need: 1, got: 0 });
    }
    let m = dec.grid().len();
    let scaled: Vec<Vec<f64>> = dec.steps[..n_terms].iter().map(|s| s.h()).collect();
    let mut paths = vec![0.0; n_samples * m];
    exec::for_chunks(&mut paths, SAMPLE_CHUNK * m, |c, block| {
        let mut rng = chunk_rng(seed, domain::KL, c as u64);
        for row in block.chunks_mut(m) {
            for h in &scaled {
                let xi: f64 = rng.sample(StandardNormal);
                for (r, &hv) in row.iter_mut().zip(h.iter()) {
                    *r += xi * hv;
                }
            }
        }
    });
    Ok(SampleBatch {
        grid: dec.grid().clone(),
        paths,
        n_samples,
        n_terms,
        seed,
    })
}

/// Unbiased sample covariance of a batch (normalized by `n - 1`).
pub fn empirical_covariance(batch: &SampleBatch) -> Result<GridCovariance> {
    let n = batch.n_samples;
    if n < 2 {
        return Err(Error::DegenerateBatch { need: 2, got: n });
    }
    let m = batch.grid.len();
    let mut mean = vec![0.0; m];
    for row in batch.paths.chunks(m) {
        for (mu, &v) in mean.iter_mut().zip(row.iter()) {
            *mu += v;
        }
    }
    for mu in &mut mean {
        *mu /= n as f64;
    }
    // Per-sample rank-one accumulation: the centered row stays in cache and
    // each chunk owns a private accumulator. Chunk boundaries and the final
    // reduction order are fixed, so the result is thread-count independent.
    let n_chunks = n.div_ceil(SAMPLE_CHUNK);
    let partials = exec::map_chunks(n_chunks, |c| {
        let start = c * SAMPLE_CHUNK;
        let end = n.min(start + SAMPLE_CHUNK);
        let mut acc = vec![0.0; m * m];
        let mut centered = vec![0.0; m];
        for s in start..end {
            let row = &batch.paths[s * m..(s + 1) * m];
            for (cv, (v, mu)) in centered.iter_mut().zip(row.iter().zip(mean.iter())) {
                *cv = v - mu;
            }
            for i in 0..m {
                let ci = centered[i];
                if ci == 0.0 {
                    continue;
                }
                let dst = &mut acc[i * m..(i + 1) * m];
                for j in i..m {
                    dst[j] += ci * centered[j];
                }
            }
        }
        acc
    });
    let mut cov = vec![0.0; m * m];
    for partial in partials {
        for (c, p) in cov.iter_mut().zip(partial.iter()) {
            *c += p;
        }
    }
    let norm = (n - 1) as f64;
    for v in cov.iter_mut() {
        *v /= norm;
    }
    for i in 1..m {
        for j in 0..i {
            cov[i * m + j] = cov[j * m + i];
        }
    }
    Ok(GridCovariance::from_raw(batch.grid.clone(), cov))
}

/// Symmetric factor `B` with `B Bᵀ = cov`, from the eigensystem with small
/// negative eigenvalues clamped to zero. Eigenvalues below
/// `-1e-10 * scale` are a hard error: the matrix is not a rounding
/// perturbation of a PSD one.
pub(crate) fn psd_factor(cov: &GridCovariance, scale: f64) -> Result<Vec<f64>> {
    let m = cov.dim();
    let (vals, vecs) = matrix::jacobi_eigen(m, cov.data());
    let floor = -1e-10 * scale.max(f64::MIN_POSITIVE);
    let mut b = vec![0.0; m * m];
    for (k, (&lam, v)) in vals.iter().zip(vecs.iter()).enumerate() {
        if lam < floor {
            return Err(Error::NotPsd(format!(
                "eigenvalue {lam:e} below clamp floor {floor:e}"
            )));
        }
        let s = lam.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        for i in 0..m {
            b[i * m + k] = s * v[i];
        }
    }
    Ok(b)
}

/// Adds `B z` with `z` standard normal into each path of a buffer, chunked
/// on the same deterministic scheme.
pub(crate) fn add_factor_noise(paths: &mut [f64], m: usize, b: &[f64], seed: u64, dom: u64) {
    exec::for_chunks(paths, SAMPLE_CHUNK * m, |c, block| {
        let mut rng = chunk_rng(seed, dom, c as u64);
        let mut z = vec![0.0; m];
        for row in block.chunks_mut(m) {
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            for (i, r) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &zk) in z.iter().enumerate() {
                    acc += b[i * m + k] * zk;
                }
                *r += acc;
            }
        }
    });
}

/// Outcome of the two convolution-factorization checks after step `n`.
#[derive(Debug, Clone)]
pub struct ConvolutionReport {
    pub n: usize,
    pub n_samples: usize,
    /// Max-entry error of `source - (Σ_{k<=n} λ_k x_k x_kᵀ + residual_n)`.
    pub additivity_error: f64,
    pub additivity_tol: f64,
    /// Max-entry distance between the empirical covariance of
    /// `truncated sample + independent residual sample` and the source.
    pub mc_error: f64,
    pub mc_tol: f64,
    pub passed: bool,
}

/// Monte Carlo tolerance for covariance entries: five sigma-scale units of
/// `λ_0 / sqrt(n)`, a conservative three-sigma bound for Gaussian fourth
/// moments.
pub fn mc_cov_tol(lambda0: f64, n_samples: usize) -> f64 {
    5.0 * lambda0 / (n_samples as f64).sqrt()
}

/// Verifies the split `γ = (truncation after n) * (residual)` two ways:
/// exact matrix additivity, and agreement of the empirical covariance of
/// summed independent samples with the source.
pub fn convolution_check(
    dec: &Decomposition,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ConvolutionReport> {
    if n >= dec.len() {
        return Err(Error::OutOfRange {
            requested: n,
            available: dec.len(),
        });
    }
    if n_samples < 2 {
        return Err(Error::DegenerateBatch {
            need: 2,
            got: n_samples,
        });
    }
    let m = dec.source.dim();
    let lambda0 = dec.lambda0();
    let residual_n = dec.residual_after_steps(n + 1)?;

    let partial = dec.partial_covariance(n + 1)?;
    let mut additivity_error = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let diff = dec.source.entry(i, j) - (partial.entry(i, j) + residual_n.entry(i, j));
            additivity_error = additivity_error.max(diff.abs());
        }
    }
    let additivity_tol = 1e-9 * lambda0;

    let mut batch = sample_paths(dec, n + 1, n_samples, seed)?;
    let b = psd_factor(&residual_n, lambda0)?;
    add_factor_noise(&mut batch.paths, m, &b, seed, domain::RESIDUAL);
    let emp = empirical_covariance(&batch)?;
    let mut mc_error = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            mc_error = mc_error.max((emp.entry(i, j) - dec.source.entry(i, j)).abs());
        }
    }
    let mc_tol = mc_cov_tol(lambda0, n_samples);

    Ok(ConvolutionReport {
        n,
        n_samples,
        additivity_error,
        additivity_tol,
        mc_error,
        mc_tol,
        passed: additivity_error <= additivity_tol && mc_error <= mc_tol,
    })
}
