//! Greedy maximum-variance decomposition of Gaussian measures discretized
//! onto sup-norm grids.
//!
//! The covariance of a centered Gaussian vector over grid points in `[0, 1]`
//! is split one rank at a time: each step takes the dual functional of unit
//! total-variation norm maximizing the variance form — on a grid, the
//! largest residual diagonal entry — and subtracts the corresponding
//! rank-one component. The scheme is algebraically a diagonally pivoted
//! Cholesky factorization, but carries the measure-level structure with it:
//! biorthogonal dual vectors whose evaluations are independent Gaussians
//! ([`dual_basis`]), truncated Karhunen–Loève samplers ([`sampling`]),
//! conditional measures and deconditioning checks ([`conditioning`]), the
//! exact sup-norm truncation-error identity (error after `n + 1` terms
//! equals `λ_{n+1}`), and an analytic Brownian-motion reference where the
//! construction reproduces the Lévy–Ciesielski expansion ([`wiener`]).
//!
//! [`spectral`] runs the classical L²-weighted eigendecomposition on the
//! same matrices for contrast; the two live in different geometries and are
//! reported side by side, never mixed.
//!
//! Built with the `parallel` feature (default), the sampling and matrix
//! inner loops run on rayon; without it they run sequentially. Work is
//! split at fixed chunk boundaries, so both builds produce bit-identical
//! results.
//!
//! ```
//! use banach_kl::{decompose, sample_paths, Grid, KernelSpec};
//!
//! let grid = Grid::dyadic(6)?;
//! let cov = KernelSpec::BrownianMotion.discretize(&grid)?;
//! let dec = decompose(&cov, 32, 0.0);
//! assert_eq!(dec.steps[0].lambda, 1.0); // Var(W_1)
//! assert_eq!(dec.truncation_error(0)?, 0.25); // equals the next value
//! let batch = sample_paths(&dec, 32, 1_000, 42)?; // reproducible per seed
//! assert_eq!(batch.n_samples, 1_000);
//! # Ok::<(), banach_kl::Error>(())
//! ```

pub mod conditioning;
pub mod cov;
pub mod dual_basis;
pub mod error;
mod exec;
pub mod formats;
pub mod greedy;
pub mod grid;
pub mod kernel;
mod matrix;
pub mod sampling;
pub mod spectral;
pub mod wiener;

pub use conditioning::{
    conditional_measure, decondition_mc, event_probability_exact, normal_cdf, sample_conditional,
    ConditionalMeasure, DeconditionReport, ThresholdEvent,
};
pub use cov::{DualFunctional, GridCovariance};
pub use dual_basis::{
    cm_inner, dual_vectors, h_star, project, project_recursive, verify_biorthogonality,
    BiorthReport, ProjectionResult,
};
pub use error::{Error, Result};
pub use exec::configure_thread_cap;
pub use greedy::{
    decompose, rayleigh_max, split_step, Decomposition, DecompositionStep, Termination,
};
pub use grid::{Grid, GridSpec};
pub use kernel::KernelSpec;
pub use sampling::{
    convolution_check, empirical_covariance, mc_cov_tol, sample_paths, ConvolutionReport,
    SampleBatch,
};
pub use spectral::{
    compare_decompositions, spectral_decompose, trapezoid_weights, CompareReport, CompareRow,
    SpectralDecomposition,
};
