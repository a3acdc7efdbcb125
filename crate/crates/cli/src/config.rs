//! Argument parsing, validated run configuration, and the exit-code
//! taxonomy (0 ok, 2 config, 3 invariant violation, 4 check failure).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use banach_kl::{Error as CoreError, Grid, GridCovariance, GridSpec, KernelSpec};

#[derive(Debug, Error)]
pub enum CmdError {
    #[error("{0}")]
    Config(String),
    #[error("numerical invariant violated: {0}")]
    Invariant(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Config(_) => 2,
            CmdError::Invariant(_) => 3,
            CmdError::CheckFailed(_) => 4,
        }
    }
}

impl From<CoreError> for CmdError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NotPsd(_) => CmdError::Invariant(e.to_string()),
            _ => CmdError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Config(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CmdError {
    fn from(e: serde_json::Error) -> Self {
        CmdError::Config(format!("json: {e}"))
    }
}

pub type CmdResult<T> = Result<T, CmdError>;

#[derive(Parser)]
#[command(
    name = "banach-kl",
    about = "Greedy maximum-variance decomposition of grid covariances: decompose, sample, \
             condition, compare against the L2 spectrum, and check the Brownian-motion reference",
    after_help = "Environment: BANACH_KL_THREADS caps internal parallelism."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the decomposition and write it as JSON; prints the value table.
    Decompose(DecomposeArgs),
    /// Emit per-step CSV data (component draw and residual std) for the
    /// first 8 Brownian-motion steps.
    Figure1(Figure1Args),
    /// Draw paths from the truncated expansion; writes CSV plus a JSON summary.
    Sample(SampleArgs),
    /// Build the conditional measure given pinned dual coordinates.
    Condition(ConditionArgs),
    /// Two-estimator deconditioning agreement suite on threshold events.
    DeconditionCheck(DeconditionArgs),
    /// Side-by-side greedy vs spectral comparison table.
    Compare(CompareArgs),
    /// Compare the engine against the analytic Brownian-motion values.
    OracleCheck(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    BrownianMotion,
    BrownianBridge,
}

/// Model selection shared by most subcommands.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Built-in kernel (default: brownian-motion unless --matrix-file given).
    #[arg(long, value_enum)]
    pub kernel: Option<KernelKind>,

    /// JSON kernel file {"kind": ...}; overrides --kernel.
    #[arg(long, conflicts_with = "kernel")]
    pub matrix_file: Option<PathBuf>,

    /// Uniform dyadic grid level J (2^J + 1 points).
    #[arg(long, default_value_t = 6)]
    pub dyadic_level: u32,

    /// JSON grid file {"points": [...]} or {"dyadic_level": J}; overrides
    /// --dyadic-level.
    #[arg(long)]
    pub grid_file: Option<PathBuf>,

    /// Maximum number of decomposition steps.
    #[arg(long, default_value_t = 16)]
    pub steps: usize,

    /// Stop when the maximal variance drops below tol * lambda_0.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

impl ModelArgs {
    pub fn kernel_spec(&self) -> CmdResult<KernelSpec> {
        if let Some(path) = &self.matrix_file {
            let text = fs::read_to_string(path)?;
            let spec: KernelSpec = serde_json::from_str(&text)?;
            return Ok(spec);
        }
        Ok(match self.kernel.unwrap_or(KernelKind::BrownianMotion) {
            KernelKind::BrownianMotion => KernelSpec::BrownianMotion,
            KernelKind::BrownianBridge => KernelSpec::BrownianBridge,
        })
    }

    pub fn grid(&self, kernel: &KernelSpec) -> CmdResult<Grid> {
        if let Some(path) = &self.grid_file {
            let text = fs::read_to_string(path)?;
            let spec: GridSpec = serde_json::from_str(&text)?;
            return Ok(spec.build()?);
        }
        // A user matrix without an explicit grid gets uniform points of the
        // matching size.
        if let KernelSpec::UserMatrix { matrix } = kernel {
            let m = matrix.len();
            if m == 0 {
                return Err(CmdError::Config("user matrix is empty".into()));
            }
            let pts = if m == 1 {
                vec![0.0]
            } else {
                (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
            };
            return Ok(Grid::new(pts)?);
        }
        Ok(Grid::dyadic(self.dyadic_level)?)
    }

    /// Kernel + grid + discretized covariance, fully validated. Validation
    /// failures here, including a non-PSD user matrix, are configuration
    /// errors (exit 2), not numerical ones.
    pub fn build(&self) -> CmdResult<(KernelSpec, Grid, GridCovariance)> {
        if self.tol < 0.0 {
            return Err(CmdError::Config("--tol must be nonnegative".into()));
        }
        let kernel = self.kernel_spec()?;
        let grid = self.grid(&kernel)?;
        let cov = kernel
            .discretize(&grid)
            .map_err(|e| CmdError::Config(e.to_string()))?;
        Ok((kernel, grid, cov))
    }

    /// Absolute stopping threshold derived from the relative --tol.
    pub fn lambda_tol(&self, cov: &GridCovariance) -> f64 {
        self.tol * cov.max_diag().0.max(0.0)
    }
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Skip the terminal residual matrix in the output file.
    #[arg(long)]
    pub no_residual: bool,
    /// Output JSON path.
    #[arg(long, default_value = "decomposition.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Figure1Args {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output prefix; files are written as `<prefix>step<n>.csv`.
    #[arg(long, default_value = "figure1_")]
    pub out: String,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Reuse a previously written decomposition JSON instead of recomputing.
    #[arg(long)]
    pub decomposition: Option<PathBuf>,
    /// Truncation order (default: all recorded steps).
    #[arg(long)]
    pub terms: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output CSV path; the summary goes to `<out>.summary.json`.
    #[arg(long, default_value = "samples.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ConditionArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Reuse a previously written decomposition JSON (must carry a residual).
    #[arg(long)]
    pub decomposition: Option<PathBuf>,
    /// Comma-separated pinned values t_0,t_1,... (omit for the original
    /// measure).
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub values: Option<Vec<f64>>,
    /// Output JSON path.
    #[arg(long, default_value = "conditional.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DeconditionArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Index n of the last pinned coordinate (pins x*_0..=x*_n).
    #[arg(long, default_value_t = 1)]
    pub pin: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output JSON report path.
    #[arg(long, default_value = "decondition_check.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output CSV path.
    #[arg(long, default_value = "compare.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Dyadic level J; the engine runs the full 2^J steps.
    #[arg(long, default_value_t = 6)]
    pub level: u32,
    /// Output JSON report path.
    #[arg(long, default_value = "oracle_check.json")]
    pub out: PathBuf,
}

pub fn write_text(path: &Path, text: &str) -> CmdResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}
