//! Argument definitions and run-configuration resolution. Values resolve as
//! explicit flag > config file > built-in default; explicit model fields
//! override preset fields.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ropeplan::RopeConfig;

use crate::CliError;

#[derive(Parser)]
#[command(
    name = "ropeplan",
    version,
    about = "Rotary-angle distribution analysis and context-extension planning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Estimate per-pair rotary-angle histograms and export them.
    Estimate(EstimateArgs),
    /// Score a strategy's disturbance against the pre-trained distribution.
    Disturbance(DisturbanceArgs),
    /// Emit a scaling plan (JSON + flat frequency file).
    Plan(PlanArgs),
    /// Sweep a parameter axis and tabulate aggregate disturbances.
    Sweep(SweepArgs),
    /// Check the relative-position identity on seeded random inputs.
    Verify(VerifyArgs),
}

// ── Shared argument groups ──────────────────────────────────────────────────

#[derive(Args, Clone)]
pub struct ModelArgs {
    /// Model preset; currently "llama2" (d=128, base=10000, L=4096).
    #[arg(long)]
    pub model: Option<String>,
    /// Scalar dimensions per attention head (even).
    #[arg(long)]
    pub head_dim: Option<usize>,
    /// Frequency base (default 10000 when given explicit dimensions).
    #[arg(long)]
    pub base: Option<f64>,
    /// Pre-training context length in tokens.
    #[arg(long)]
    pub pretrain_len: Option<u64>,
    /// Optional JSON run configuration supplying defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct OutputArgs {
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Which export format(s) to write.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Clone)]
pub struct MethodArgs {
    /// Extension strategy.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Margin threshold for the disturbance-driven selector.
    #[arg(long = "t", allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Number of interpolated scalar dimensions for the selector (even).
    #[arg(long)]
    pub n_hat: Option<usize>,
    /// Lower rotation-count threshold of the banded strategy.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Upper rotation-count threshold of the banded strategy.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Branch orientation of the banded strategy.
    #[arg(long, value_enum, default_value_t = Orientation::Standard)]
    pub yarn_orientation: Orientation,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Pi,
    Extrapolate,
    Yarn,
    Dprope,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Orientation {
    Standard,
    Swapped,
}

impl From<Orientation> for ropeplan::YarnOrientation {
    fn from(o: Orientation) -> Self {
        match o {
            Orientation::Standard => ropeplan::YarnOrientation::Standard,
            Orientation::Swapped => ropeplan::YarnOrientation::Swapped,
        }
    }
}

// ── Per-command arguments ───────────────────────────────────────────────────

#[derive(Parser)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of positions to enumerate (defaults to the pre-training
    /// length, or the plan's target length when --plan is given).
    #[arg(long)]
    pub length: Option<u64>,
    /// Angular intervals per histogram.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Restrict the export to these dimension pairs.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Estimate under a plan's modified frequencies instead of the base ones.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Parser)]
pub struct DisturbanceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Extended context length (must exceed the pre-training length).
    #[arg(long)]
    pub target_len: Option<u64>,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Score a plan file instead of a built-in method.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Angular intervals per histogram.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Smoothing constant of the divergence.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Run the built-in three-method comparison at 8192 and 16384 on the
    /// llama2 preset.
    #[arg(long)]
    pub table3: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Parser)]
pub struct PlanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Extended context length.
    #[arg(long)]
    pub target_len: Option<u64>,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Angular intervals used by the selector and recorded as provenance.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Smoothing constant used by the selector and recorded as provenance.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Parser)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Extended context length.
    #[arg(long)]
    pub target_len: Option<u64>,
    /// Parameter axis to sweep.
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated parameter values, swept in input order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Vec<String>,
    /// Angular intervals (fixed, for the t and n-hat axes).
    #[arg(long)]
    pub bins: Option<usize>,
    /// Smoothing constant of the divergence.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Selector threshold used when sweeping the b axis.
    #[arg(long = "t", allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Selector dimension count used when sweeping the b axis.
    #[arg(long)]
    pub n_hat: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    T,
    NHat,
    B,
}

#[derive(Parser)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of random (q, k, m, n) trials.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Seed of the trial generator.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Additionally verify the identity under this plan's frequencies.
    #[arg(long)]
    pub plan: Option<PathBuf>,
}

// ── Run configuration file ──────────────────────────────────────────────────

/// Optional JSON run configuration; every field is a default for the
/// corresponding flag.
#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub model: Option<String>,
    pub head_dim: Option<usize>,
    pub base: Option<f64>,
    pub pretrain_len: Option<u64>,
    pub target_len: Option<u64>,
    pub bins: Option<usize>,
    pub epsilon: Option<f64>,
    pub method: Option<String>,
    pub t: Option<f64>,
    pub n_hat: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

impl RunFile {
    pub fn load(path: Option<&PathBuf>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn method(&self) -> Result<Option<Method>, CliError> {
        match self.method.as_deref() {
            None => Ok(None),
            Some("pi") => Ok(Some(Method::Pi)),
            Some("extrapolate") => Ok(Some(Method::Extrapolate)),
            Some("yarn") => Ok(Some(Method::Yarn)),
            Some("dprope") => Ok(Some(Method::Dprope)),
            Some(other) => Err(CliError::Usage(format!("config: unknown method {other:?}"))),
        }
    }
}

/// Resolve the model configuration from flags, config file, and presets.
pub fn resolve_model(args: &ModelArgs, file: &RunFile) -> Result<RopeConfig, CliError> {
    let preset_name = args.model.as_deref().or(file.model.as_deref());
    let preset = match preset_name {
        Some("llama2") => Some((128usize, 10000.0f64, 4096u64)),
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown model preset {other:?} (available: llama2)"
            )))
        }
        None => None,
    };

    let head_dim = args
        .head_dim
        .or(file.head_dim)
        .or(preset.map(|p| p.0))
        .ok_or_else(|| CliError::Usage("specify --model or --head-dim/--pretrain-len".into()))?;
    let base = args.base.or(file.base).or(preset.map(|p| p.1)).unwrap_or(10000.0);
    let pretrain_len = args
        .pretrain_len
        .or(file.pretrain_len)
        .or(preset.map(|p| p.2))
        .ok_or_else(|| CliError::Usage("specify --pretrain-len (or a --model preset)".into()))?;

    Ok(RopeConfig::new(head_dim, base, pretrain_len)?)
}
