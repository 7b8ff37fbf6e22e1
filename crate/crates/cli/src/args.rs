use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "cohinfo",
    version,
    about = "Coherent information, log-singularities and nonadditivity of quantum channels"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CommonArgs {
    /// Output format; CSV is only available for commands that produce a curve.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<String>,
    /// Seed for every random choice (optimizer restarts, shot noise, resampling).
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Coherent information at one input state, or along a one-parameter family.
    Ci(CiArgs),
    /// Maximize coherent information over a state family or over all inputs.
    Optimize(OptimizeArgs),
    /// Log-singularity strength of the output or environment entropy.
    Singularity(SingularityArgs),
    /// Nonadditivity gap Δ along one axis of the ρ(r₁, r₂, r₃) family.
    ScanDelta(ScanDeltaArgs),
    /// Simulated state tomography of the output and environment states.
    TomoState(TomoStateArgs),
    /// Simulated process tomography, compared to the exact Choi matrix.
    TomoProcess(TomoProcessArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ci(_) => "ci",
            Command::Optimize(_) => "optimize",
            Command::Singularity(_) => "singularity",
            Command::ScanDelta(_) => "scan-delta",
            Command::TomoState(_) => "tomo-state",
            Command::TomoProcess(_) => "tomo-process",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CiArgs {
    /// Channel spec, e.g. `platypus:3` or `tensor(platypus:3,ad:0.5)`.
    #[arg(long)]
    pub channel: String,
    /// Input state: `u:<u>`, `wv:<w>,<v>`, `r:<r1>,<r2>,<r3>` or `mixed`.
    #[arg(long, conflicts_with = "family", required_unless_present = "family")]
    pub state: Option<String>,
    /// One-parameter family to sweep: `u` or `wv:<v>` (`u:<u>` evaluates one point).
    #[arg(long)]
    pub family: Option<String>,
    /// Number of sweep points.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub channel: String,
    /// `u`, `r`, `wv`, `wv:<v>` or `general` (all input states).
    #[arg(long, default_value = "general")]
    pub family: String,
    /// Grid points per axis before Nelder–Mead refinement.
    #[arg(long, default_value_t = 51)]
    pub grid: usize,
    /// Random restarts for `--family general`.
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    Output,
    Env,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Spectral,
    Regression,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SingularityArgs {
    #[arg(long)]
    pub channel: String,
    /// One-parameter family whose parameter is ε: `u` or `wv:<v>`.
    #[arg(long)]
    pub family: String,
    #[arg(long, value_enum, default_value_t = SideArg::Output)]
    pub side: SideArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Spectral)]
    pub method: MethodArg,
    /// Regression window lower end.
    #[arg(long, default_value_t = 1e-4)]
    pub eps_min: f64,
    /// Regression window upper end.
    #[arg(long, default_value_t = 1e-1)]
    pub eps_max: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ScanDeltaArgs {
    #[arg(long)]
    pub channel_a: String,
    #[arg(long)]
    pub channel_b: String,
    /// Swept parameter: r1, r2 or r3.
    #[arg(long)]
    pub axis: String,
    /// The two other parameters, e.g. `r2=0.07,r3=0.27`.
    #[arg(long)]
    pub fixed: String,
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Sweep interval `lo,hi`; defaults to the feasible range.
    #[arg(long)]
    pub range: Option<String>,
    /// Single-channel capacity of A; optimized over all inputs when omitted.
    #[arg(long)]
    pub qa: Option<f64>,
    /// Single-channel capacity of B; optimized over all inputs when omitted.
    #[arg(long)]
    pub qb: Option<f64>,
    /// Restarts used when optimizing a missing --qa/--qb.
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TomoStateArgs {
    #[arg(long)]
    pub channel: String,
    /// Input state, same grammar as `ci --state`.
    #[arg(long)]
    pub state: String,
    /// Shots per measurement setting.
    #[arg(long, default_value_t = 100_000)]
    pub shots: u64,
    /// Monte Carlo resamples for error bars.
    #[arg(long, default_value_t = 50)]
    pub resamples: usize,
    /// Reuse the observed counts in every Monte Carlo run instead of redrawing.
    #[arg(long)]
    pub no_resample: bool,
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    /// Also write the simulated output-state counts as JSON to this path.
    #[arg(long)]
    pub save_counts: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TomoProcessArgs {
    #[arg(long)]
    pub channel: String,
    /// Shots per measurement setting; ignored with --noiseless.
    #[arg(long, default_value_t = 100_000)]
    pub shots: u64,
    /// Use exact probabilities instead of sampled counts.
    #[arg(long)]
    pub noiseless: bool,
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
}
