use std::path::PathBuf;
use std::str::FromStr;

use bgc_core::barrier::BarrierSide;
use bgc_core::oup::OupScheme;
use bgc_core::psi::PsiSpec;
use bgc_core::sde::{DtRule, Mode};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bgc",
    version,
    about = "Simulate and analyse bi-directional grid constrained diffusions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a BGC (or unconstrained) ensemble: paths.csv, manifest.json, summary.json.
    Simulate(SimulateArgs),
    /// Simulate an Ornstein-Uhlenbeck ensemble in the same run format.
    SimulateOup(SimulateOupArgs),
    /// Fit the saturating barrier curve to a run's quantile envelope.
    FitBarrier(FitBarrierArgs),
    /// Detect occupancy bands in a run's pooled value histogram.
    DetectBands(DetectBandsArgs),
    /// Run a BGC ensemble, its unconstrained twin and a matched OU ensemble.
    Compare(CompareArgs),
    /// Sample Ψ(x, t) (and optionally its restoring force) on a grid.
    ExportField(ExportFieldArgs),
    /// Classify the convexity and symmetry of Ψ on a grid.
    ClassifyPsi(ClassifyPsiArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Unconstrained,
    BgcDrift,
    BgcDiffusion,
    Transform,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Unconstrained => Mode::Unconstrained,
            ModeArg::BgcDrift => Mode::BgcDrift,
            ModeArg::BgcDiffusion => Mode::BgcDiffusion,
            ModeArg::Transform => Mode::Transform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DtRuleArg {
    PaperZero,
    Uniform,
}

impl From<DtRuleArg> for DtRule {
    fn from(r: DtRuleArg) -> Self {
        match r {
            DtRuleArg::PaperZero => DtRule::PaperZero,
            DtRuleArg::Uniform => DtRule::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Exact,
    Euler,
}

impl From<SchemeArg> for OupScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Exact => OupScheme::Exact,
            SchemeArg::Euler => OupScheme::Euler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Joint,
    Upper,
    Lower,
}

impl From<SideArg> for BarrierSide {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Joint => BarrierSide::SymmetricJoint,
            SideArg::Upper => BarrierSide::Upper,
            SideArg::Lower => BarrierSide::Lower,
        }
    }
}

/// `start:stop:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl FromStr for GridRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected start:stop:count, got `{s}`"));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{v}` is not a finite number"))
        };
        let count: usize = n.trim().parse().map_err(|_| format!("`{n}` is not a point count"))?;
        Ok(GridRange {
            start: num(a)?,
            stop: num(b)?,
            count,
        })
    }
}

impl std::fmt::Display for GridRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

fn parse_psi(s: &str) -> Result<PsiSpec, String> {
    s.parse::<PsiSpec>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, env = "BGC_OUT_DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, value_enum, default_value = "transform")]
    pub mode: ModeArg,
    /// Constraint surface, e.g. `parabolic:omega=100` or `spliced:omega1=200,omega2=5`.
    #[arg(long, value_parser = parse_psi, default_value = "parabolic:omega=100")]
    pub psi: PsiSpec,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Grid points per path, including t = 0.
    #[arg(long, default_value_t = 1001)]
    pub steps: usize,
    /// Final time T; defaults to steps − 1 so that t counts steps.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, value_enum, default_value = "paper-zero")]
    pub dt_rule: DtRuleArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Accept any Ψ in transform mode (uses X − sgn(X)Ψ(X) pointwise).
    #[arg(long)]
    pub allow_any_psi: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Bins of the terminal-value histogram in summary.json.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateOupArgs {
    #[arg(long, default_value_t = 0.01)]
    pub kappa: f64,
    #[arg(long, default_value_t = 25.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, value_enum, default_value = "exact")]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 1001)]
    pub steps: usize,
    /// Final time T; defaults to steps − 1.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitBarrierArgs {
    /// Run directory written by `simulate` or `simulate-oup`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.995)]
    pub quantile: f64,
    #[arg(long, value_enum, default_value = "joint")]
    pub side: SideArg,
    /// Fit the offset C as well (single-side fits only; joint fits keep C = 0).
    #[arg(long)]
    pub free_c: bool,
    /// Skip the digest check of the input.
    #[arg(long)]
    pub no_verify: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DetectBandsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub bins: usize,
    /// Moving-average width in bins (default: bins / 64).
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub no_verify: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = 0.995)]
    pub quantile: f64,
    /// Noise level of the OU ensemble (default: --sigma).
    #[arg(long)]
    pub oup_sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    pub oup_scheme: SchemeArg,
    /// Write only the report and envelopes, not the three path sets.
    #[arg(long)]
    pub no_paths: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExportFieldArgs {
    #[arg(long, value_parser = parse_psi, default_value = "parabolic:omega=100")]
    pub psi: PsiSpec,
    /// x grid as start:stop:count.
    #[arg(long, allow_hyphen_values = true, default_value = "-50:50:101")]
    pub x: GridRange,
    /// t grid as start:stop:count.
    #[arg(long, allow_hyphen_values = true, default_value = "0:1000:101")]
    pub t: GridRange,
    /// Add the restoring force −sgn(x)Ψ(x, t) as a column.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyPsiArgs {
    #[arg(long, value_parser = parse_psi)]
    pub psi: PsiSpec,
    /// Symmetric x grid as start:stop:count.
    #[arg(long, allow_hyphen_values = true, default_value = "-10:10:201")]
    pub x: GridRange,
    /// Time at which a time-dependent Ψ is classified.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = bgc_core::psi::DEFAULT_CONVEXITY_TOLERANCE)]
    pub tolerance: f64,
    #[command(flatten)]
    pub out: OutArgs,
}
