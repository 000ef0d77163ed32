//! Run configuration: every subcommand's parameters, parseable from the
//! command line or from a JSON config file.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use lgcert::mitigation::CorrectionMode;
use lgcert::reference::AngleUnit;
use lgcert::sampler::DiscardPolicy;
use lgcert::solver::InitialStateSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "lgcert", version, about = "Certified randomness from Leggett-Garg violation on a single qubit")]
pub struct Cli {
    /// JSON run configuration, or a manifest written by a previous run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads. Outputs do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, env = "LGCERT_OUT_DIR", default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Option<RunConfig>,
}

/// One subcommand with all of its parameters.
///
/// Serialized as `{"command": "<name>", ...fields}`; omitted fields take
/// their command-line defaults.
#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    /// Find (θ₁, θ₂) reaching a target LGI with NSIT satisfied.
    Solve(SolveArgs),
    /// Sampled five-circuit experiment over a grid of targets.
    Run(RunArgs),
    /// Emit certified random bits and their certificate.
    Bits(BitsArgs),
    /// Run the five circuits once and write the randomness certificate.
    Certify(CertifyArgs),
    /// LGI under pre-measurement Z flips of increasing probability.
    NoiseSweep(NoiseSweepArgs),
    /// LGI from random-setting streams of increasing length.
    SeedSweep(SeedSweepArgs),
    /// Bell-CHSH contrast run (never certified).
    Bell(BellArgs),
    /// Raw vs readout-mitigated LGI error over the target grid.
    MitigateDemo(MitigateArgs),
    /// Monobit and runs tests on a packed bit file.
    Stats(StatsArgs),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Solve(_) => "solve",
            RunConfig::Run(_) => "run",
            RunConfig::Bits(_) => "bits",
            RunConfig::Certify(_) => "certify",
            RunConfig::NoiseSweep(_) => "noise-sweep",
            RunConfig::SeedSweep(_) => "seed-sweep",
            RunConfig::Bell(_) => "bell",
            RunConfig::MitigateDemo(_) => "mitigate-demo",
            RunConfig::Stats(_) => "stats",
        }
    }
}

/// `pure`, `pure-conjugate`, `mixed` or `bloch:x,y,z`.
pub fn parse_state(s: &str) -> Result<InitialStateSpec, String> {
    match s {
        "pure" => Ok(InitialStateSpec::PureProtocol),
        "pure-conjugate" => Ok(InitialStateSpec::PureConjugate),
        "mixed" => Ok(InitialStateSpec::MaximallyMixed),
        _ => {
            let v = s
                .strip_prefix("bloch:")
                .ok_or_else(|| format!("unknown state '{s}' (pure, pure-conjugate, mixed, bloch:x,y,z)"))?;
            let xs = parse_list::<f64>(v)?;
            match xs[..] {
                [x, y, z] => Ok(InitialStateSpec::Bloch { x, y, z }),
                _ => Err(format!("bloch state needs three components, got {}", xs.len())),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lengths(pub Vec<usize>);

/// `start:stop:step`, inclusive of `stop`.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts = parse_list_sep::<f64>(s, ':')?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("grid '{s}' must be start:stop:step"));
    };
    if !(step > 0.0) || stop < start {
        return Err(format!("grid '{s}' needs step > 0 and stop ≥ start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok(Grid((0..n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()))
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    parse_list_sep(s, ',')
}

fn parse_list_sep<T: std::str::FromStr>(s: &str, sep: char) -> Result<Vec<T>, String> {
    s.split(sep)
        .map(|p| p.trim().parse::<T>().map_err(|_| format!("cannot parse '{p}' in '{s}'")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitArg {
    Radians,
    Degrees,
}

impl From<UnitArg> for AngleUnit {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::Radians => AngleUnit::Radians,
            UnitArg::Degrees => AngleUnit::Degrees,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    FirstOfSubRun,
    FirstOfEachShot,
}

impl From<PolicyArg> for DiscardPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::FirstOfSubRun => DiscardPolicy::FirstOfSubRun,
            PolicyArg::FirstOfEachShot => DiscardPolicy::FirstOfEachShot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Inverse,
    Constrained,
}

impl From<ModeArg> for CorrectionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Inverse => CorrectionMode::Inverse,
            ModeArg::Constrained => CorrectionMode::Constrained,
        }
    }
}

/// Angles for a single-point command: an explicit pair, or the reference
/// table row for `row` under the initial state.
#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PointArgs {
    /// Initial state: pure, pure-conjugate, mixed or bloch:x,y,z.
    #[arg(long, default_value = "pure", value_parser = parse_state)]
    pub state: InitialStateSpec,
    #[arg(long, requires = "theta2")]
    pub theta1: Option<f64>,
    #[arg(long, requires = "theta1")]
    pub theta2: Option<f64>,
    /// Unit of --theta1/--theta2.
    #[arg(long, value_enum, default_value = "radians")]
    pub unit: UnitArg,
    /// Reference-table row (target LGI) used when no angles are given.
    #[arg(long)]
    pub row: Option<f64>,
}

/// Noise profile: `ideal`, `device-like`, or a path to a profile JSON.
#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseArgs {
    #[arg(long, default_value = "ideal")]
    pub noise: String,
}

impl Default for PointArgs {
    fn default() -> Self {
        PointArgs {
            state: InitialStateSpec::PureProtocol,
            theta1: None,
            theta2: None,
            unit: UnitArg::Radians,
            row: None,
        }
    }
}

impl Default for NoiseArgs {
    fn default() -> Self {
        NoiseArgs { noise: "ideal".into() }
    }
}

macro_rules! defaults_from_cli {
    ($($ty:ident => $name:literal),* $(,)?) => {
        $(impl Default for $ty {
            fn default() -> Self {
                <$ty as Parser>::parse_from([$name])
            }
        })*
    };
}

defaults_from_cli!(
    SolveArgs => "solve",
    RunArgs => "run",
    BitsArgs => "bits",
    CertifyArgs => "certify",
    NoiseSweepArgs => "noise-sweep",
    SeedSweepArgs => "seed-sweep",
    BellArgs => "bell",
    MitigateArgs => "mitigate-demo",
    StatsArgs => "stats",
);

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveArgs {
    /// Single target LGI in (1, 1.5].
    #[arg(long, conflicts_with = "grid")]
    pub target: Option<f64>,
    /// Target grid start:stop:step; defaults to 1.05:1.50:0.05.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<Grid>,
    /// Initial state: pure, pure-conjugate, mixed or bloch:x,y,z.
    #[arg(long, default_value = "pure", value_parser = parse_state)]
    pub state: InitialStateSpec,
    /// Unit of reported angles, --guess and --fixed-theta2.
    #[arg(long, value_enum, default_value = "radians")]
    pub unit: UnitArg,
    #[arg(long, default_value_t = lgcert::solver::DEFAULT_STARTS)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial guess θ1,θ2 tried before the seeded starts.
    #[arg(long, value_parser = parse_pair)]
    pub guess: Option<(f64, f64)>,
    /// Hold θ₂ fixed and solve for θ₁ only.
    #[arg(long)]
    pub fixed_theta2: Option<f64>,
    /// Also enumerate every distinct solution family.
    #[arg(long)]
    pub families: bool,
    /// Do not start from the reference-table angles for the target.
    #[arg(long)]
    pub no_table_guess: bool,
}

fn parse_lengths(s: &str) -> Result<Lengths, String> {
    parse_list(s).map(Lengths)
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match parse_list::<f64>(s)?[..] {
        [a, b] => Ok((a, b)),
        _ => Err(format!("expected two comma-separated numbers, got '{s}'")),
    }
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct RunArgs {
    /// Target grid; angles are solved for each target. Without it the
    /// reference-table rows for the state are used.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<Grid>,
    /// Initial state: pure, pure-conjugate, mixed or bloch:x,y,z.
    #[arg(long, default_value = "pure", value_parser = parse_state)]
    pub state: InitialStateSpec,
    #[arg(long, default_value_t = 50_000)]
    pub shots: usize,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub noise: NoiseArgs,
    /// Add readout-mitigated columns.
    #[arg(long)]
    pub mitigate: bool,
    #[arg(long, value_enum, default_value = "constrained")]
    pub mode: ModeArg,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct BitsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: PointArgs,
    #[arg(long, default_value_t = 50_000)]
    pub shots: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, value_enum, default_value = "first-of-sub-run")]
    pub policy: PolicyArg,
    /// Write the bit file even when the run is not certified.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: PointArgs,
    #[arg(long, default_value_t = 50_000)]
    pub shots: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub noise: NoiseArgs,
    /// Shift the t₂-only marginal by this much before certifying.
    #[arg(long, default_value_t = 0.0)]
    pub tamper_marginal: f64,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: PointArgs,
    /// Flip-probability grid start:stop:step.
    #[arg(long, value_parser = parse_grid, default_value = "0:0.5:0.05")]
    pub grid: Grid,
    /// Also sample each point with this many shots.
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedSweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: PointArgs,
    /// Stream lengths; defaults to 10¹ … 10⁶.
    #[arg(long, value_parser = parse_lengths)]
    pub lengths: Option<Lengths>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct BellArgs {
    #[arg(long, default_value_t = 0.0)]
    pub theta_a: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub theta_a_prime: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_8)]
    pub theta_b: f64,
    #[arg(long, default_value_t = 3.0 * std::f64::consts::FRAC_PI_8)]
    pub theta_b_prime: f64,
    #[arg(long, default_value_t = 100_000)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct MitigateArgs {
    #[arg(long, default_value_t = 20_000)]
    pub shots: usize,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to readout-only flips from the device-like profile.
    #[arg(long, default_value = "device-like-readout")]
    pub noise: String,
    #[arg(long, value_enum, default_value = "constrained")]
    pub mode: ModeArg,
    /// Build the calibration from this many shots per basis state
    /// instead of exactly.
    #[arg(long)]
    pub calibration_shots: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsArgs {
    /// Packed bit file.
    #[arg(long, default_value = "bits.bin")]
    pub input: PathBuf,
    /// Number of bits; read from the sidecar `<input>.json` when omitted.
    #[arg(long)]
    pub n_bits: Option<usize>,
    #[arg(long, default_value_t = lgcert::stats::DEFAULT_ALPHA)]
    pub alpha: f64,
}
