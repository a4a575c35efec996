use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use toda_curves_cli::{CliError, CommandKind, Outcome, OutputFormat, Preset, RunConfig};

/// Closed discrete curves, Flaschka-Manakov variables, and numerical
/// certification of the tri-Hamiltonian Toda brackets.
#[derive(Parser)]
#[command(name = "toda-curves", version)]
struct Cli {
    /// What to run: generate, verify, expand, simulate or invariants.
    #[arg(long)]
    command: CommandKindArg,

    /// Site count of the curve.
    #[arg(long, default_value_t = 6)]
    n: usize,

    /// Spectral parameter value; repeat the flag for several.
    /// Defaults to 0, 1, -1.
    #[arg(long = "lambda", allow_hyphen_values = true)]
    lambda: Vec<f64>,

    /// Base seed for the deterministic curve generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Tolerance applied to every check.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,

    /// Integration horizon for simulate.
    #[arg(long = "t-end", default_value_t = 1.0)]
    t_end: f64,

    /// Fixed integration step for simulate.
    #[arg(long, default_value_t = 1e-3, allow_hyphen_values = true)]
    dt: f64,

    /// Output path; defaults to a per-command file name.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format: json or csv. Defaults to json (csv for simulate).
    #[arg(long)]
    format: Option<OutputFormatArg>,

    /// Named fixture bypassing the random generator (hexagon).
    #[arg(long)]
    preset: Option<PresetArg>,
}

// Thin clap-facing wrappers so parse errors surface as usage errors (exit 2).
#[derive(Clone)]
struct CommandKindArg(CommandKind);
#[derive(Clone)]
struct OutputFormatArg(OutputFormat);
#[derive(Clone)]
struct PresetArg(Preset);

impl std::str::FromStr for CommandKindArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(CommandKindArg)
    }
}

impl std::str::FromStr for OutputFormatArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(OutputFormatArg)
    }
}

impl std::str::FromStr for PresetArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(PresetArg)
    }
}

fn init_logging() {
    let level = match std::env::var("TODA_CURVE_LOG").as_deref() {
        Ok("quiet") => "off",
        Ok("info") => "info",
        Ok("debug") => "debug",
        _ => "warn",
    };
    env_logger::Builder::new()
        .parse_filters(level)
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();

    let command = cli.command.0;
    let default_out = match command {
        CommandKind::Generate => "curve.json",
        CommandKind::Verify => "verify_report.json",
        CommandKind::Expand => "expand_report.json",
        CommandKind::Simulate => "trajectory.csv",
        CommandKind::Invariants => "invariants.json",
    };
    let format = cli.format.map(|f| f.0).unwrap_or(match command {
        CommandKind::Simulate => OutputFormat::Csv,
        _ => OutputFormat::Json,
    });
    let lambdas = if cli.lambda.is_empty() {
        vec![0.0, 1.0, -1.0]
    } else {
        cli.lambda
    };

    let cfg = RunConfig {
        command,
        n: cli.n,
        lambdas,
        seed: cli.seed,
        tol: cli.tol,
        t_end: cli.t_end,
        dt: cli.dt,
        out: cli.out.unwrap_or_else(|| PathBuf::from(default_out)),
        format,
        preset: cli.preset.map(|p| p.0),
    };

    match toda_curves_cli::run(&cfg) {
        Ok(Outcome::AllPassed) => ExitCode::from(0),
        Ok(Outcome::ChecksFailed) => {
            eprintln!("toda-curves: one or more checks failed (see {})", cfg.out.display());
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("toda-curves: configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("toda-curves: {msg}");
            ExitCode::from(1)
        }
    }
}
