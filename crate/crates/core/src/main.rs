use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wimlab::cli::{run, Command, ExperimentConfig};
use wimlab::dynamics::{RateMeasure, RecursionOrder, ScoreKind};
use wimlab::WimError;

#[derive(Parser)]
#[command(
    name = "wimlab",
    version,
    about = "Wasserstein information geometry of 1-d parametric families"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Wasserstein and Fisher information matrices and scores at theta.
    Info(Opts),
    /// Wasserstein-Cramer-Rao bound for a polynomial statistic.
    CramerRao(Opts),
    /// Monte Carlo ensemble of online natural-gradient trajectories.
    Simulate(Opts),
    /// Deterministic variance recursion for the same dynamics.
    Predict(Opts),
    /// Hessian criterion and log-Sobolev ratios over a parameter grid.
    Lsi(Opts),
    /// Distance-based metric of the rectifier families against its closed form.
    ReluWim(Opts),
}

#[derive(Args)]
struct Opts {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta_star: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta0: Option<Vec<f64>>,
    /// Polynomial coefficients, lowest degree first; `;` separates components.
    #[arg(long, allow_hyphen_values = true)]
    statistic: Option<String>,
    #[arg(long)]
    score: Option<ScoreKind>,
    #[arg(long)]
    t_start: Option<u64>,
    #[arg(long)]
    t_max: Option<u64>,
    #[arg(long)]
    ensemble: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    order: Option<RecursionOrder>,
    /// `trace` or `spectral-norm`.
    #[arg(long)]
    measure: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Points per axis of the parameter sweep.
    #[arg(long)]
    grid: Option<usize>,
    /// Output directory for CSV files and result.json; JSON goes to stdout
    /// when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_statistic(s: &str) -> Result<Vec<Vec<f64>>, WimError> {
    s.split(';')
        .map(|comp| {
            comp.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| WimError::Config(format!("bad statistic coefficient `{c}`")))
                })
                .collect()
        })
        .collect()
}

fn build(command: Command, o: Opts) -> Result<ExperimentConfig, WimError> {
    let mut cfg = match &o.config {
        Some(p) => {
            let mut c = ExperimentConfig::load(p)?;
            c.command = command;
            c
        }
        None => {
            let family = o
                .family
                .clone()
                .ok_or_else(|| WimError::Config("--family or --config is required".into()))?;
            ExperimentConfig::new(command, family)
        }
    };
    if let Some(f) = o.family {
        cfg.family = f;
    }
    macro_rules! set {
        ($($field:ident <- $val:expr),* $(,)?) => {
            $(if let Some(v) = $val { cfg.$field = Some(v); })*
        };
    }
    set!(
        theta <- o.theta,
        theta_star <- o.theta_star,
        theta0 <- o.theta0,
        score_kind <- o.score,
        t_start <- o.t_start,
        t_max <- o.t_max,
        ensemble <- o.ensemble,
        seed <- o.seed,
        order <- o.order,
        alpha <- o.alpha,
        grid <- o.grid,
        out <- o.out,
    );
    if let Some(s) = o.statistic {
        cfg.statistic = Some(parse_statistic(&s)?);
    }
    if let Some(m) = o.measure {
        cfg.measure = Some(match m.as_str() {
            "trace" => RateMeasure::Trace,
            "spectral-norm" | "spectral" => RateMeasure::SpectralNorm,
            other => return Err(WimError::Config(format!("unknown rate measure `{other}`"))),
        });
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), WimError> {
    let (command, opts) = match cli.command {
        Cmd::Info(o) => (Command::Info, o),
        Cmd::CramerRao(o) => (Command::CramerRao, o),
        Cmd::Simulate(o) => (Command::Simulate, o),
        Cmd::Predict(o) => (Command::Predict, o),
        Cmd::Lsi(o) => (Command::Lsi, o),
        Cmd::ReluWim(o) => (Command::ReluWim, o),
    };
    let cfg = build(command, opts)?;
    let bundle = run(&cfg)?;
    match &bundle.config.out {
        Some(dir) => {
            bundle.write_to(dir)?;
            eprintln!("wrote {}", dir.display());
        }
        None => {
            // A closed pipe on stdout is not an error worth reporting.
            let _ = writeln!(std::io::stdout().lock(), "{}", bundle.to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
