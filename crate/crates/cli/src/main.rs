//! `landing`: command-line front end for the experiments.
//!
//! Exit status is 0 on success, 1 for invalid input or any other failure,
//! and 2 when an online run was aborted after too many missed balls.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use landing_core::{Error, ExperimentConfig, Mode, PredictorKind};
use nalgebra::Vector2;

#[derive(Parser, Debug)]
#[command(name = "landing", version, about = "Learn return policies that land the ball on a target")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_parser = ["greybox", "blackbox"])]
    predictor: Option<String>,

    /// Initial step length.
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha1: Option<f64>,

    /// Number of online iterations.
    #[arg(long, global = true)]
    iters: Option<usize>,

    /// Landing target as `x,y` in metres.
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_target)]
    target: Option<Vector2<f64>>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Compare analytic Jacobians with central differences.
    GradCheck,
    /// Landing scatter of fixed policies.
    BaselineVariance,
    /// Generate a labelled dataset.
    GenData,
    /// Train the MLP predictor.
    TrainBlackbox,
    /// One online optimization run.
    Run,
    /// Many runs over targets or initial policies.
    Sweep,
}

impl Command {
    fn mode(self) -> Mode {
        match self {
            Command::GradCheck => Mode::GradCheck,
            Command::BaselineVariance => Mode::BaselineVariance,
            Command::GenData => Mode::GenData,
            Command::TrainBlackbox => Mode::TrainBlackbox,
            Command::Run => Mode::Run,
            Command::Sweep => Mode::Sweep,
        }
    }
}

fn parse_target(s: &str) -> Result<Vector2<f64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [x, y] = parts.as_slice() else {
        return Err(format!("expected `x,y`, got {s:?}"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let v = Vector2::new(num(x)?, num(y)?);
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err("target must be finite".into())
    }
}

fn build_config(cli: &Cli) -> landing_core::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let mode = cli.command.mode();
    if let Some(m) = cfg.mode.filter(|&m| m != mode) {
        return Err(Error::InvalidConfig(format!(
            "config selects mode {} but the command is {}",
            m.as_str(),
            mode.as_str()
        )));
    }
    cfg.mode = Some(mode);
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(p) = &cli.predictor {
        cfg.predictor = p.parse::<PredictorKind>()?;
    }
    if let Some(a) = cli.alpha1 {
        cfg.alpha1 = a;
    }
    if let Some(n) = cli.iters {
        cfg.n_iters = n;
    }
    if let Some(t) = cli.target {
        cfg.target = t;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = build_config(&cli).and_then(|cfg| landing_core::harness::run_experiment(&cfg).map(|out| (cfg, out)));
    match result {
        Ok((cfg, out)) => {
            println!("{} finished, artifacts in {}", cli.command.mode().as_str(), cfg.out_dir.display());
            for line in &out.summary {
                println!("  {line}");
            }
            ExitCode::SUCCESS
        }
        Err(e @ Error::AbortedRun(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
