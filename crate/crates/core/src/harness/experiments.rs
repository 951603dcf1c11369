//! Mode drivers: each writes its artifacts under the output directory and
//! returns a short human-readable summary.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Mode, PredictorKind, SweepKind};
use super::data::{gen_dataset, grad_check_blackbox, grad_check_greybox, GradCheckReport};
use crate::arm::InterceptionPolicy;
use crate::artifact::{fmt_num, write_table_file, Provenance};
use crate::blackbox::{train, Dataset, MlpModel, TrainOutcome};
use crate::error::Result;
use crate::optimizer::{run_online_with_rng, run_rng, LandingModel, RunConfig, RunLog};
use crate::sim_env::estimate_variance;

/// Generator streams of the auxiliary tasks; run `i` of a sweep uses stream `i`.
pub const DATA_STREAM: u64 = 1 << 32;
pub const BASELINE_STREAM: u64 = 2 << 32;

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    prov: Provenance,
    out: ExperimentOutput,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(name);
        write_table_file(&path, &self.prov.comment_lines(), header, rows)?;
        self.out.files.push(path);
        Ok(())
    }

    fn dataset(&mut self, name: &str, data: &Dataset) -> Result<()> {
        let path = self.path(name);
        data.write_csv(&path, &self.prov.comment_lines())?;
        self.out.files.push(path);
        Ok(())
    }

    fn model(&mut self, name: &str, model: &MlpModel) -> Result<()> {
        let path = self.path(name);
        model.save_json(&path, Some(&self.prov))?;
        self.out.files.push(path);
        Ok(())
    }

    fn say(&mut self, line: String) {
        self.out.summary.push(line);
    }
}

/// Validates `cfg`, runs its mode and writes every artifact plus a `config.toml` echo.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let text = cfg.to_toml();
    fs::create_dir_all(&cfg.out_dir)?;
    let echo = cfg.out_dir.join("config.toml");
    fs::write(&echo, &text)?;
    let mut ctx = Ctx {
        cfg,
        prov: Provenance::new(cfg.seed, &text),
        out: ExperimentOutput {
            files: vec![echo],
            summary: Vec::new(),
        },
    };
    match cfg.mode()? {
        Mode::GradCheck => grad_check(&mut ctx)?,
        Mode::BaselineVariance => baseline(&mut ctx)?,
        Mode::GenData => {
            let data = generate(cfg)?;
            ctx.dataset("dataset.csv", &data)?;
            ctx.say(format!("generated {} records", data.len()));
        }
        Mode::TrainBlackbox => {
            let outcome = train_model(&mut ctx)?;
            let rmse = outcome.history.val_mse.last().copied().unwrap_or(f64::NAN).sqrt();
            ctx.say(format!("trained on {} records, held-out rmse {:.4} m", outcome.train.len(), rmse));
        }
        Mode::Run => single_run(&mut ctx)?,
        Mode::Sweep => sweep(&mut ctx)?,
    }
    Ok(ctx.out)
}

fn generate(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut rng = run_rng(cfg.seed, DATA_STREAM);
    gen_dataset(&cfg.env, &cfg.greybox, &cfg.data, &mut rng)
}

fn train_model(ctx: &mut Ctx) -> Result<TrainOutcome> {
    let cfg = ctx.cfg;
    let data = match &cfg.blackbox.dataset {
        Some(path) => Dataset::read_csv(path)?,
        None => {
            let data = generate(cfg)?;
            ctx.dataset("dataset.csv", &data)?;
            data
        }
    };
    let outcome = train(&data, &cfg.feasible, &cfg.train)?;
    ctx.model("model.json", &outcome.model)?;
    let rows: Vec<Vec<String>> = outcome
        .history
        .train_mse
        .iter()
        .enumerate()
        .map(|(e, &t)| vec![(e + 1).to_string(), fmt_num(t), fmt_num(outcome.history.val_mse[e])])
        .collect();
    ctx.table("training_history.csv", &["epoch", "train_mse", "val_mse"], &rows)?;
    Ok(outcome)
}

fn predictor(ctx: &mut Ctx) -> Result<Box<dyn LandingModel>> {
    let cfg = ctx.cfg;
    Ok(match cfg.predictor {
        PredictorKind::Greybox => Box::new(cfg.greybox.clone()),
        PredictorKind::Blackbox => match &cfg.blackbox.model {
            Some(path) => Box::new(MlpModel::load_json(path)?),
            None => Box::new(train_model(ctx)?.model),
        },
    })
}

fn grad_check(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let gc = &cfg.grad_check;
    let report: GradCheckReport = match cfg.predictor {
        PredictorKind::Greybox => grad_check_greybox(&cfg.env, &cfg.greybox, &cfg.data.sampling_box()?, gc.n_points, gc.fd_step, cfg.seed)?,
        PredictorKind::Blackbox => grad_check_blackbox(&cfg.feasible, gc.n_points, gc.fd_step, cfg.seed),
    };
    let rows: Vec<Vec<String>> = report
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            vec![
                i.to_string(),
                fmt_num(p.phi.theta1),
                fmt_num(p.phi.theta4),
                format!("{:.6e}", p.rel_error),
                u8::from(p.flagged).to_string(),
            ]
        })
        .collect();
    ctx.table("grad_check.csv", &["index", "theta1", "theta4", "rel_error", "flagged"], &rows)?;
    let summary = vec![vec![
        report.points.len().to_string(),
        report.n_flagged.to_string(),
        format!("{:.6e}", report.median_rel_error),
        format!("{:.6e}", report.max_rel_error),
    ]];
    ctx.table("grad_check_summary.csv", &["n_points", "n_flagged", "median_rel_error", "max_rel_error"], &summary)?;
    ctx.say(format!(
        "{} points, {} flagged, median rel. error {:.3e}, max {:.3e}",
        report.points.len(),
        report.n_flagged,
        report.median_rel_error,
        report.max_rel_error
    ));
    Ok(())
}

fn baseline(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let results: Vec<_> = cfg
        .baseline
        .policies
        .par_iter()
        .enumerate()
        .map(|(i, phi)| {
            let mut rng = run_rng(cfg.seed, BASELINE_STREAM + i as u64);
            estimate_variance(phi, cfg.baseline.trials, &cfg.env, &mut rng).map(|v| (*phi, v))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (phi, v) in &results {
        rows.push(vec![
            fmt_num(phi.theta1),
            fmt_num(phi.theta4),
            fmt_num(v.mean.x),
            fmt_num(v.mean.y),
            fmt_num(v.std),
            v.trials.to_string(),
            v.misses.to_string(),
        ]);
        ctx.say(format!(
            "phi = ({:+.3}, {:+.3}): sigma {:.4} m over {} trials ({} missed)",
            phi.theta1, phi.theta4, v.std, v.trials, v.misses
        ));
    }
    ctx.table("baseline_variance.csv", &["theta1", "theta4", "mean_x", "mean_y", "sigma", "trials", "misses"], &rows)
}

const SUMMARY_HEADER: [&str; 12] = [
    "run",
    "target_x",
    "target_y",
    "theta1_init",
    "theta4_init",
    "replicate",
    "iters",
    "final_eps",
    "final_sigma",
    "final_distance",
    "iters_to_threshold",
    "misses",
];

fn summary_row(run: usize, replicate: usize, log: &RunLog, phi1: &InterceptionPolicy, threshold: f64) -> Vec<String> {
    let last = log.last();
    vec![
        run.to_string(),
        fmt_num(log.target.x),
        fmt_num(log.target.y),
        fmt_num(phi1.theta1),
        fmt_num(phi1.theta4),
        replicate.to_string(),
        log.records.len().to_string(),
        fmt_num(last.eps),
        fmt_num(last.sigma),
        fmt_num(last.distance(&log.target)),
        log.iterations_to(threshold).map_or("-1".to_string(), |i| i.to_string()),
        log.misses.len().to_string(),
    ]
}

fn single_run(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let model = predictor(ctx)?;
    let rc = cfg.run_config();
    let mut rng = run_rng(cfg.seed, 0);
    let log = run_online_with_rng(&cfg.env, model.as_ref(), &rc, cfg.seed, &mut rng)?;
    ctx.table("run.csv", &RunLog::HEADER, &log.rows())?;
    let row = summary_row(0, 0, &log, &rc.phi1, cfg.threshold);
    ctx.table("summary.csv", &SUMMARY_HEADER, &[row])?;
    let last = log.last();
    ctx.say(format!(
        "{} iterations with the {} predictor: eps {:.4} m, sigma {:.4} m, first landing within {} m at iteration {}",
        log.records.len(),
        log.predictor,
        last.eps,
        last.sigma,
        cfg.threshold,
        log.iterations_to(cfg.threshold).map_or("never".to_string(), |i| i.to_string())
    ));
    Ok(())
}

/// Per-run configs of a sweep, in output order, with their replicate index.
pub fn sweep_runs(cfg: &ExperimentConfig) -> Vec<(RunConfig, usize)> {
    let base = cfg.run_config();
    let s = &cfg.sweep;
    let mut runs = Vec::new();
    match s.kind {
        SweepKind::Targets => {
            for t in &s.targets {
                for r in 0..s.replicates {
                    runs.push((RunConfig { target: *t, ..base }, r));
                }
            }
        }
        SweepKind::Inits => {
            for p in &s.inits {
                for r in 0..s.replicates {
                    runs.push((RunConfig { phi1: *p, ..base }, r));
                }
            }
        }
    }
    runs
}

fn sweep(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let model = predictor(ctx)?;
    let runs = sweep_runs(cfg);
    let logs: Vec<RunLog> = runs
        .par_iter()
        .enumerate()
        .map(|(i, (rc, _))| {
            let mut rng = run_rng(cfg.seed, i as u64);
            run_online_with_rng(&cfg.env, model.as_ref(), rc, cfg.seed, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for (i, ((rc, rep), log)) in runs.iter().zip(&logs).enumerate() {
        ctx.table(&format!("runs/run_{i:03}.csv"), &RunLog::HEADER, &log.rows())?;
        summary.push(summary_row(i, *rep, log, &rc.phi1, cfg.threshold));
    }
    ctx.table("summary.csv", &SUMMARY_HEADER, &summary)?;
    let within = logs.iter().filter(|l| l.iterations_to(cfg.threshold).is_some_and(|i| i <= 5)).count();
    ctx.say(format!(
        "{} runs with the {} predictor; {} reached {} m within 5 iterations",
        logs.len(),
        model.name(),
        within,
        cfg.threshold
    ));
    if cfg.sweep.kind == SweepKind::Inits {
        let k = cfg.sweep.report_iter;
        let mut rows = Vec::new();
        for (j, p) in cfg.sweep.inits.iter().enumerate() {
            let group = &logs[j * cfg.sweep.replicates..(j + 1) * cfg.sweep.replicates];
            let mean = group.iter().map(|l| l.records[k - 1].landing).sum::<Vector2<f64>>() / group.len() as f64;
            let dist = (mean - cfg.target).norm();
            rows.push(vec![
                fmt_num(p.theta1),
                fmt_num(p.theta4),
                k.to_string(),
                fmt_num(mean.x),
                fmt_num(mean.y),
                fmt_num(dist),
            ]);
            ctx.say(format!("init ({:+.3}, {:+.3}): mean landing at iteration {k} is {dist:.3} m from the target", p.theta1, p.theta4));
        }
        ctx.table("init_summary.csv", &["theta1_init", "theta4_init", "report_iter", "mean_land_x", "mean_land_y", "distance"], &rows)?;
    }
    Ok(())
}

/// Reads a run log back from disk.
pub fn read_run_log(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(crate::artifact::read_numeric_table(path, &RunLog::HEADER)?.rows)
}
