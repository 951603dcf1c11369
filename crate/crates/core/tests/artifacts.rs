//! Files on disk: tables, run logs, configs and models survive a round trip.

use std::fs;

use nalgebra::Vector2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use landing_core::artifact::{fmt_num, read_numeric_table, write_table_file, Provenance};
use landing_core::blackbox::{Normalization, Record};
use landing_core::harness::experiments::read_run_log;
use landing_core::optimizer::run_online;
use landing_core::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn numeric_tables_round_trip(rows in prop::collection::vec(prop::array::uniform3(-1e4..1e4f64), 1..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let text: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|&x| fmt_num(x)).collect()).collect();
        write_table_file(&path, &Provenance::new(3, "x").comment_lines(), &["a", "b", "c"], &text).unwrap();
        let back = read_numeric_table(&path, &["a", "b", "c"]).unwrap();
        prop_assert_eq!(back.rows.len(), rows.len());
        for (got, want) in back.rows.iter().zip(&rows) {
            for (g, w) in got.iter().zip(want) {
                prop_assert!((g - w).abs() <= 1e-9, "{} vs {}", g, w);
            }
        }
    }

    #[test]
    fn datasets_round_trip(pts in prop::collection::vec(prop::array::uniform4(-2.0..4.0f64), 1..30)) {
        let data = Dataset {
            records: pts
                .iter()
                .map(|p| Record { phi: InterceptionPolicy::new(p[0], p[1]), landing: Vector2::new(p[2], p[3]) })
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        data.write_csv(&path, &[]).unwrap();
        let back = Dataset::read_csv(&path).unwrap();
        for (a, b) in back.records.iter().zip(&data.records) {
            prop_assert!((a.phi.to_vector() - b.phi.to_vector()).amax() <= 1e-9);
            prop_assert!((a.landing - b.landing).amax() <= 1e-9);
        }
    }
}

#[test]
fn run_log_on_disk_matches_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        mode: Some(Mode::Run),
        seed: 5,
        n_iters: 15,
        out_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let out = landing_core::harness::run_experiment(&cfg).unwrap();
    assert!(out.files.iter().any(|f| f.ends_with("run.csv")));
    let text = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(text.starts_with("# seed=5\n# config_sha256="));
    let rows = read_run_log(&dir.path().join("run.csv")).unwrap();
    let log = run_online(&cfg.env, &cfg.greybox, &cfg.run_config(), 5).unwrap();
    assert_eq!(rows.len(), log.records.len());
    for (row, r) in rows.iter().zip(&log.records) {
        let want = [r.iter as f64, r.phi.theta1, r.phi.theta4, r.landing.x, r.landing.y, r.alpha, r.loss, r.eps, r.sigma, r.r_bar.x, r.r_bar.y];
        for (g, w) in row.iter().zip(want) {
            assert!((g - w).abs() <= 1e-9);
        }
    }
    let echoed = ExperimentConfig::from_file(&dir.path().join("config.toml")).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn config_survives_toml() {
    let mut cfg = ExperimentConfig {
        mode: Some(Mode::Sweep),
        seed: 77,
        target: Vector2::new(-0.3, 2.45),
        alpha1: 0.123,
        ..ExperimentConfig::default()
    };
    cfg.env.landing_noise_std = Vector2::new(0.11, 0.13);
    cfg.sweep.replicates = 3;
    let back = ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.to_toml(), cfg.to_toml());
}

#[test]
fn partial_config_keeps_defaults() {
    let cfg = ExperimentConfig::from_toml_str("seed = 4\n[sweep]\nreplicates = 2\n").unwrap();
    assert_eq!(cfg.seed, 4);
    assert_eq!(cfg.sweep.replicates, 2);
    assert_eq!(cfg.sweep.targets, ExperimentConfig::default().sweep.targets);
    assert_eq!(cfg.env, EnvConfig::default());
}

#[test]
fn model_file_reloads_exactly() {
    let k = FeasibleSet::default();
    let norm = Normalization {
        input_center: k.center(),
        input_half_width: k.half_widths(),
        output_mean: Vector2::new(0.1, 2.3),
        output_std: Vector2::new(0.4, 0.6),
    };
    let model = MlpModel::random(norm, &mut ChaCha8Rng::seed_from_u64(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("m.json");
    model.save_json(&path, Some(&Provenance::new(9, "cfg"))).unwrap();
    let back = MlpModel::load_json(&path).unwrap();
    assert_eq!(back, model);
    let phi = InterceptionPolicy::new(0.2, -0.1);
    assert_eq!(back.forward(&phi), model.forward(&phi));
    assert_eq!(back.jacobian(&phi), model.jacobian(&phi));
}

#[test]
fn truncated_model_file_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let model = MlpModel::zeros(Normalization::identity());
    model.save_json(&path, None).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(MlpModel::load_json(&path), Err(Error::Format { .. })));
}
