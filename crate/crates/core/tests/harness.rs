use std::fs;
use std::path::Path;

use gsr_core::experiment::{emit_report, read_metrics, run_experiment, transfer_eval, ExperimentConfig, MetricsRow};
use gsr_core::{Error, Model};

fn config(id: &str, model: &str, missing_rate: f64) -> ExperimentConfig {
    let task = if missing_rate > 0.0 { "interpolate" } else { "denoise" };
    let sigma = if missing_rate > 0.0 { 0.0 } else { 0.4 };
    let text = format!(
        r#"{{
          "id": "{id}",
          "task": "{task}",
          "model": {model},
          "data": {{"synthetic": {{
            "graph": {{"kind": "community", "clusters": 3}},
            "n": 60, "signal": "pwc", "sigma": {sigma}, "missing_rate": {missing_rate},
            "splits": {{"train": 12, "valid": 4, "test": 4}}
          }}}},
          "seed": 5,
          "train": {{"epochs": 1, "valid_every": 4}}
        }}"#
    );
    serde_json::from_str(&text).unwrap()
}

const TV_E: &str = r#"{"type": "graphdau", "variant": "tv", "accel": "evd", "L": 3}"#;

fn strip_wall_time(rows: &[MetricsRow]) -> Vec<MetricsRow> {
    rows.iter().cloned().map(|r| MetricsRow { wall_time: 0.0, ..r }).collect()
}

#[test]
fn same_config_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("det", TV_E, 0.0);
    let a = run_experiment(&cfg, &dir.path().join("a")).unwrap();
    let b = run_experiment(&cfg, &dir.path().join("b")).unwrap();
    let read = |d: &Path| strip_wall_time(&read_metrics(&d.join("metrics.csv")).unwrap());
    assert_eq!(read(&a.out_dir), read(&b.out_dir));
    for f in ["params.json", "history.csv", "plotdata.csv"] {
        assert_eq!(fs::read(a.out_dir.join(f)).unwrap(), fs::read(b.out_dir.join(f)).unwrap(), "{f}");
    }
    assert_eq!(a.rows.len(), 2);
    assert_eq!(a.rows[0].model, "Noisy");
    assert_eq!(a.rows[1].full_name(), "GraphDAU-TV-E");
    assert_eq!(a.rows[1].param_count, 6);
}

#[test]
fn plotdata_has_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config("plot", TV_E, 0.0), dir.path()).unwrap();
    let text = fs::read_to_string(out.out_dir.join("plotdata.csv")).unwrap();
    assert_eq!(text.lines().count(), 61);
}

#[test]
fn transfer_onto_training_data_reproduces_test_metric() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("xfer", TV_E, 0.0);
    let out = run_experiment(&cfg, dir.path()).unwrap();
    let row = transfer_eval(&dir.path().join("params.json"), &cfg).unwrap();
    assert_eq!(row.mean_rmse, out.rows[1].mean_rmse);
    assert_eq!(row.param_count, out.rows[1].param_count);
}

#[test]
fn malformed_params_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("params.json");
    fs::write(&path, r#"{"variant": "tv", "accel": "evd", "L": 2, "beta": [0.1, 0.1]}"#).unwrap();
    let err = Model::load_json(&path).unwrap_err();
    assert!(err.to_string().contains("gamma"), "{err}");
    fs::write(&path, r#"{"variant": "tv", "accel": "evd", "L": 2, "gamma": [1, 1], "beta": [0.1, 0.1], "bogus": 1}"#).unwrap();
    let err = Model::load_json(&path).unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
}

#[test]
fn interpolation_and_baselines_feed_one_report() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [
        config("tv", TV_E, 0.0),
        config(
            "hd",
            r#"{"type": "baseline", "spec": {"kind": "heat-diffusion", "tau": 1.0}, "grid": {"tau": [0.1, 1.0, 5.0]}}"#,
            0.0,
        ),
        config("nest", r#"{"type": "nestdau", "variant": "tv", "accel": "evd", "P": 2, "L": 2}"#, 0.5),
        config("bl", r#"{"type": "baseline", "spec": {"kind": "bandlimited", "bandwidth": 6}}"#, 0.5),
    ];
    for cfg in &runs {
        run_experiment(cfg, &dir.path().join(&cfg.id)).unwrap();
    }
    assert!(dir.path().join("hd/grid.csv").exists());
    assert!(dir.path().join("hd/baseline.json").exists());
    let report = emit_report(dir.path()).unwrap();
    assert_eq!(report.rows.len(), 8);
    assert_eq!(report.plot_files.len(), 4);
    let names: Vec<String> = report.rows.iter().map(|r| r.full_name()).collect();
    assert!(names.contains(&"NestDAU-TV-E".to_string()), "{names:?}");
    assert!(names.contains(&"HD".to_string()), "{names:?}");
    let md = fs::read_to_string(dir.path().join("summary.md")).unwrap();
    assert_eq!(md.lines().count(), 10);
    let summary = read_metrics(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary, report.rows);
}

#[test]
fn single_run_report_has_one_model_row() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config("one", TV_E, 0.0), dir.path()).unwrap();
    let report = emit_report(dir.path()).unwrap();
    assert_eq!(report.rows.iter().filter(|r| r.model != "Noisy").count(), 1);
}

#[test]
fn inconsistent_configs_are_rejected() {
    let mut cfg = config("bad", TV_E, 0.0);
    cfg.task = gsr_core::experiment::Task::Interpolate;
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    let cfg = config("bad", r#"{"type": "graphdau", "variant": "tv", "accel": "cheb", "L": 3}"#, 0.0);
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    let empty = tempfile::tempdir().unwrap();
    assert!(emit_report(empty.path()).is_err());
}
