mod common;

use gsr_core::data::{generate, SignalKind, Split, Splits, SynthSpec};
use gsr_core::train::evaluate_model;
use gsr_core::{train, Accel, DauParams, Model, SynthKind, TrainConfig, Variant};

fn spec(sigma: f64) -> SynthSpec {
    SynthSpec {
        graph: SynthKind::community(3),
        n: 60,
        signal: SignalKind::Pwc,
        clusters: None,
        sigma,
        missing_rate: 0.0,
        splits: Splits { train: 20, valid: 5, test: 5 },
        perturbed: false,
    }
}

fn config() -> TrainConfig {
    TrainConfig {
        epochs: 2,
        valid_every: 10,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic_and_improves() {
    let ds = generate(&spec(0.5), 2).unwrap();
    let init = Model::Dau(DauParams::init(Variant::Tv, Accel::Evd, 4, 0));
    let contexts = ds.contexts(Accel::Evd).unwrap();
    let a = train(&init, &ds, &contexts, &config()).unwrap();
    let b = train(&init, &ds, &contexts, &config()).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);
    let before = evaluate_model(&init, &ds, &contexts, Split::Valid).unwrap().mean;
    assert!(a.best_valid_rmse <= before, "{} > {before}", a.best_valid_rmse);
    let curve = a.validation_curve();
    assert_eq!(curve[0].0, 0);
    assert!(curve.iter().all(|(_, v)| v.is_finite()));
}

#[test]
fn different_seeds_shuffle_differently() {
    let ds = generate(&spec(0.5), 2).unwrap();
    let init = Model::Dau(DauParams::init(Variant::Tv, Accel::Evd, 3, 0));
    let contexts = ds.contexts(Accel::Evd).unwrap();
    let a = train(&init, &ds, &contexts, &config()).unwrap();
    let b = train(&init, &ds, &contexts, &TrainConfig { seed: 9, ..config() }).unwrap();
    let order = |h: &[gsr_core::train::HistoryRow]| h.iter().filter_map(|r| r.sample_idx).collect::<Vec<_>>();
    assert_ne!(order(&a.history), order(&b.history));
}

#[test]
fn noiseless_data_keeps_error_small() {
    let ds = generate(&spec(0.0), 4).unwrap();
    let init = Model::Dau(DauParams::init(Variant::Tv, Accel::Evd, 3, 0));
    let contexts = ds.contexts(Accel::Evd).unwrap();
    let out = train(&init, &ds, &contexts, &config()).unwrap();
    let rmse = evaluate_model(&out.model, &ds, &contexts, Split::Test).unwrap().mean;
    assert!(rmse.is_finite() && rmse < 0.5, "{rmse}");
}

#[test]
fn cheb_model_trains_on_sensor_graph() {
    let mut s = spec(0.3);
    s.graph = SynthKind::sensor();
    s.signal = SignalKind::Pws;
    s.clusters = Some(4);
    let ds = generate(&s, 1).unwrap();
    let init = Model::Dau(DauParams::init(Variant::En, Accel::Cheb, 3, 12));
    let contexts = ds.contexts(Accel::Cheb).unwrap();
    let out = train(&init, &ds, &contexts, &config()).unwrap();
    let before = evaluate_model(&init, &ds, &contexts, Split::Test).unwrap().mean;
    let rmse = evaluate_model(&out.model, &ds, &contexts, Split::Test).unwrap().mean;
    assert!(rmse < before, "{rmse} vs {before}");
}
