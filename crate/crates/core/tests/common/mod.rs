#![allow(dead_code)]

pub mod props;

use gsr_core::data::{gen_signal, SignalKind};
use gsr_core::partition::partition;
use gsr_core::{synth_graph, Accel, DauParams, Graph, Model, NestParams, SynthKind, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sensor(n: usize, seed: u64) -> Graph {
    synth_graph(SynthKind::sensor(), n, seed).unwrap().graph
}

/// A piecewise-constant clean signal and a noisy copy.
pub fn noisy_pair(g: &Graph, seed: u64, sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let p = partition(g, 3, seed).unwrap();
    let clean = gen_signal(SignalKind::Pwc, g, Some(&p), seed).unwrap();
    let noisy = gsr_core::data::add_awgn(&clean, sigma, seed).unwrap();
    (clean, noisy)
}

/// Parameters jittered away from the defaults so layers differ.
pub fn jittered(model: &mut Model, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = model
        .flatten()
        .into_iter()
        .map(|v| v * rng.random_range(0.7..1.0))
        .collect();
    model.set_flat(&flat).unwrap();
}

pub fn dau(variant: Variant, accel: Accel, layers: usize, order: usize) -> Model {
    Model::Dau(DauParams::init(variant, accel, layers, order))
}

pub fn nest(variant: Variant, accel: Accel, p: usize, layers: usize, order: usize) -> Model {
    Model::Nest(NestParams::init(variant, accel, p, layers, order))
}
