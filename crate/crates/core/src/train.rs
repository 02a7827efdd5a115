//! Loss, Adam with decoupled weight decay, and the per-sample training loop.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::GraphContext;
use crate::data::{evaluate_rmse, Dataset, RmseStats, Split};
use crate::error::{Error, Result};
use crate::grad::GradBundle;
use crate::model::{Model, Problem};

/// `(1/N)‖x̂ − x*‖²` and its gradient `(2/N)(x̂ − x*)`.
pub fn loss_mse(x_hat: &[f64], x_star: &[f64]) -> Result<(f64, Vec<f64>)> {
    Error::check_len(x_star.len(), x_hat.len(), "loss inputs")?;
    let n = x_hat.len().max(1) as f64;
    let diff: Vec<f64> = x_hat.iter().zip(x_star).map(|(a, b)| a - b).collect();
    let value = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((value, diff.into_iter().map(|d| 2.0 * d / n).collect()))
}

/// Adam moments and schedule state.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub decay: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub skipped: u64,
}

impl OptimState {
    pub fn new(n_params: usize, lr: f64, decay: f64, weight_decay: f64) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr,
            decay,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            skipped: 0,
        }
    }

    /// One scheduler tick: `lr ← lr · decay`.
    pub fn end_epoch(&mut self) {
        self.lr *= self.decay;
    }
}

/// One Adam step with decoupled weight decay followed by projection onto the
/// feasible set. A non-finite gradient leaves everything untouched and
/// returns `Ok(false)`.
pub fn optimizer_step(state: &mut OptimState, model: &mut Model, grads: &GradBundle) -> Result<bool> {
    let g = grads.flatten();
    let mut p = model.flatten();
    if g.len() != p.len() || state.m.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: g.len(),
            context: "optimizer gradient",
        });
    }
    if g.iter().any(|v| !v.is_finite()) {
        state.skipped += 1;
        log::warn!("non-finite gradient at step {}; update skipped", state.step + 1);
        return Ok(false);
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..p.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        p[i] -= state.lr * state.weight_decay * p[i];
        p[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    model.set_flat(&p)?;
    model.project();
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Stop after this many validations without improvement.
    pub patience: Option<usize>,
    /// Iterations between validation passes.
    pub valid_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            batch_size: 1,
            lr: 0.02,
            lr_decay: 0.6,
            weight_decay: 1e-4,
            seed: 0,
            patience: None,
            valid_every: 25,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("`epochs` must be at least 1".into()));
        }
        if self.batch_size != 1 {
            return Err(Error::Config("only `batch_size` = 1 is supported".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("`lr` must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay.is_finite()) {
            return Err(Error::Config("`lr_decay` must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("`weight_decay` must be non-negative".into()));
        }
        if self.valid_every == 0 {
            return Err(Error::Config("`valid_every` must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub epoch: usize,
    pub sample_idx: Option<usize>,
    pub train_loss: Option<f64>,
    pub valid_rmse: Option<f64>,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the best validation RMSE.
    pub model: Model,
    pub best_valid_rmse: f64,
    pub best_iteration: usize,
    pub history: Vec<HistoryRow>,
}

impl TrainOutcome {
    /// `(iteration, valid RMSE)` for every validation pass.
    pub fn validation_curve(&self) -> Vec<(usize, f64)> {
        self.history
            .iter()
            .filter_map(|r| r.valid_rmse.map(|v| (r.iteration, v)))
            .collect()
    }
}

pub fn write_history(path: &Path, history: &[HistoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    for r in history {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Mean per-sample RMSE of `model` over `split`.
pub fn evaluate_model(model: &Model, ds: &Dataset, contexts: &[GraphContext], split: Split) -> Result<RmseStats> {
    let v = evaluate_rmse(ds.split(split), contexts, |s, ctx| {
        model.restore(ctx, &s.degraded, &s.degradation())
    })?;
    Ok(RmseStats::from_values(&v))
}

/// Sequential per-sample training with best-on-validation snapshotting.
/// `contexts` is index-aligned with `ds.graphs`.
pub fn train(model: &Model, ds: &Dataset, contexts: &[GraphContext], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    model.validate()?;
    ds.validate()?;
    if contexts.len() != ds.graphs.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.graphs.len(),
            actual: contexts.len(),
            context: "graph contexts",
        });
    }
    let train_range = ds.meta.splits.range(Split::Train);
    if train_range.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    if ds.split(Split::Valid).is_empty() {
        return Err(Error::Config("validation split is empty".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = model.clone();
    let mut state = OptimState::new(current.param_count(), config.lr, config.lr_decay, config.weight_decay);
    let mut history = Vec::new();

    let v0 = evaluate_model(&current, ds, contexts, Split::Valid)?.mean;
    history.push(HistoryRow {
        iteration: 0,
        epoch: 0,
        sample_idx: None,
        train_loss: None,
        valid_rmse: Some(v0),
        lr: state.lr,
    });
    let mut best = (v0, current.clone(), 0usize);
    let mut since_best = 0usize;
    let mut iteration = 0usize;
    let mut order: Vec<usize> = train_range.collect();

    'epochs: for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for (pos, &idx) in order.iter().enumerate() {
            let s = &ds.samples[idx];
            let h = s.degradation();
            let prob = Problem {
                ctx: &contexts[s.graph],
                y: &s.degraded,
                h: &h,
                target: &s.clean,
            };
            let (loss, grads) = current.loss_and_grad(&prob)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training diverged: loss {loss} at iteration {} (sample {idx})",
                    iteration + 1
                )));
            }
            let lr = state.lr;
            optimizer_step(&mut state, &mut current, &grads)?;
            iteration += 1;

            let epoch_end = pos + 1 == order.len();
            let valid = if iteration.is_multiple_of(config.valid_every) || epoch_end {
                let v = evaluate_model(&current, ds, contexts, Split::Valid)?.mean;
                if v < best.0 {
                    best = (v, current.clone(), iteration);
                    since_best = 0;
                } else {
                    since_best += 1;
                }
                Some(v)
            } else {
                None
            };
            history.push(HistoryRow {
                iteration,
                epoch,
                sample_idx: Some(idx),
                train_loss: Some(loss),
                valid_rmse: valid,
                lr,
            });
            if config.patience.is_some_and(|p| since_best > p) {
                log::info!("early stop at iteration {iteration}");
                break 'epochs;
            }
        }
        state.end_epoch();
    }
    if state.skipped > 0 {
        log::warn!("{} optimizer steps skipped for non-finite gradients", state.skipped);
    }
    Ok(TrainOutcome {
        model: best.1,
        best_valid_rmse: best.0,
        best_iteration: best.2,
        history,
    })
}
