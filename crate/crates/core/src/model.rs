//! A trainable model of either kind, with a flat parameter view used by the
//! optimizer and the finite-difference oracle.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::context::{Accel, GraphContext};
use crate::dau::{dau_param_count, graphdau_forward, DauParams};
use crate::error::{Error, Result};
use crate::grad::{graphdau_backward, nestdau_backward, DauGrads, GradBundle, NestGrads};
use crate::nest::{nest_param_count, nestdau_forward, DegradationOp, NestParams};
use crate::par;

/// Which constraint applies to a flat parameter slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Gamma,
    Beta,
    Alpha,
    Rho,
}

impl ParamKind {
    /// Clamp a value into the feasible set of this kind.
    pub fn project(self, v: f64) -> f64 {
        match self {
            ParamKind::Gamma | ParamKind::Rho => v.max(1e-6),
            ParamKind::Beta => v.max(0.0),
            ParamKind::Alpha => v.clamp(1e-6, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Model {
    Dau(DauParams),
    Nest(NestParams),
}

/// One supervised instance: observation `y`, degradation `h` and target.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub ctx: &'a GraphContext,
    pub y: &'a [f64],
    pub h: &'a DegradationOp,
    pub target: &'a [f64],
}

fn dau_flatten_into(p: &DauParams, out: &mut Vec<f64>) {
    out.extend_from_slice(&p.gamma);
    out.extend_from_slice(&p.beta);
    if let Some(a) = &p.alpha {
        out.extend_from_slice(a);
    }
}

fn dau_kinds_into(p: &DauParams, out: &mut Vec<ParamKind>) {
    out.extend(std::iter::repeat_n(ParamKind::Gamma, p.layers));
    out.extend(std::iter::repeat_n(ParamKind::Beta, p.layers));
    if p.alpha.is_some() {
        out.extend(std::iter::repeat_n(ParamKind::Alpha, p.layers));
    }
}

fn dau_read(p: &mut DauParams, flat: &[f64]) -> usize {
    let l = p.layers;
    p.gamma.copy_from_slice(&flat[..l]);
    p.beta.copy_from_slice(&flat[l..2 * l]);
    if let Some(a) = p.alpha.as_mut() {
        a.copy_from_slice(&flat[2 * l..3 * l]);
        3 * l
    } else {
        2 * l
    }
}

impl Model {
    pub fn name(&self) -> String {
        match self {
            Model::Dau(p) => p.name(),
            Model::Nest(p) => p.name(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Dau(p) => dau_param_count(p),
            Model::Nest(p) => nest_param_count(p),
        }
    }

    /// Acceleration path the model needs from its graph context.
    pub fn accel(&self) -> Accel {
        match self {
            Model::Dau(p) => p.accel,
            Model::Nest(p) => p.accel().unwrap_or(Accel::Evd),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Dau(p) => p.validate(),
            Model::Nest(p) => p.validate(),
        }
    }

    /// All trainable scalars in a fixed order: for a denoiser `γ`, `β`, then
    /// `α`; for a nest `ρ` followed by each denoiser.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        match self {
            Model::Dau(p) => dau_flatten_into(p, &mut out),
            Model::Nest(p) => {
                out.extend_from_slice(&p.rho);
                for d in &p.denoisers {
                    dau_flatten_into(d, &mut out);
                }
            }
        }
        out
    }

    pub fn param_kinds(&self) -> Vec<ParamKind> {
        let mut out = Vec::with_capacity(self.param_count());
        match self {
            Model::Dau(p) => dau_kinds_into(p, &mut out),
            Model::Nest(p) => {
                out.extend(std::iter::repeat_n(ParamKind::Rho, p.outer_layers));
                for d in &p.denoisers {
                    dau_kinds_into(d, &mut out);
                }
            }
        }
        out
    }

    /// Inverse of [`Model::flatten`].
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        Error::check_len(self.param_count(), flat.len(), "flat parameter vector")?;
        match self {
            Model::Dau(p) => {
                dau_read(p, flat);
            }
            Model::Nest(p) => {
                let n = p.outer_layers;
                p.rho.copy_from_slice(&flat[..n]);
                let mut off = n;
                for d in &mut p.denoisers {
                    off += dau_read(d, &flat[off..]);
                }
            }
        }
        Ok(())
    }

    /// Clamp every parameter into its feasible set.
    pub fn project(&mut self) {
        let kinds = self.param_kinds();
        let flat: Vec<f64> = self
            .flatten()
            .into_iter()
            .zip(kinds)
            .map(|(v, k)| k.project(v))
            .collect();
        self.set_flat(&flat).expect("same shape");
    }

    /// Restore `y`. A bare denoiser ignores `h`.
    pub fn restore(&self, ctx: &GraphContext, y: &[f64], h: &DegradationOp) -> Result<Vec<f64>> {
        match self {
            Model::Dau(p) => graphdau_forward(p, y, ctx, false).map(|r| r.0),
            Model::Nest(p) => nestdau_forward(p, y, h, ctx, false).map(|r| r.0),
        }
    }

    /// Loss value and its gradient wrt all parameters.
    pub fn loss_and_grad(&self, prob: &Problem<'_>) -> Result<(f64, GradBundle)> {
        match self {
            Model::Dau(p) => {
                let (x, tr) = graphdau_forward(p, prob.y, prob.ctx, true)?;
                let (loss, up) = crate::train::loss_mse(&x, prob.target)?;
                let (g, _) = graphdau_backward(p, &tr.expect("captured"), prob.ctx, &up)?;
                Ok((loss, GradBundle::Dau(g)))
            }
            Model::Nest(p) => {
                let (x, tr) = nestdau_forward(p, prob.y, prob.h, prob.ctx, true)?;
                let (loss, up) = crate::train::loss_mse(&x, prob.target)?;
                let (g, _) = nestdau_backward(p, &tr.expect("captured"), prob.h, prob.ctx, &up)?;
                Ok((loss, GradBundle::Nest(g)))
            }
        }
    }

    /// Loss value alone.
    pub fn loss(&self, prob: &Problem<'_>) -> Result<f64> {
        let x = self.restore(prob.ctx, prob.y, prob.h)?;
        crate::train::loss_mse(&x, prob.target).map(|r| r.0)
    }

    /// Zero gradients shaped like this model.
    pub fn zero_grads(&self) -> GradBundle {
        let dau = |p: &DauParams| DauGrads {
            gamma: vec![0.0; p.layers],
            beta: vec![0.0; p.layers],
            alpha: p.alpha.as_ref().map(|a| vec![0.0; a.len()]),
        };
        match self {
            Model::Dau(p) => GradBundle::Dau(dau(p)),
            Model::Nest(p) => GradBundle::Nest(NestGrads {
                rho: vec![0.0; p.outer_layers],
                denoisers: p.denoisers.iter().map(dau).collect(),
            }),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse either parameter layout; an object with a `P` key is a nest.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let model = if value.get("P").is_some() {
            Model::Nest(serde_json::from_value(value)?)
        } else {
            Model::Dau(serde_json::from_value(value)?)
        };
        model.validate()?;
        Ok(model)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

impl<'de> Deserialize<'de> for Model {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        let res = if value.get("P").is_some() {
            serde_json::from_value(value).map(Model::Nest)
        } else {
            serde_json::from_value(value).map(Model::Dau)
        };
        res.map_err(serde::de::Error::custom)
    }
}

/// Worst relative disagreement between analytic gradients and central
/// differences with step `epsilon`, over every trainable scalar.
///
/// Each entry is `|a − n| / (|a| + |n| + 1e-12)`.
pub fn finite_diff_check(model: &Model, prob: &Problem<'_>, epsilon: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::param("epsilon must be positive"));
    }
    let (_, grads) = model.loss_and_grad(prob)?;
    let analytic = grads.flatten();
    let base = model.flatten();
    let errs = par::map_indexed(base.len(), |i| -> Result<f64> {
        let eval = |delta: f64| -> Result<f64> {
            let mut m = model.clone();
            let mut flat = base.clone();
            flat[i] += delta;
            m.set_flat(&flat)?;
            m.loss(prob)
        };
        let numeric = (eval(epsilon)? - eval(-epsilon)?) / (2.0 * epsilon);
        let a = analytic[i];
        Ok((a - numeric).abs() / (a.abs() + numeric.abs() + 1e-12))
    });
    let mut worst = 0.0f64;
    for e in errs {
        worst = worst.max(e?);
    }
    Ok(worst)
}
