//! NestDAU: unrolled Plug-and-Play ADMM with one GraphDAU denoiser per
//! outer layer and a diagonal degradation operator.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::context::{Accel, GraphContext};
use crate::dau::{dau_param_count, graphdau_forward, DauParams, LayerTrace, Variant};
use crate::error::{Error, Result};

pub const DEFAULT_OUTER_LAYERS: usize = 8;
pub const INIT_RHO: f64 = 1.0;

/// Degradation `H`: the identity (denoising) or a binary diagonal mask
/// (interpolation, `true` = observed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DegradationOp {
    Identity,
    Mask(Vec<bool>),
}

impl DegradationOp {
    /// Diagonal entry `h_i ∈ {0, 1}`.
    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        match self {
            DegradationOp::Identity => 1.0,
            DegradationOp::Mask(m) => {
                if m[i] {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn observed_count(&self, n: usize) -> usize {
        match self {
            DegradationOp::Identity => n,
            DegradationOp::Mask(m) => m.iter().filter(|&&b| b).count(),
        }
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        match self {
            DegradationOp::Identity => Ok(()),
            DegradationOp::Mask(m) => Error::check_len(n, m.len(), "degradation mask"),
        }
    }

    /// `H x`: masked entries are set to zero.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| self.diag(i) * v).collect()
    }
}

/// Trainable NestDAU parameters: one `ρ_p` and one GraphDAU per outer layer.
///
/// Serialises as `{"P","rho","denoisers"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestParams {
    #[serde(rename = "P")]
    pub outer_layers: usize,
    pub rho: Vec<f64>,
    pub denoisers: Vec<DauParams>,
}

impl NestParams {
    pub fn init(variant: Variant, accel: Accel, outer_layers: usize, layers: usize, order: usize) -> Self {
        Self {
            outer_layers,
            rho: vec![INIT_RHO; outer_layers],
            denoisers: (0..outer_layers)
                .map(|_| DauParams::init(variant, accel, layers, order))
                .collect(),
        }
    }

    pub fn name(&self) -> String {
        match self.denoisers.first() {
            Some(d) => format!("NestDAU-{}-{}", d.variant.tag(), d.accel.suffix()),
            None => "NestDAU".into(),
        }
    }

    pub fn accel(&self) -> Option<Accel> {
        self.denoisers.first().map(|d| d.accel)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.outer_layers;
        if self.rho.len() != p {
            return Err(Error::param(format!("`rho` has {} entries, expected P = {p}", self.rho.len())));
        }
        if self.denoisers.len() != p {
            return Err(Error::param(format!(
                "`denoisers` has {} entries, expected P = {p}",
                self.denoisers.len()
            )));
        }
        if let Some(i) = self.rho.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::param(format!("`rho[{i}]` must be positive, got {}", self.rho[i])));
        }
        for (i, d) in self.denoisers.iter().enumerate() {
            d.validate()
                .map_err(|e| Error::param(format!("`denoisers[{i}]`: {e}")))?;
        }
        if let Some(first) = self.denoisers.first() {
            if self.denoisers.iter().any(|d| d.accel != first.accel) {
                return Err(Error::param("all denoisers must share one accel path"));
            }
        }
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: Self = serde_json::from_str(&text)?;
        p.validate()?;
        Ok(p)
    }
}

/// `Σ_p (count(denoiser_p) + 1)`, i.e. `(2L+1)P` or `(3L+1)P`.
pub fn nest_param_count(p: &NestParams) -> usize {
    p.denoisers.iter().map(|d| dau_param_count(d) + 1).sum()
}

/// Inverse step `(HᵀH + ρI)⁻¹(Hᵀy + ρ(s − t))` for diagonal binary `H`.
pub fn inverse_step(h: &DegradationOp, rho: f64, y: &[f64], s: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::param(format!("rho must be positive, got {rho}")));
    }
    let n = y.len();
    Error::check_len(n, s.len(), "inverse step s")?;
    Error::check_len(n, t.len(), "inverse step t")?;
    h.check_len(n)?;
    Ok(inverse_step_unchecked(h, rho, y, s, t))
}

pub(crate) fn inverse_step_unchecked(h: &DegradationOp, rho: f64, y: &[f64], s: &[f64], t: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let hi = h.diag(i);
            let z = s[i] - t[i];
            z + hi * (y[i] - z) / (hi + rho)
        })
        .collect()
}

/// Intermediates of one outer layer.
#[derive(Debug, Clone)]
pub struct OuterRecord {
    pub x: Vec<f64>,
    /// Denoiser input `x + t`.
    pub w: Vec<f64>,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub inner: LayerTrace,
}

#[derive(Debug, Clone)]
pub struct NestTrace {
    pub y: Vec<f64>,
    pub layers: Vec<OuterRecord>,
}

/// Run the `P` outer layers from `s = y`, `t = 0`. With `P = 0` the
/// observation itself is returned.
pub fn nestdau_forward(
    params: &NestParams,
    y: &[f64],
    h: &DegradationOp,
    ctx: &GraphContext,
    capture: bool,
) -> Result<(Vec<f64>, Option<NestTrace>)> {
    params.validate()?;
    let n = ctx.n_nodes();
    Error::check_len(n, y.len(), "restorer input")?;
    h.check_len(n)?;
    if let Some(a) = params.accel() {
        if !ctx.supports(a) {
            return Err(Error::Config(format!(
                "{} needs the {a:?} path but the graph context does not provide it",
                params.name()
            )));
        }
    }

    let mut s = y.to_vec();
    let mut t = vec![0.0; n];
    let mut x = y.to_vec();
    let mut trace = capture.then(|| NestTrace {
        y: y.to_vec(),
        layers: Vec::with_capacity(params.outer_layers),
    });
    for (rho, den) in params.rho.iter().zip(&params.denoisers) {
        x = inverse_step_unchecked(h, *rho, y, &s, &t);
        let w: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a + b).collect();
        let (s_next, inner) = graphdau_forward(den, &w, ctx, capture)?;
        let t_next: Vec<f64> = w.iter().zip(&s_next).map(|(a, b)| a - b).collect();
        if let Some(tr) = trace.as_mut() {
            tr.layers.push(OuterRecord {
                x: x.clone(),
                w,
                s: s_next.clone(),
                t: t_next.clone(),
                inner: inner.expect("captured"),
            });
        }
        s = s_next;
        t = t_next;
    }
    Ok((x, trace))
}

pub fn nestdau_restore(params: &NestParams, y: &[f64], h: &DegradationOp, ctx: &GraphContext) -> Result<Vec<f64>> {
    nestdau_forward(params, y, h, ctx, false).map(|(x, _)| x)
}
