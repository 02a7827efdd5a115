//! GraphDAU: unrolled ADMM graph signal denoiser with per-layer trainable
//! `(γ, β, α)`, in total-variation (TV) and elastic-net (EN) flavours over the
//! EVD or Chebyshev filter path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::context::{Accel, GraphContext};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::spectral::{cheb_fit, default_quadrature, kernel, kernel_dgamma, ChebFilter, SpectralDecomposition};
use crate::sparse::SparseSymmetricMatrix;

pub const DEFAULT_LAYERS: usize = 10;
pub const DEFAULT_ORDER: usize = 10;
pub const INIT_GAMMA: f64 = 1.0;
pub const INIT_BETA: f64 = 0.1;
pub const INIT_ALPHA: f64 = 0.9;

/// Regularisation flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Graph total variation `‖Mx‖₁`.
    Tv,
    /// Elastic net: `‖Mx‖₁` plus `‖Mx‖₂²`.
    En,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Tv => "TV",
            Variant::En => "EN",
        }
    }
}

/// Trainable parameters of one GraphDAU.
///
/// Serialises as `{"variant","accel","L","K"?,"gamma","beta","alpha"?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DauParams {
    pub variant: Variant,
    pub accel: Accel,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

impl DauParams {
    /// Untrained parameters at the default initial values.
    pub fn init(variant: Variant, accel: Accel, layers: usize, order: usize) -> Self {
        Self::constant(variant, accel, layers, order, INIT_GAMMA, INIT_BETA, INIT_ALPHA)
    }

    /// Every layer set to the same `(γ, β, α)`; `α` is ignored for TV.
    pub fn constant(
        variant: Variant,
        accel: Accel,
        layers: usize,
        order: usize,
        gamma: f64,
        beta: f64,
        alpha: f64,
    ) -> Self {
        Self {
            variant,
            accel,
            layers,
            order: (accel == Accel::Cheb).then_some(order),
            gamma: vec![gamma; layers],
            beta: vec![beta; layers],
            alpha: (variant == Variant::En).then(|| vec![alpha; layers]),
        }
    }

    /// Model name in the `GraphDAU-TV-E` style.
    pub fn name(&self) -> String {
        format!("GraphDAU-{}-{}", self.variant.tag(), self.accel.suffix())
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.layers;
        for (field, v) in [("gamma", &self.gamma), ("beta", &self.beta)] {
            if v.len() != l {
                return Err(Error::param(format!("`{field}` has {} entries, expected L = {l}", v.len())));
            }
        }
        if let Some(i) = self.gamma.iter().position(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::param(format!("`gamma[{i}]` must be positive, got {}", self.gamma[i])));
        }
        if let Some(i) = self.beta.iter().position(|&b| !(b >= 0.0 && b.is_finite())) {
            return Err(Error::param(format!("`beta[{i}]` must be non-negative, got {}", self.beta[i])));
        }
        match (self.variant, &self.alpha) {
            (Variant::Tv, Some(_)) => return Err(Error::param("`alpha` is only valid for the en variant")),
            (Variant::En, None) => return Err(Error::param("`alpha` is required for the en variant")),
            (Variant::En, Some(a)) => {
                if a.len() != l {
                    return Err(Error::param(format!("`alpha` has {} entries, expected L = {l}", a.len())));
                }
                if let Some(i) = a.iter().position(|&x| !(x > 0.0 && x <= 1.0)) {
                    return Err(Error::param(format!("`alpha[{i}]` must lie in (0, 1], got {}", a[i])));
                }
            }
            (Variant::Tv, None) => {}
        }
        match (self.accel, self.order) {
            (Accel::Cheb, None) => Err(Error::param("`K` is required for the cheb accel")),
            (Accel::Cheb, Some(0)) => Err(Error::param("`K` must be at least 1")),
            (Accel::Evd, Some(_)) => Err(Error::param("`K` is only valid for the cheb accel")),
            _ => Ok(()),
        }
    }

    /// `α_ℓ`, or 1 for TV.
    pub fn alpha_at(&self, layer: usize) -> f64 {
        self.alpha.as_ref().map_or(1.0, |a| a[layer])
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: Self = serde_json::from_str(&text)?;
        p.validate()?;
        Ok(p)
    }
}

/// Number of trainable scalars: `2L` (TV) or `3L` (EN).
pub fn dau_param_count(p: &DauParams) -> usize {
    match p.variant {
        Variant::Tv => 2 * p.layers,
        Variant::En => 3 * p.layers,
    }
}

/// `sgn(x)·max(|x| − τ, 0)`.
#[inline]
pub fn soft(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Elementwise soft-thresholding.
pub fn soft_threshold(x: &[f64], tau: f64) -> Result<Vec<f64>> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::param(format!("threshold must be non-negative, got {tau}")));
    }
    Ok(x.iter().map(|&v| soft(v, tau)).collect())
}

/// Cached intermediates of one unrolled layer.
#[derive(Debug, Clone)]
pub struct LayerRecord {
    pub y_tilde: Vec<f64>,
    /// `Uᵀ ỹ` on the EVD path.
    pub y_tilde_hat: Option<Vec<f64>>,
    pub x: Vec<f64>,
    /// Pre-threshold argument `M x + u`.
    pub v_tilde: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

/// Per-layer cache captured by a forward pass for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct LayerTrace {
    pub layers: Vec<LayerRecord>,
}

/// The `(I + L/γ)⁻¹` filter for one layer.
pub(crate) enum LayerFilter<'a> {
    Evd {
        decomp: &'a SpectralDecomposition,
        gamma: f64,
    },
    Cheb {
        laplacian: &'a SparseSymmetricMatrix,
        filter: ChebFilter,
    },
}

impl<'a> LayerFilter<'a> {
    pub(crate) fn new(ctx: &'a GraphContext, params: &DauParams, gamma: f64) -> Result<Self> {
        match params.accel {
            Accel::Evd => Ok(LayerFilter::Evd {
                decomp: ctx.decomposition()?,
                gamma,
            }),
            Accel::Cheb => {
                let order = params.order.unwrap_or(DEFAULT_ORDER);
                Ok(LayerFilter::Cheb {
                    laplacian: ctx.laplacian(),
                    filter: cheb_fit(gamma, ctx.lambda_max()?, order, default_quadrature(order))?,
                })
            }
        }
    }

    /// Filtered signal, plus its spectral coefficients on the EVD path.
    pub(crate) fn apply(&self, y: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
        match self {
            LayerFilter::Evd { decomp, gamma } => {
                let yh = decomp.analyze(y);
                let c: Vec<f64> = yh
                    .iter()
                    .zip(decomp.values())
                    .map(|(v, &l)| v * kernel(*gamma, l))
                    .collect();
                (decomp.synthesize(&c), Some(yh))
            }
            LayerFilter::Cheb { laplacian, filter } => (filter.apply(laplacian, y), None),
        }
    }

    /// Adjoint of the filter applied to `g` (the filter is symmetric) and the
    /// scalar `gᵀ (∂F/∂γ) ỹ`.
    pub(crate) fn backward(&self, g: &[f64], y_tilde: &[f64], y_tilde_hat: Option<&[f64]>) -> (Vec<f64>, f64) {
        match self {
            LayerFilter::Evd { decomp, gamma } => {
                let gh = decomp.analyze(g);
                let owned;
                let yh = match y_tilde_hat {
                    Some(h) => h,
                    None => {
                        owned = decomp.analyze(y_tilde);
                        &owned
                    }
                };
                let mut dgamma = 0.0;
                let mut c = Vec::with_capacity(gh.len());
                for ((&gk, &yk), &l) in gh.iter().zip(yh).zip(decomp.values()) {
                    dgamma += gk * kernel_dgamma(*gamma, l) * yk;
                    c.push(gk * kernel(*gamma, l));
                }
                (decomp.synthesize(&c), dgamma)
            }
            LayerFilter::Cheb { laplacian, filter } => {
                let adj = filter.apply(laplacian, g);
                let dgamma = dot(g, &filter.apply_dgamma(laplacian, y_tilde));
                (adj, dgamma)
            }
        }
    }
}

fn check_inputs(params: &DauParams, y: &[f64], ctx: &GraphContext) -> Result<()> {
    params.validate()?;
    Error::check_len(ctx.n_nodes(), y.len(), "denoiser input")?;
    if !ctx.supports(params.accel) {
        return Err(Error::Config(format!(
            "{} needs the {:?} path but the graph context does not provide it",
            params.name(),
            params.accel
        )));
    }
    Ok(())
}

/// Run the `L` unrolled ADMM layers on `y`. Starts from `v = u = 0`.
pub fn graphdau_forward(
    params: &DauParams,
    y: &[f64],
    ctx: &GraphContext,
    capture: bool,
) -> Result<(Vec<f64>, Option<LayerTrace>)> {
    check_inputs(params, y, ctx)?;
    let m = ctx.incidence();
    let n_edges = m.n_edges();
    let mut v = vec![0.0; n_edges];
    let mut u = vec![0.0; n_edges];
    let mut x = y.to_vec();
    let mut trace = capture.then(LayerTrace::default);

    for layer in 0..params.layers {
        let gamma = params.gamma[layer];
        let beta = params.beta[layer];
        let alpha = params.alpha_at(layer);

        let mut y_tilde = y.to_vec();
        if n_edges > 0 {
            let diff: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a - b).collect();
            let back = m.apply_t(&diff);
            for (yt, b) in y_tilde.iter_mut().zip(&back) {
                *yt += b / gamma;
            }
        }
        let filter = LayerFilter::new(ctx, params, gamma)?;
        let (x_next, y_hat) = filter.apply(&y_tilde);
        x = x_next;

        let mx = m.apply(&x);
        let v_tilde: Vec<f64> = mx.iter().zip(&u).map(|(a, b)| a + b).collect();
        let v_next: Vec<f64> = v_tilde.iter().map(|&t| alpha * soft(t, beta)).collect();
        let u_next: Vec<f64> = v_tilde.iter().zip(&v_next).map(|(t, vn)| t - vn).collect();

        if let Some(tr) = trace.as_mut() {
            tr.layers.push(LayerRecord {
                y_tilde,
                y_tilde_hat: y_hat,
                x: x.clone(),
                v_tilde,
                v: v_next.clone(),
                u: u_next.clone(),
            });
        }
        v = v_next;
        u = u_next;
    }
    Ok((x, trace))
}

/// Forward pass without trace capture.
pub fn graphdau_denoise(params: &DauParams, y: &[f64], ctx: &GraphContext) -> Result<Vec<f64>> {
    graphdau_forward(params, y, ctx, false).map(|(x, _)| x)
}
