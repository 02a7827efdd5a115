//! Reverse-mode gradients through the unrolled GraphDAU and NestDAU
//! iterations, written out by hand from the captured forward traces.

use crate::context::GraphContext;
use crate::dau::{soft, DauParams, LayerFilter, LayerTrace};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::nest::{DegradationOp, NestParams, NestTrace};

/// Loss gradients wrt one GraphDAU's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DauGrads {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha: Option<Vec<f64>>,
}

impl DauGrads {
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.gamma);
        out.extend_from_slice(&self.beta);
        if let Some(a) = &self.alpha {
            out.extend_from_slice(a);
        }
    }
}

/// Loss gradients wrt NestDAU parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NestGrads {
    pub rho: Vec<f64>,
    pub denoisers: Vec<DauGrads>,
}

/// Gradients mirroring the structure of the parameter bundle.
#[derive(Debug, Clone, PartialEq)]
pub enum GradBundle {
    Dau(DauGrads),
    Nest(NestGrads),
}

impl GradBundle {
    /// Flat view in the same order as [`crate::model::Model::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            GradBundle::Dau(g) => g.flatten_into(&mut out),
            GradBundle::Nest(g) => {
                out.extend_from_slice(&g.rho);
                for d in &g.denoisers {
                    d.flatten_into(&mut out);
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// Backpropagate `upstream = ∂ℒ/∂x⁽ᴸ⁾` through a captured GraphDAU forward
/// pass. Returns parameter gradients and `∂ℒ/∂y`.
///
/// The soft-threshold derivative is taken as zero at `|ṽ| = β`.
pub fn graphdau_backward(
    params: &DauParams,
    trace: &LayerTrace,
    ctx: &GraphContext,
    upstream: &[f64],
) -> Result<(DauGrads, Vec<f64>)> {
    let l_count = params.layers;
    if trace.layers.len() != l_count {
        return Err(Error::param(format!(
            "trace has {} layers, parameters have {l_count}",
            trace.layers.len()
        )));
    }
    let n = ctx.n_nodes();
    Error::check_len(n, upstream.len(), "upstream gradient")?;
    let m = ctx.incidence();
    let n_edges = m.n_edges();

    let mut d_gamma = vec![0.0; l_count];
    let mut d_beta = vec![0.0; l_count];
    let mut d_alpha = vec![0.0; l_count];
    let mut d_input = vec![0.0; n];

    let mut gx = upstream.to_vec();
    let mut gv = vec![0.0; n_edges];
    let mut gu = vec![0.0; n_edges];

    for layer in (0..l_count).rev() {
        let rec = &trace.layers[layer];
        let gamma = params.gamma[layer];
        let beta = params.beta[layer];
        let alpha = params.alpha_at(layer);

        // u⁺ = ṽ − v⁺ and v⁺ = α·S_β(ṽ)
        let mut g_vt = gu.clone();
        let mut d_a = 0.0;
        let mut d_b = 0.0;
        for e in 0..n_edges {
            let g_v = gv[e] - gu[e];
            let vt = rec.v_tilde[e];
            d_a += g_v * soft(vt, beta);
            if vt.abs() > beta {
                d_b -= g_v * alpha * vt.signum();
                g_vt[e] += g_v * alpha;
            }
        }
        d_alpha[layer] = d_a;
        d_beta[layer] = d_b;

        // ṽ = M x⁺ + u
        if n_edges > 0 {
            let back = m.apply_t(&g_vt);
            for (g, b) in gx.iter_mut().zip(&back) {
                *g += b;
            }
        }

        // x⁺ = F_γ ỹ
        let filter = LayerFilter::new(ctx, params, gamma)?;
        let (g_yt, d_g) = filter.backward(&gx, &rec.y_tilde, rec.y_tilde_hat.as_deref());
        d_gamma[layer] = d_g;

        // ỹ = y + Mᵀ(v − u)/γ
        for (dy, g) in d_input.iter_mut().zip(&g_yt) {
            *dy += g;
        }
        let mut gv_prev = vec![0.0; n_edges];
        let mut gu_prev = g_vt;
        if layer > 0 && n_edges > 0 {
            let prev = &trace.layers[layer - 1];
            let mg = m.apply(&g_yt);
            let diff: Vec<f64> = prev.v.iter().zip(&prev.u).map(|(a, b)| a - b).collect();
            d_gamma[layer] -= dot(&mg, &diff) / (gamma * gamma);
            for e in 0..n_edges {
                let gd = mg[e] / gamma;
                gv_prev[e] = gd;
                gu_prev[e] -= gd;
            }
        }
        gv = gv_prev;
        gu = gu_prev;
        gx.iter_mut().for_each(|g| *g = 0.0);
    }

    Ok((
        DauGrads {
            gamma: d_gamma,
            beta: d_beta,
            alpha: params.alpha.as_ref().map(|_| d_alpha),
        },
        d_input,
    ))
}

/// Backpropagate through a captured NestDAU forward pass, chaining each
/// inner denoiser's input gradient through the `s`/`t` recursions.
/// Returns parameter gradients and `∂ℒ/∂y`.
pub fn nestdau_backward(
    params: &NestParams,
    trace: &NestTrace,
    h: &DegradationOp,
    ctx: &GraphContext,
    upstream: &[f64],
) -> Result<(NestGrads, Vec<f64>)> {
    let p_count = params.outer_layers;
    if trace.layers.len() != p_count {
        return Err(Error::param(format!(
            "trace has {} outer layers, parameters have {p_count}",
            trace.layers.len()
        )));
    }
    let n = ctx.n_nodes();
    Error::check_len(n, upstream.len(), "upstream gradient")?;
    let y = &trace.y;
    let zeros = vec![0.0; n];

    let mut d_rho = vec![0.0; p_count];
    let mut den_grads: Vec<Option<DauGrads>> = vec![None; p_count];
    let mut d_input = vec![0.0; n];

    let mut gx = upstream.to_vec();
    let mut gs = vec![0.0; n];
    let mut gt = vec![0.0; n];

    for p in (0..p_count).rev() {
        let rec = &trace.layers[p];
        let rho = params.rho[p];

        // t⁺ = w − s⁺, s⁺ = D(w)
        let gs_total: Vec<f64> = gs.iter().zip(&gt).map(|(a, b)| a - b).collect();
        let (dg, gw_den) = graphdau_backward(&params.denoisers[p], &rec.inner, ctx, &gs_total)?;
        den_grads[p] = Some(dg);
        let gw: Vec<f64> = gt.iter().zip(&gw_den).map(|(a, b)| a + b).collect();

        // w = x⁺ + t
        let gx_total: Vec<f64> = gx.iter().zip(&gw).map(|(a, b)| a + b).collect();
        let mut gt_prev = gw;

        // x⁺ = (h·y + ρ(s − t)) / (h + ρ)
        let (s_prev, t_prev) = if p == 0 {
            (y.as_slice(), zeros.as_slice())
        } else {
            (trace.layers[p - 1].s.as_slice(), trace.layers[p - 1].t.as_slice())
        };
        let mut gs_prev = vec![0.0; n];
        let mut d_r = 0.0;
        for i in 0..n {
            let hi = h.diag(i);
            let q = hi + rho;
            let g = gx_total[i];
            let ratio = rho / q;
            gs_prev[i] = g * ratio;
            gt_prev[i] -= g * ratio;
            d_r -= g * hi * (y[i] - (s_prev[i] - t_prev[i])) / (q * q);
            d_input[i] += g * hi / q;
        }
        d_rho[p] = d_r;

        gs = gs_prev;
        gt = gt_prev;
        gx.iter_mut().for_each(|g| *g = 0.0);
    }
    // s⁰ = y
    for (dy, g) in d_input.iter_mut().zip(&gs) {
        *dy += g;
    }

    Ok((
        NestGrads {
            rho: d_rho,
            denoisers: den_grads.into_iter().map(|g| g.expect("filled")).collect(),
        },
        d_input,
    ))
}
