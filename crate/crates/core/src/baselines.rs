//! Fixed-parameter comparators and exhaustive hyperparameter search.

use serde::{Deserialize, Serialize};

use crate::context::{Accel, GraphContext};
use crate::dau::{graphdau_forward, DauParams, Variant, DEFAULT_ORDER};
use crate::data::{evaluate_rmse, RmseStats, Sample};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::nest::{inverse_step_unchecked, DegradationOp};
use crate::par;
use crate::spectral::{eigendecompose_dense, SpectralDecomposition};

/// `U diag(exp(−τλ)) Uᵀ y`.
pub fn heat_diffusion(y: &[f64], tau: f64, decomp: &SpectralDecomposition) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param(format!("tau must be positive, got {tau}")));
    }
    Error::check_len(decomp.dim(), y.len(), "heat diffusion input")?;
    Ok(decomp.apply_response(y, |l| (-tau * l).exp()))
}

/// The `GraphDAU` parameters equivalent to `iters` ADMM iterations with
/// constant `γ`, `β = γλ₁` and `α = 1/(1 + λ₂γ)`.
pub fn admm_params(gamma: f64, lambda1: f64, lambda2: f64, iters: usize, accel: Accel) -> Result<DauParams> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
        return Err(Error::param("lambda1 and lambda2 must be non-negative"));
    }
    if iters == 0 {
        return Err(Error::param("iters must be at least 1"));
    }
    let variant = if lambda2 > 0.0 { Variant::En } else { Variant::Tv };
    Ok(DauParams::constant(
        variant,
        accel,
        iters,
        DEFAULT_ORDER,
        gamma,
        gamma * lambda1,
        1.0 / (1.0 + lambda2 * gamma),
    ))
}

/// ADMM with fixed parameters, run through the same forward pass as the
/// trainable denoiser. Uses the exact filter when `ctx` has one.
pub fn admm_fixed(y: &[f64], gamma: f64, lambda1: f64, lambda2: f64, iters: usize, ctx: &GraphContext) -> Result<Vec<f64>> {
    let accel = if ctx.supports(Accel::Evd) { Accel::Evd } else { Accel::Cheb };
    let p = admm_params(gamma, lambda1, lambda2, iters, accel)?;
    graphdau_forward(&p, y, ctx, false).map(|r| r.0)
}

/// Plug-and-play ADMM with constant `ρ` and a heat-diffusion denoiser.
pub fn pnp_fixed(
    y: &[f64],
    h: &DegradationOp,
    rho: f64,
    tau: f64,
    iters: usize,
    ctx: &GraphContext,
) -> Result<Vec<f64>> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::param(format!("rho must be positive, got {rho}")));
    }
    if iters == 0 {
        return Err(Error::param("iters must be at least 1"));
    }
    let n = ctx.n_nodes();
    Error::check_len(n, y.len(), "restorer input")?;
    h.check_len(n)?;
    let decomp = ctx.decomposition()?;
    let mut s = y.to_vec();
    let mut t = vec![0.0; n];
    let mut x = y.to_vec();
    for _ in 0..iters {
        x = inverse_step_unchecked(h, rho, y, &s, &t);
        let w: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a + b).collect();
        s = heat_diffusion(&w, tau, decomp)?;
        t = w.iter().zip(&s).map(|(a, b)| a - b).collect();
    }
    Ok(x)
}

/// Least-squares fit over the first `B` eigenvectors using observed nodes
/// only; the minimum-norm solution is taken when the restricted basis is
/// rank deficient.
pub fn bandlimited_interp(
    y: &[f64],
    mask: &DegradationOp,
    bandwidth: usize,
    decomp: &SpectralDecomposition,
) -> Result<Vec<f64>> {
    let n = decomp.dim();
    Error::check_len(n, y.len(), "interpolation input")?;
    mask.check_len(n)?;
    if bandwidth == 0 || bandwidth > n {
        return Err(Error::param(format!("bandwidth must lie in 1..={n}, got {bandwidth}")));
    }
    let observed: Vec<usize> = (0..n).filter(|&i| mask.diag(i) != 0.0).collect();
    if observed.is_empty() {
        return Err(Error::param("no observed nodes"));
    }
    let u = decomp.vectors();
    let b = bandwidth;
    // Normal equations AᵀA c = Aᵀy over the observed rows.
    let mut ata = DenseMatrix::zeros(b, b);
    let mut aty = vec![0.0; b];
    for &i in &observed {
        let row = &u.row(i)[..b];
        for j in 0..b {
            aty[j] += row[j] * y[i];
            for k in 0..=j {
                ata[(j, k)] += row[j] * row[k];
            }
        }
    }
    for j in 0..b {
        for k in 0..j {
            ata[(k, j)] = ata[(j, k)];
        }
    }
    let e = eigendecompose_dense(&ata)?;
    let top = e.values().iter().cloned().fold(0.0, f64::max);
    let cutoff = top * 1e-12 * b as f64;
    let proj = e.analyze(&aty);
    let scaled: Vec<f64> = proj
        .iter()
        .zip(e.values())
        .map(|(p, &l)| if l > cutoff { p / l } else { 0.0 })
        .collect();
    let c = e.synthesize(&scaled);
    Ok((0..n).map(|i| u.row(i)[..b].iter().zip(&c).map(|(a, b)| a * b).sum()).collect())
}

fn default_admm_iters() -> usize {
    10
}

fn default_pnp_iters() -> usize {
    8
}

/// A fully specified baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaselineSpec {
    HeatDiffusion {
        tau: f64,
    },
    AdmmFixed {
        gamma: f64,
        lambda1: f64,
        lambda2: f64,
        #[serde(default = "default_admm_iters")]
        iters: usize,
    },
    PnpFixed {
        rho: f64,
        tau: f64,
        #[serde(default = "default_pnp_iters")]
        iters: usize,
    },
    Bandlimited {
        bandwidth: usize,
    },
}

impl BaselineSpec {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineSpec::HeatDiffusion { .. } => "HD",
            BaselineSpec::AdmmFixed { .. } => "ADMM",
            BaselineSpec::PnpFixed { .. } => "PnP-HD",
            BaselineSpec::Bandlimited { .. } => "Bandlimited",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("`{name}` must be positive, got {v}")))
            }
        };
        match *self {
            BaselineSpec::HeatDiffusion { tau } => pos("tau", tau),
            BaselineSpec::AdmmFixed {
                gamma,
                lambda1,
                lambda2,
                iters,
            } => {
                pos("gamma", gamma)?;
                if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
                    return Err(Error::param("`lambda1`/`lambda2` must be non-negative"));
                }
                if iters == 0 {
                    return Err(Error::param("`iters` must be at least 1"));
                }
                Ok(())
            }
            BaselineSpec::PnpFixed { rho, tau, iters } => {
                pos("rho", rho)?;
                pos("tau", tau)?;
                if iters == 0 {
                    return Err(Error::param("`iters` must be at least 1"));
                }
                Ok(())
            }
            BaselineSpec::Bandlimited { bandwidth } => {
                if bandwidth == 0 {
                    return Err(Error::param("`bandwidth` must be at least 1"));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, y: &[f64], h: &DegradationOp, ctx: &GraphContext) -> Result<Vec<f64>> {
        match *self {
            BaselineSpec::HeatDiffusion { tau } => heat_diffusion(y, tau, ctx.decomposition()?),
            BaselineSpec::AdmmFixed {
                gamma,
                lambda1,
                lambda2,
                iters,
            } => admm_fixed(y, gamma, lambda1, lambda2, iters, ctx),
            BaselineSpec::PnpFixed { rho, tau, iters } => pnp_fixed(y, h, rho, tau, iters, ctx),
            BaselineSpec::Bandlimited { bandwidth } => bandlimited_interp(y, h, bandwidth, ctx.decomposition()?),
        }
    }
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// Candidate values per hyperparameter; only those relevant to the template
/// kind are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineGrid {
    pub tau: Vec<f64>,
    pub gamma: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub rho: Vec<f64>,
    pub bandwidth: Vec<usize>,
}

impl Default for BaselineGrid {
    fn default() -> Self {
        Self {
            tau: logspace(0.01, 10.0, 15),
            gamma: logspace(0.05, 20.0, 10),
            lambda1: logspace(0.001, 1.0, 8),
            lambda2: logspace(0.001, 1.0, 8),
            rho: logspace(0.05, 20.0, 10),
            bandwidth: Vec::new(),
        }
    }
}

impl BaselineGrid {
    /// Every lattice point for the template's kind, nested in field
    /// declaration order with the last field varying fastest. Iteration
    /// counts come from the template. A template with `lambda2 = 0` keeps it
    /// fixed at zero.
    pub fn lattice(&self, template: &BaselineSpec) -> Vec<BaselineSpec> {
        match *template {
            BaselineSpec::HeatDiffusion { .. } => {
                self.tau.iter().map(|&tau| BaselineSpec::HeatDiffusion { tau }).collect()
            }
            BaselineSpec::AdmmFixed { lambda2: l2t, iters, .. } => {
                let l2s = if l2t == 0.0 { vec![0.0] } else { self.lambda2.clone() };
                let mut out = Vec::new();
                for &gamma in &self.gamma {
                    for &lambda1 in &self.lambda1 {
                        for &lambda2 in &l2s {
                            out.push(BaselineSpec::AdmmFixed {
                                gamma,
                                lambda1,
                                lambda2,
                                iters,
                            });
                        }
                    }
                }
                out
            }
            BaselineSpec::PnpFixed { iters, .. } => {
                let mut out = Vec::new();
                for &rho in &self.rho {
                    for &tau in &self.tau {
                        out.push(BaselineSpec::PnpFixed { rho, tau, iters });
                    }
                }
                out
            }
            BaselineSpec::Bandlimited { bandwidth } => {
                if self.bandwidth.is_empty() {
                    vec![BaselineSpec::Bandlimited { bandwidth }]
                } else {
                    self.bandwidth
                        .iter()
                        .map(|&bandwidth| BaselineSpec::Bandlimited { bandwidth })
                        .collect()
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: BaselineSpec,
    pub best_rmse: f64,
    /// Position of `best` in the lattice.
    pub best_index: usize,
    /// Every lattice point with its mean validation RMSE, in lattice order.
    pub evaluated: Vec<(BaselineSpec, f64)>,
}

/// Mean per-sample RMSE of a baseline over `samples`.
pub fn evaluate_baseline(spec: &BaselineSpec, samples: &[Sample], contexts: &[GraphContext]) -> Result<RmseStats> {
    let v = evaluate_rmse(samples, contexts, |s, ctx| spec.apply(&s.degraded, &s.degradation(), ctx))?;
    Ok(RmseStats::from_values(&v))
}

/// Exhaustive search minimising mean validation RMSE. Lattice points are
/// evaluated in parallel; among equal scores the earliest point wins, and a
/// point whose evaluation fails or is non-finite is never selected.
pub fn grid_search(
    template: &BaselineSpec,
    grid: &BaselineGrid,
    samples: &[Sample],
    contexts: &[GraphContext],
) -> Result<GridResult> {
    let points = grid.lattice(template);
    if points.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    if samples.is_empty() {
        return Err(Error::Config("grid search needs a nonempty validation set".into()));
    }
    let scores = par::map_indexed(points.len(), |i| {
        let v = evaluate_rmse(samples, contexts, |s, ctx| points[i].apply(&s.degraded, &s.degradation(), ctx));
        match v {
            Ok(v) => RmseStats::from_values(&v).mean,
            Err(e) => {
                log::debug!("grid point {:?} failed: {e}", points[i]);
                f64::INFINITY
            }
        }
    });
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] || (!scores[best].is_finite() && s.is_finite()) {
            best = i;
        }
    }
    if !scores[best].is_finite() {
        return Err(Error::Numeric("no grid point produced a finite validation RMSE".into()));
    }
    Ok(GridResult {
        best: points[best].clone(),
        best_rmse: scores[best],
        best_index: best,
        evaluated: points.into_iter().zip(scores).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::spectral::apply_filter_evd;

    fn p2() -> GraphContext {
        GraphContext::full(&build_graph(2, vec![(0, 1, 1.0)]).unwrap()).unwrap()
    }

    #[test]
    fn heat_diffusion_p2() {
        let ctx = p2();
        let tau = std::f64::consts::LN_2 / 2.0;
        let out = heat_diffusion(&[1.0, 0.0], tau, ctx.decomposition().unwrap()).unwrap();
        assert!((out[0] - 0.75).abs() < 1e-12 && (out[1] - 0.25).abs() < 1e-12);
        let c = heat_diffusion(&[2.0, 2.0], 3.0, ctx.decomposition().unwrap()).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] - 2.0).abs() < 1e-12);
        assert!(heat_diffusion(&[1.0, 0.0], 0.0, ctx.decomposition().unwrap()).is_err());
    }

    #[test]
    fn admm_without_penalties_is_lowpass() {
        let ctx = p2();
        let y = [1.0, -0.5];
        let out = admm_fixed(&y, 0.7, 0.0, 0.0, 1, &ctx).unwrap();
        let lp = apply_filter_evd(ctx.decomposition().unwrap(), 0.7, &y).unwrap();
        assert_eq!(out, lp);
    }

    #[test]
    fn admm_matches_constant_dau() {
        let g = build_graph(4, vec![(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0)]).unwrap();
        let ctx = GraphContext::new(&g, Accel::Evd).unwrap();
        let y = [0.3, 1.2, -0.4, 2.0];
        let out = admm_fixed(&y, 2.0, 0.1, 0.3, 10, &ctx).unwrap();
        let p = DauParams::constant(Variant::En, Accel::Evd, 10, 0, 2.0, 0.2, 1.0 / 1.6);
        assert_eq!(out, graphdau_forward(&p, &y, &ctx, false).unwrap().0);
    }

    #[test]
    fn bandlimited_examples() {
        let g = build_graph(5, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)]).unwrap();
        let ctx = GraphContext::full(&g).unwrap();
        let d = ctx.decomposition().unwrap();
        let mask = DegradationOp::Mask(vec![false, true, false, false, false]);
        let out = bandlimited_interp(&[0.0, 3.0, 0.0, 0.0, 0.0], &mask, 1, d).unwrap();
        assert!(out.iter().all(|v| (v - 3.0).abs() < 1e-12));
        let y = [0.1, -2.0, 0.4, 1.0, 3.0];
        let full = bandlimited_interp(&y, &DegradationOp::Identity, 5, d).unwrap();
        for (a, b) in full.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
        let none = DegradationOp::Mask(vec![false; 5]);
        assert!(bandlimited_interp(&y, &none, 2, d).is_err());
    }

    #[test]
    fn pnp_with_vanishing_denoiser_returns_observation() {
        let ctx = p2();
        let y = [1.0, 3.0];
        let out = pnp_fixed(&y, &DegradationOp::Identity, 1.0, 1e-12, 8, &ctx).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-9 && (out[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn grid_ties_and_singletons() {
        let ctx = vec![p2()];
        let samples = vec![Sample {
            graph: 0,
            clean: vec![0.75, 0.25],
            degraded: vec![1.0, 0.0],
            mask: None,
        }];
        let tau = std::f64::consts::LN_2 / 2.0;
        let grid = BaselineGrid {
            tau: vec![0.1, tau, tau, 2.0],
            ..BaselineGrid::default()
        };
        let r = grid_search(&BaselineSpec::HeatDiffusion { tau: 1.0 }, &grid, &samples, &ctx).unwrap();
        assert_eq!(r.best, BaselineSpec::HeatDiffusion { tau });
        assert_eq!(r.evaluated[1].1, r.evaluated[2].1);
        assert_eq!(r.best_index, 1);
        let single = BaselineGrid {
            tau: vec![0.3],
            ..BaselineGrid::default()
        };
        let r = grid_search(&BaselineSpec::HeatDiffusion { tau: 1.0 }, &single, &samples, &ctx).unwrap();
        assert_eq!(r.best, BaselineSpec::HeatDiffusion { tau: 0.3 });
    }

    #[test]
    fn logspace_endpoints() {
        let v = logspace(0.01, 10.0, 15);
        assert_eq!(v.len(), 15);
        assert!((v[0] - 0.01).abs() < 1e-15 && (v[14] - 10.0).abs() < 1e-12);
    }
}
