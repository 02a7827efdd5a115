//! Laplacian eigendecomposition and the two filtering paths for the kernel
//! `h(λ) = γ / (γ + λ)`: exact spectral filtering and Chebyshev polynomial
//! approximation.

mod cheb;
mod eigen;

pub use cheb::{cheb_apply, cheb_fit, default_quadrature, ChebFilter};
pub use eigen::{eigendecompose, eigendecompose_dense, SpectralDecomposition};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::sparse::SparseSymmetricMatrix;

/// Low-pass kernel `γ / (γ + λ)`.
#[inline]
pub fn kernel(gamma: f64, lambda: f64) -> f64 {
    gamma / (gamma + lambda)
}

/// `∂/∂γ [γ / (γ + λ)] = λ / (γ + λ)²`.
#[inline]
pub fn kernel_dgamma(gamma: f64, lambda: f64) -> f64 {
    lambda / ((gamma + lambda) * (gamma + lambda))
}

/// `U diag(γ/(γ+λₖ)) Uᵀ x`, i.e. `(I + L/γ)⁻¹ x`.
pub fn apply_filter_evd(decomp: &SpectralDecomposition, gamma: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    Error::check_len(decomp.dim(), x.len(), "filter input")?;
    Ok(decomp.apply_response(x, |lambda| kernel(gamma, lambda)))
}

const POWER_ITERS: usize = 500;
const POWER_TOL: f64 = 1e-10;
const SAFETY: f64 = 1.01;

/// Upper estimate of the largest Laplacian eigenvalue: power iteration
/// scaled by 1.01 and clamped to the Gershgorin bound `2·max degree`.
/// Returns 1.0 for the zero matrix.
///
/// The iteration starts from the centred diagonal of `L`, which makes the
/// estimate independent of node order; graphs with a constant diagonal fall
/// back to a fixed pseudo-random start.
pub fn estimate_lambda_max(l: &SparseSymmetricMatrix) -> f64 {
    let bound = l.max_abs_row_sum();
    if bound == 0.0 {
        return 1.0;
    }
    let n = l.dim();
    let diag: Vec<f64> = (0..n).map(|i| l.get(i, i)).collect();
    let mean = diag.iter().sum::<f64>() / n as f64;
    let mut v: Vec<f64> = diag.iter().map(|d| d - mean).collect();
    if norm2(&v) <= 1e-9 * bound {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        v = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    }
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERS {
        l.matvec_into(&v, &mut w);
        let rayleigh = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let converged = (rayleigh - estimate).abs() <= POWER_TOL * rayleigh.abs();
        estimate = rayleigh;
        if converged {
            break;
        }
    }
    if estimate <= 0.0 {
        return bound;
    }
    (estimate * SAFETY).min(bound)
}
