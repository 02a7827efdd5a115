//! Truncated Chebyshev expansions of `h(λ) = γ/(γ+λ)` on `[0, λ_max]` and
//! their application through the three-term recurrence.

use std::f64::consts::PI;

use super::{kernel, kernel_dgamma};
use crate::error::{Error, Result};
use crate::sparse::SparseSymmetricMatrix;

/// Quadrature node count used when none is requested explicitly.
pub fn default_quadrature(order: usize) -> usize {
    (order + 1).max(64)
}

/// Degree-`K` Chebyshev approximation of the filter kernel, with the
/// `c₀/2` convention: `p(λ) = c₀/2 + Σₖ cₖ Tₖ(2λ/λ_max − 1)`.
///
/// `dgamma_coeffs` expand `∂h/∂γ` on the same quadrature, which makes them
/// the exact γ-derivative of `coeffs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebFilter {
    pub coeffs: Vec<f64>,
    pub dgamma_coeffs: Vec<f64>,
    pub lambda_max: f64,
    pub gamma: f64,
}

impl ChebFilter {
    /// The constant polynomial `p ≡ 1`.
    pub fn identity(lambda_max: f64) -> Self {
        Self {
            coeffs: vec![2.0],
            dgamma_coeffs: vec![0.0],
            lambda_max,
            gamma: f64::INFINITY,
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Evaluate the approximating polynomial at a scalar `λ`.
    pub fn eval(&self, lambda: f64) -> f64 {
        eval_series(&self.coeffs, self.lambda_max, lambda)
    }

    pub fn eval_dgamma(&self, lambda: f64) -> f64 {
        eval_series(&self.dgamma_coeffs, self.lambda_max, lambda)
    }

    /// `p(L) x`.
    pub fn apply(&self, l: &SparseSymmetricMatrix, x: &[f64]) -> Vec<f64> {
        apply_series(l, &self.coeffs, self.lambda_max, x)
    }

    /// `p'(L) x` where `p'` approximates `∂h/∂γ`.
    pub fn apply_dgamma(&self, l: &SparseSymmetricMatrix, x: &[f64]) -> Vec<f64> {
        apply_series(l, &self.dgamma_coeffs, self.lambda_max, x)
    }
}

/// Chebyshev coefficients of `f` on `[0, lambda_max]` from `q`-point
/// Gauss–Chebyshev quadrature.
fn fit_series(f: impl Fn(f64) -> f64, lambda_max: f64, order: usize, q: usize) -> Vec<f64> {
    let half = lambda_max / 2.0;
    let samples: Vec<(f64, f64)> = (0..q)
        .map(|j| {
            let theta = PI * (j as f64 + 0.5) / q as f64;
            (theta, f(half * (theta.cos() + 1.0)))
        })
        .collect();
    (0..=order)
        .map(|k| {
            let s: f64 = samples
                .iter()
                .map(|&(theta, fx)| fx * (k as f64 * theta).cos())
                .sum();
            2.0 * s / q as f64
        })
        .collect()
}

/// Fit the degree-`order` expansion of `γ/(γ+λ)` on `[0, lambda_max]`.
pub fn cheb_fit(gamma: f64, lambda_max: f64, order: usize, quadrature: usize) -> Result<ChebFilter> {
    if order < 1 {
        return Err(Error::param("Chebyshev order must be at least 1"));
    }
    if quadrature < order + 1 {
        return Err(Error::param(format!(
            "quadrature size {quadrature} must be at least order + 1 = {}",
            order + 1
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::param(format!("lambda_max must be positive, got {lambda_max}")));
    }
    Ok(ChebFilter {
        coeffs: fit_series(|x| kernel(gamma, x), lambda_max, order, quadrature),
        dgamma_coeffs: fit_series(|x| kernel_dgamma(gamma, x), lambda_max, order, quadrature),
        lambda_max,
        gamma,
    })
}

fn eval_series(c: &[f64], lambda_max: f64, lambda: f64) -> f64 {
    let t = 2.0 * lambda / lambda_max - 1.0;
    let mut prev = 1.0;
    let mut cur = t;
    let mut acc = 0.5 * c[0];
    for (k, &ck) in c.iter().enumerate().skip(1) {
        if k > 1 {
            let next = 2.0 * t * cur - prev;
            prev = cur;
            cur = next;
        }
        acc += ck * cur;
    }
    acc
}

/// Three-term recurrence on `L̃ = 2L/λ_max − I`.
fn apply_series(l: &SparseSymmetricMatrix, c: &[f64], lambda_max: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let a = 2.0 / lambda_max;
    let mut out: Vec<f64> = x.iter().map(|v| 0.5 * c[0] * v).collect();
    if c.len() == 1 {
        return out;
    }
    let mut prev = x.to_vec();
    let mut lx = vec![0.0; n];
    l.matvec_into(x, &mut lx);
    let mut cur: Vec<f64> = lx.iter().zip(x).map(|(a_lx, xi)| a * a_lx - xi).collect();
    for (o, ci) in out.iter_mut().zip(&cur) {
        *o += c[1] * ci;
    }
    for &ck in &c[2..] {
        l.matvec_into(&cur, &mut lx);
        for i in 0..n {
            let next = 2.0 * (a * lx[i] - cur[i]) - prev[i];
            prev[i] = cur[i];
            cur[i] = next;
            out[i] += ck * next;
        }
    }
    out
}

/// `p(L) x` for a fitted filter.
pub fn cheb_apply(l: &SparseSymmetricMatrix, filter: &ChebFilter, x: &[f64]) -> Result<Vec<f64>> {
    Error::check_len(l.dim(), x.len(), "Chebyshev filter input")?;
    Ok(filter.apply(l, x))
}
