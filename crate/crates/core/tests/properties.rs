mod common;

use common::props::{self, CASES};
use common::{dau, jittered, sensor};
use gsr_core::baselines::{bandlimited_interp, heat_diffusion};
use gsr_core::data::make_mask;
use gsr_core::grad::{DauGrads, GradBundle};
use gsr_core::spectral::apply_filter_evd;
use gsr_core::{optimizer_step, Accel, GraphContext, Model, OptimState, Variant};
use proptest::prelude::*;

#[test]
fn permutation_equivariance() {
    props::permutation_equivariance(CASES).unwrap();
}

#[test]
fn dc_preservation() {
    props::dc_preservation(CASES).unwrap();
}

#[test]
fn incidence_gram_is_laplacian() {
    props::incidence_gram(CASES).unwrap();
}

#[test]
fn soft_threshold_algebra() {
    props::soft_threshold_algebra(CASES).unwrap();
}

#[test]
fn grid_search_is_exhaustive() {
    props::grid_exhaustiveness(CASES).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig { cases: CASES, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn heat_diffusion_is_linear_symmetric_contractive(
        n in 8usize..30,
        seed in any::<u64>(),
        tau in 0.001f64..10.0,
        a in prop::collection::vec(-3.0f64..3.0, 30),
        b in prop::collection::vec(-3.0f64..3.0, 30),
        c in -2.0f64..2.0,
    ) {
        let g = sensor(n, seed);
        let ctx = GraphContext::new(&g, Accel::Evd).unwrap();
        let d = ctx.decomposition().unwrap();
        let (a, b) = (&a[..n], &b[..n]);
        let ha = heat_diffusion(a, tau, d).unwrap();
        let hb = heat_diffusion(b, tau, d).unwrap();
        let mix: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + c * y).collect();
        let hm = heat_diffusion(&mix, tau, d).unwrap();
        for i in 0..n {
            prop_assert!((hm[i] - ha[i] - c * hb[i]).abs() < 1e-9);
        }
        let lhs: f64 = ha.iter().zip(b).map(|(x, y)| x * y).sum();
        let rhs: f64 = a.iter().zip(&hb).map(|(x, y)| x * y).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(norm(&ha) <= norm(a) * (1.0 + 1e-12));
    }

    #[test]
    fn evd_filter_is_contractive(n in 8usize..30, seed in any::<u64>(), gamma in 0.01f64..100.0,
                                 x in prop::collection::vec(-3.0f64..3.0, 30)) {
        let g = sensor(n, seed);
        let ctx = GraphContext::new(&g, Accel::Evd).unwrap();
        let out = apply_filter_evd(ctx.decomposition().unwrap(), gamma, &x[..n]).unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(norm(&out) <= norm(&x[..n]) * (1.0 + 1e-12));
    }

    #[test]
    fn bandlimited_is_idempotent(n in 10usize..40, seed in any::<u64>(), rate in 0.0f64..0.6,
                                 frac in 0.05f64..0.5, x in prop::collection::vec(-3.0f64..3.0, 40)) {
        let g = sensor(n, seed);
        let ctx = GraphContext::new(&g, Accel::Evd).unwrap();
        let d = ctx.decomposition().unwrap();
        let mask = make_mask(n, rate, seed).unwrap();
        let b = ((frac * n as f64) as usize).max(1);
        let y = mask.apply(&x[..n]);
        let once = bandlimited_interp(&y, &mask, b, d).unwrap();
        let twice = bandlimited_interp(&mask.apply(&once), &mask, b, d).unwrap();
        for (p, q) in once.iter().zip(&twice) {
            prop_assert!((p - q).abs() < 1e-7 * (1.0 + p.abs()), "{} vs {}", p, q);
        }
    }

    #[test]
    fn projection_keeps_parameters_feasible(seed in any::<u64>(), lr in 0.001f64..50.0,
                                            g in prop::collection::vec(-1e3f64..1e3, 9)) {
        let mut m = dau(Variant::En, Accel::Evd, 3, 0);
        jittered(&mut m, seed);
        let mut st = OptimState::new(9, lr, 0.6, 1e-4);
        let grads = GradBundle::Dau(DauGrads { gamma: g[..3].to_vec(), beta: g[3..6].to_vec(), alpha: Some(g[6..].to_vec()) });
        for _ in 0..3 {
            optimizer_step(&mut st, &mut m, &grads).unwrap();
            prop_assert!(m.validate().is_ok());
            for (v, k) in m.flatten().iter().zip(m.param_kinds()) {
                prop_assert_eq!(*v, k.project(*v));
            }
        }
        if let Model::Dau(p) = &m {
            prop_assert!(p.alpha.as_ref().unwrap().iter().all(|a| *a >= 1e-6 && *a <= 1.0));
        }
    }
}
