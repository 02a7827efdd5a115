//! Randomised invariant suites shared by the property tests and the
//! acceptance run.

use gsr_core::baselines::{grid_search, BaselineGrid, BaselineSpec};
use gsr_core::data::Sample;
use gsr_core::nest::DegradationOp;
use gsr_core::{graph_operators, soft_threshold, Accel, GraphContext, Model, Variant};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dau, jittered, nest, sensor};

pub const CASES: u32 = 128;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn random_signal(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

fn pick_model(kind: u8, accel: Accel) -> Model {
    match kind % 4 {
        0 => dau(Variant::Tv, accel, 3, 12),
        1 => dau(Variant::En, accel, 3, 12),
        2 => nest(Variant::Tv, accel, 2, 2, 12),
        _ => nest(Variant::En, accel, 2, 2, 12),
    }
}

/// Relabelling the nodes relabels the output.
pub fn permutation_equivariance(cases: u32) -> Result<(), String> {
    let strat = (8usize..30, any::<u64>(), any::<u8>(), any::<bool>());
    runner(cases)
        .run(&strat, |(n, seed, kind, cheb)| {
            let g = sensor(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let gp = g.permuted(&perm).unwrap();
            let y = random_signal(n, &mut rng);
            let mut yp = vec![0.0; n];
            for i in 0..n {
                yp[perm[i]] = y[i];
            }
            let accel = if cheb { Accel::Cheb } else { Accel::Evd };
            let mut m = pick_model(kind, accel);
            jittered(&mut m, seed);
            let ctx = GraphContext::new(&g, accel).unwrap();
            let ctxp = GraphContext::new(&gp, accel).unwrap();
            let out = m.restore(&ctx, &y, &DegradationOp::Identity).unwrap();
            let outp = m.restore(&ctxp, &yp, &DegradationOp::Identity).unwrap();
            let tol = if cheb { 1e-6 } else { 1e-9 };
            for i in 0..n {
                let (a, b) = (out[i], outp[perm[i]]);
                check((a - b).abs() <= tol * (1.0 + a.abs()), || format!("node {i}: {a} vs {b}"))?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// A constant signal on a connected graph passes through the exact path
/// unchanged.
pub fn dc_preservation(cases: u32) -> Result<(), String> {
    let strat = (8usize..40, any::<u64>(), any::<u8>(), -5.0f64..5.0);
    runner(cases)
        .run(&strat, |(n, seed, kind, c)| {
            let g = sensor(n, seed);
            check(g.is_connected(), || "sensor graph disconnected".into())?;
            let ctx = GraphContext::new(&g, Accel::Evd).unwrap();
            let mut m = pick_model(kind, Accel::Evd);
            jittered(&mut m, seed);
            let y = vec![c; n];
            let out = m.restore(&ctx, &y, &DegradationOp::Identity).unwrap();
            check(out.iter().all(|v| (v - c).abs() < 1e-6), || format!("{out:?} vs {c}"))
        })
        .map_err(|e| e.to_string())
}

/// `MᵀM = L` entrywise.
pub fn incidence_gram(cases: u32) -> Result<(), String> {
    let strat = (3usize..30, any::<u64>());
    runner(cases)
        .run(&strat, |(n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.3) {
                        edges.push((i, j, rng.random_range(0.01..5.0)));
                    }
                }
            }
            let g = gsr_core::build_graph(n, edges).unwrap();
            let (l, m) = graph_operators(&g);
            let md = m.to_dense();
            let ld = l.to_dense();
            for i in 0..n {
                for j in 0..n {
                    let mtm: f64 = (0..md.rows()).map(|e| md[(e, i)] * md[(e, j)]).sum();
                    check((mtm - ld[(i, j)]).abs() < 1e-12 * (1.0 + ld[(i, j)].abs()), || {
                        format!("({i},{j}): {mtm} vs {}", ld[(i, j)])
                    })?;
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// `S_τ(x) = x − clamp(x, −τ, τ)`, sign preservation, shrinkage,
/// non-expansiveness and `S_0 = id`.
pub fn soft_threshold_algebra(cases: u32) -> Result<(), String> {
    let strat = (prop::collection::vec(-10.0f64..10.0, 1..40), 0.0f64..5.0);
    runner(cases)
        .run(&strat, |(x, tau)| {
            let s = soft_threshold(&x, tau).unwrap();
            let id = soft_threshold(&x, 0.0).unwrap();
            check(id == x, || "S_0 is not the identity".into())?;
            for (i, (&xi, &si)) in x.iter().zip(&s).enumerate() {
                check((si - (xi - xi.clamp(-tau, tau))).abs() < 1e-12, || format!("clamp identity at {i}"))?;
                check(si == 0.0 || si.signum() == xi.signum(), || format!("sign flip at {i}"))?;
                check(si.abs() <= xi.abs(), || format!("expansion at {i}"))?;
                check((xi.abs() <= tau) == (si == 0.0), || format!("dead zone at {i}"))?;
                for (&xj, &sj) in x.iter().zip(&s) {
                    check((si - sj).abs() <= (xi - xj).abs() + 1e-12, || "not non-expansive".into())?;
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// The grid optimum is no worse than any lattice point, and ties resolve to
/// the earliest one.
pub fn grid_exhaustiveness(cases: u32) -> Result<(), String> {
    let strat = (
        8usize..20,
        any::<u64>(),
        prop::collection::vec(0.01f64..5.0, 1..6),
        any::<bool>(),
    );
    runner(cases)
        .run(&strat, |(n, seed, mut taus, dup)| {
            if dup {
                let t = taus[0];
                taus.push(t);
            }
            let g = sensor(n, seed);
            let ctx = vec![GraphContext::new(&g, Accel::Evd).unwrap()];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<Sample> = (0..3)
                .map(|_| {
                    let clean = random_signal(n, &mut rng);
                    let degraded = clean.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
                    Sample {
                        graph: 0,
                        clean,
                        degraded,
                        mask: None,
                    }
                })
                .collect();
            let grid = BaselineGrid {
                tau: taus.clone(),
                ..BaselineGrid::default()
            };
            let r = grid_search(&BaselineSpec::HeatDiffusion { tau: 1.0 }, &grid, &samples, &ctx).unwrap();
            check(r.evaluated.len() == taus.len(), || "lattice size".into())?;
            for (i, (_, v)) in r.evaluated.iter().enumerate() {
                check(r.best_rmse <= *v, || format!("point {i} beats the optimum"))?;
                if i < r.best_index {
                    check(*v > r.best_rmse, || format!("earlier tie at {i} not preferred"))?;
                }
            }
            check(r.evaluated[r.best_index].1 == r.best_rmse, || "best index mismatch".into())
        })
        .map_err(|e| e.to_string())
}
