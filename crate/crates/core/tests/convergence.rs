//! Convergence-shape invariants of the training loop: the strongly convex
//! error decays like 1/T (log-log slope at most −0.7) and the non-convex
//! run-averaged gradient norm shrinks as the iteration budget grows.

use fedpaq_core::fed::{
    run, BandwidthSpec, CostSpec, InitSpec, ProblemSpec, RunConfig, ScheduleKind,
};
use fedpaq_core::quantizer::QuantizerMode;
use fedpaq_core::rng::{derive_seed, Purpose};

fn convex_config(tau: usize, rounds: usize, seed: u64) -> RunConfig {
    RunConfig {
        problem: ProblemSpec::SyntheticLogReg {
            samples: 500,
            dim: 10,
            lambda: 0.2,
            data_seed: 77,
        },
        nodes: 10,
        participants: 5,
        local_steps: tau,
        rounds,
        batch: 5,
        quantizer: QuantizerMode::LowPrecision { levels: 4 },
        schedule: ScheduleKind::Decay { coeff: 1.0 },
        cost: CostSpec {
            bandwidth: BandwidthSpec::TargetRatio(100.0),
            shift_s_per_grad: 0.001,
            scale: 1000.0,
            float_bits: 32,
        },
        seed,
        init: InitSpec::Zero,
        shadow: false,
        threads: 0,
    }
}

fn mean_final_sq_dist(tau: usize, total_iters: usize, seeds: usize) -> f64 {
    let rounds = total_iters / tau;
    assert_eq!(rounds * tau, total_iters);
    let mut acc = 0.0;
    for s in 0..seeds {
        let cfg = convex_config(tau, rounds, derive_seed(4000, Purpose::Repeat, s as u64));
        let out = run(&cfg).unwrap();
        acc += out.records.last().unwrap().dist_sq_opt;
    }
    acc / seeds as f64
}

/// Least-squares slope of ln(mse) against ln(T).
fn log_log_slope(ts: &[usize], mses: &[f64]) -> f64 {
    let xs: Vec<f64> = ts.iter().map(|&t| (t as f64).ln()).collect();
    let ys: Vec<f64> = mses.iter().map(|&m| m.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[test]
fn strongly_convex_error_decays_monotonically_and_fast() {
    let ts = [100usize, 200, 400];
    for tau in [1usize, 2, 5] {
        let mses: Vec<f64> = ts.iter().map(|&t| mean_final_sq_dist(tau, t, 20)).collect();
        assert!(
            mses[0] > mses[1] && mses[1] > mses[2],
            "τ = {tau}: error not monotone in T: {mses:?}"
        );
        let slope = log_log_slope(&ts, &mses);
        assert!(
            slope <= -0.7,
            "τ = {tau}: log-log slope {slope:.3} too flat ({mses:?})"
        );
    }
}

fn mlp_config(total_iters: usize, tau: usize, seed: u64) -> RunConfig {
    RunConfig {
        problem: ProblemSpec::SyntheticMulticlass {
            samples: 300,
            dim: 6,
            classes: 3,
            teacher_hidden: 8,
            hidden: vec![8],
            data_seed: 55,
        },
        nodes: 6,
        participants: 6,
        local_steps: tau,
        rounds: total_iters / tau,
        batch: 5,
        quantizer: QuantizerMode::LowPrecision { levels: 4 },
        schedule: ScheduleKind::Flat {
            coeff: 1.0,
            smoothness: None,
        },
        cost: CostSpec {
            bandwidth: BandwidthSpec::TargetRatio(1000.0),
            shift_s_per_grad: 0.001,
            scale: 1000.0,
            float_bits: 32,
        },
        seed,
        init: InitSpec::Gaussian { std: 0.3 },
        shadow: true,
        threads: 0,
    }
}

fn mean_stationarity(total_iters: usize, tau: usize, seeds: usize) -> f64 {
    let mut acc = 0.0;
    for s in 0..seeds {
        let cfg = mlp_config(
            total_iters,
            tau,
            derive_seed(8100, Purpose::Repeat, s as u64),
        );
        let out = run(&cfg).unwrap();
        let series = out.shadow_grad_sq.unwrap();
        assert_eq!(series.len(), total_iters);
        acc += series.iter().sum::<f64>() / series.len() as f64;
    }
    acc / seeds as f64
}

#[test]
fn nonconvex_stationarity_improves_with_iteration_budget() {
    let tau = 2;
    let g64 = mean_stationarity(64, tau, 12);
    let g256 = mean_stationarity(256, tau, 12);
    let g1024 = mean_stationarity(1024, tau, 12);
    assert!(
        g64 > g256 && g256 > g1024,
        "run-averaged ‖∇f(x̄)‖² not decreasing: {g64:.5} → {g256:.5} → {g1024:.5}"
    );
}
