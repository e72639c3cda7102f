//! Acceptance suite: one test per release criterion, each printing a single
//! PASS line (run with `--nocapture` to see them). Every tolerance is pinned
//! here; a red test is a release blocker.

use fedpaq_cli::output::render_metrics_csv;
use fedpaq_core::fed::{
    self, run, BandwidthSpec, CostSpec, InitSpec, ProblemSpec, RunConfig, ScheduleKind,
};
use fedpaq_core::objectives::{grad_on_indices, loss, Objective};
use fedpaq_core::quantizer::{
    decode, default_variance_param, dequantize, encode, encoded_bits, quantize, QuantizedVector,
    QuantizerMode,
};
use fedpaq_core::rng::{derive_seed, stream, Purpose};
use fedpaq_core::{cost, linalg, stats, theory};
use rand::Rng;

fn cost_ratio_100() -> CostSpec {
    CostSpec {
        bandwidth: BandwidthSpec::TargetRatio(100.0),
        shift_s_per_grad: 0.001,
        scale: 1000.0,
        float_bits: 32,
    }
}

/// Criterion 1 — quantizer statistics: over 20 random vectors (p = 64) and
/// s ∈ {1, 4, 16}, with 10⁵ draws each, per-coordinate bias stays within its
/// 3-standard-error band up to the expected multiplicity (0.27% of 3840
/// bands, checked at its binomial ceiling, with no band beyond 5σ), and the
/// empirical variance ratio stays within 1.05 of min(p/s², √p/s).
#[test]
fn criterion_01_quantizer_statistics() {
    let dim = 64;
    let draws = 100_000;
    let vectors = 20;
    let mut rng = stream(0xACC01, Purpose::Estimation, 0, 0);
    let dirs: Vec<Vec<f64>> = (0..vectors)
        .map(|_| {
            (0..dim)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        })
        .collect();

    let mut bands = 0usize;
    let mut exceed = 0usize;
    let mut worst_z: f64 = 0.0;
    let mut worst_var_margin: f64 = 0.0;
    for &s in &[1u32, 4, 16] {
        let var_bound = default_variance_param(dim, s);
        for x in &dirs {
            let nsq = linalg::sq_norm(x);
            let mut sums = vec![0.0; dim];
            let mut sq_sums = vec![0.0; dim];
            let mut dist_acc = 0.0;
            for _ in 0..draws {
                let y = dequantize(&quantize(x, s, &mut rng).unwrap());
                let mut d2 = 0.0;
                for i in 0..dim {
                    sums[i] += y[i];
                    sq_sums[i] += y[i] * y[i];
                    let d = y[i] - x[i];
                    d2 += d * d;
                }
                dist_acc += d2;
            }
            for i in 0..dim {
                let mean = sums[i] / draws as f64;
                let var = (sq_sums[i] / draws as f64 - mean * mean).max(0.0);
                let se = (var / draws as f64).sqrt();
                let z = if se == 0.0 {
                    if (mean - x[i]).abs() > 1e-12 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    (mean - x[i]).abs() / se
                };
                bands += 1;
                if z > 3.0 {
                    exceed += 1;
                }
                worst_z = worst_z.max(z);
            }
            let ratio = dist_acc / draws as f64 / nsq;
            worst_var_margin = worst_var_margin.max(ratio / var_bound);
            assert!(
                ratio <= var_bound * 1.05,
                "s = {s}: variance ratio {ratio} exceeds 1.05·{var_bound}"
            );
        }
    }
    let nominal = 0.0027;
    let ceiling = nominal + 4.0 * (nominal * (1.0 - nominal) / bands as f64).sqrt();
    let frac = exceed as f64 / bands as f64;
    assert!(
        frac <= ceiling,
        "bias: {exceed}/{bands} bands beyond 3σ (fraction {frac:.4}, ceiling {ceiling:.4})"
    );
    assert!(
        worst_z <= 5.0,
        "bias: worst standardized deviation {worst_z:.2}σ"
    );
    println!(
        "ACCEPTANCE 1 PASS — quantizer statistics: 3σ exceedance {frac:.4} ≤ {ceiling:.4} \
         (worst z {worst_z:.2}), worst variance ratio/bound {worst_var_margin:.3} ≤ 1.05"
    );
}

/// Criterion 2 — codec exactness: 10⁴ random quantized vectors round-trip
/// bit-exactly and every encoded length matches the fixed-width layout
/// formula.
#[test]
fn criterion_02_codec_exactness() {
    let mut rng = stream(0xACC02, Purpose::Estimation, 0, 0);
    for case in 0..10_000 {
        let p = rng.random_range(1..128);
        let s: u32 = rng.random_range(1..64);
        let f = if case % 2 == 0 { 64 } else { 32 };
        // Half come straight from the quantizer, half are constructed with a
        // wire-representable norm so the 32-bit layout is also exact.
        let q = if case % 4 < 2 {
            let x: Vec<f64> = (0..p)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            quantize(&x, s, &mut rng).unwrap()
        } else {
            let norm = if f == 32 {
                (rng.random::<f32>() + 0.5) as f64
            } else {
                rng.random::<f64>() + 0.5
            };
            let levels: Vec<u32> = (0..p).map(|_| rng.random_range(0..=s)).collect();
            let signs: Vec<i8> = levels
                .iter()
                .map(|&l| {
                    if l == 0 {
                        0
                    } else if rng.random::<bool>() {
                        1
                    } else {
                        -1
                    }
                })
                .collect();
            QuantizedVector::new(norm, signs, levels, s).unwrap()
        };
        let bytes = encode(&q, f).unwrap();
        let expect_bits = 64 + f as u64 + p as u64 * (1 + (32 - s.leading_zeros()) as u64);
        assert_eq!(
            encoded_bits(p, s, f),
            expect_bits,
            "length formula mismatch"
        );
        assert_eq!(
            bytes.len() as u64,
            expect_bits.div_ceil(8),
            "byte length mismatch"
        );
        let back = decode(&bytes).unwrap();
        if f == 64 || case % 4 >= 2 {
            assert_eq!(back, q, "case {case}: round trip not exact");
        }
        assert_eq!(
            encode(&back, f).unwrap(),
            bytes,
            "case {case}: bytes not stable"
        );
    }
    println!(
        "ACCEPTANCE 2 PASS — codec: 10⁴ round trips bit-exact, lengths match the layout formula"
    );
}

fn parallel_sgd_config(rounds: usize) -> RunConfig {
    RunConfig {
        problem: ProblemSpec::SyntheticLogReg {
            samples: 2000,
            dim: 20,
            lambda: 0.1,
            data_seed: 11,
        },
        nodes: 20,
        participants: 20,
        local_steps: 1,
        rounds,
        batch: 10,
        quantizer: QuantizerMode::Identity,
        schedule: ScheduleKind::Constant { eta: 0.05 },
        cost: cost_ratio_100(),
        seed: 0xACC03,
        init: InitSpec::Zero,
        shadow: false,
        threads: 0,
    }
}

/// Criterion 3 — degenerate equivalence: with τ = 1, identity quantization,
/// and full participation, 200 rounds of the federated loop match an
/// independently written minibatch parallel-SGD loop to the last bit.
#[test]
fn criterion_03_parallel_sgd_trajectory() {
    let rounds = 200;
    let cfg = parallel_sgd_config(rounds);
    let out = run(&cfg).unwrap();

    let prob = fedpaq_core::data::gen_synthetic_logreg(2000, 20, 0.1, 11).unwrap();
    let shards = fedpaq_core::data::partition_iid(&prob.data, 20, 11).unwrap();
    let obj = Objective::logistic(0.1).unwrap();
    let eta = 0.05;
    let batch = 10;
    let mut x = vec![0.0; 20];
    for k in 0..rounds {
        let mut sum = vec![0.0; 20];
        for (node, shard) in shards.iter().enumerate() {
            let mut r = stream(cfg.seed, Purpose::LocalSgd, node as u64, k as u64);
            let idx: Vec<usize> = (0..batch)
                .map(|_| r.random_range(0..shard.data.len()))
                .collect();
            let g = grad_on_indices(&obj, &x, &shard.data, &idx).unwrap();
            let mut local = x.clone();
            linalg::axpy(-eta, &g, &mut local);
            let delta = linalg::sub(&local, &x);
            linalg::axpy(1.0, &delta, &mut sum);
        }
        linalg::axpy(1.0 / 20.0, &sum, &mut x);
        let rec = &out.records[k];
        assert_eq!(
            rec.train_loss.to_bits(),
            loss(&obj, &x, &prob.data).unwrap().to_bits(),
            "trajectory diverged at round {k}"
        );
        assert_eq!(
            rec.dist_sq_opt.to_bits(),
            linalg::sq_dist(&x, &prob.x_star).to_bits(),
            "distance diverged at round {k}"
        );
    }
    assert_eq!(out.final_model, x);
    println!(
        "ACCEPTANCE 3 PASS — 200-round trajectory bit-identical to the parallel-SGD reference"
    );
}

fn convergence_config(total_iters: usize, seed: u64) -> RunConfig {
    RunConfig {
        problem: ProblemSpec::SyntheticLogReg {
            samples: 2000,
            dim: 20,
            lambda: 0.1,
            data_seed: 11,
        },
        nodes: 20,
        participants: 10,
        local_steps: 5,
        rounds: total_iters / 5,
        batch: 10,
        quantizer: QuantizerMode::LowPrecision { levels: 4 },
        schedule: ScheduleKind::Decay { coeff: 1.0 },
        cost: cost_ratio_100(),
        seed,
        init: InitSpec::Zero,
        shadow: false,
        threads: 0,
    }
}

fn mean_dists_per_round(total_iters: usize, seeds: usize) -> Vec<f64> {
    let rounds = total_iters / 5;
    let mut acc = vec![0.0; rounds];
    for s in 0..seeds {
        let cfg = convergence_config(total_iters, derive_seed(0xACC04, Purpose::Repeat, s as u64));
        let result = run(&cfg).unwrap();
        for (i, r) in result.records.iter().enumerate() {
            acc[i] += r.dist_sq_opt / seeds as f64;
        }
    }
    acc
}

/// Criterion 4 — strongly convex convergence order: mean squared distance to
/// the optimum at T ∈ {200, 400, 800} (20 seeds, decaying schedule) falls
/// with log-log slope at most −0.7.
#[test]
fn criterion_04_convergence_order() {
    let ts = [200usize, 400, 800];
    let finals: Vec<f64> = ts
        .iter()
        .map(|&t| *mean_dists_per_round(t, 20).last().unwrap())
        .collect();
    assert!(
        finals[0] > finals[1] && finals[1] > finals[2],
        "means not monotone: {finals:?}"
    );
    let xs: Vec<f64> = ts.iter().map(|&t| (t as f64).ln()).collect();
    let ys: Vec<f64> = finals.iter().map(|&m| m.ln()).collect();
    let mx = stats::mean(&xs);
    let my = stats::mean(&ys);
    let slope: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    assert!(
        slope <= -0.7,
        "log-log slope {slope:.3} > -0.7 ({finals:?})"
    );
    println!(
        "ACCEPTANCE 4 PASS — convergence order: E‖x_K − x*‖² = {:.2e} → {:.2e} → {:.2e}, slope {slope:.2} ≤ −0.7",
        finals[0], finals[1], finals[2]
    );
}

/// Criterion 5 — strongly convex bound dominance. The convergence-order setup
/// has k₀τ far beyond its horizon (μ = 0.1 makes k₀ ≈ 6400), so the bound is
/// vacuous there by its own `k ≥ k₀` proviso; that is asserted explicitly.
/// Dominance is then exercised on a configuration engineered to activate
/// (μ = 1 brings k₀τ inside T): with constants built from the empirical σ²
/// (2× safety), the bound must sit above the 20-seed empirical mean at every
/// logged round from k₀ on.
#[test]
fn criterion_05_bound_dominance() {
    // Part 1: the convergence-order setup never reaches k₀.
    let (report, _) = fed::theorem_report(&convergence_config(800, 1)).unwrap();
    let strongly_convex = report.unwrap().strongly_convex.unwrap();
    assert!(
        strongly_convex.k0_beyond_horizon,
        "expected k₀τ > T in the μ = 0.1 setup (k₀ = {})",
        strongly_convex.k0
    );

    // Part 2: engineered activation.
    let dominance_config = |seed: u64| RunConfig {
        problem: ProblemSpec::SyntheticLogReg {
            samples: 1000,
            dim: 20,
            lambda: 1.0,
            data_seed: 21,
        },
        nodes: 10,
        participants: 10,
        local_steps: 5,
        rounds: 100,
        batch: 10,
        quantizer: QuantizerMode::LowPrecision { levels: 4 },
        schedule: ScheduleKind::Decay { coeff: 1.0 },
        cost: cost_ratio_100(),
        seed,
        init: InitSpec::Zero,
        shadow: false,
        threads: 0,
    };

    let seeds = 20;
    let tau = 5;
    let rounds = 100;
    let mut mean_dist = vec![0.0; rounds];
    let mut sigma_sq_batch: f64 = 0.0;
    let mut smoothness: f64 = 0.0;
    let mut mu = f64::INFINITY;
    let mut q: f64 = 0.0;
    for s in 0..seeds {
        let cfg = dominance_config(derive_seed(0xACC05, Purpose::Repeat, s as u64));
        let result = run(&cfg).unwrap();
        let report = result.theorem.as_ref().unwrap();
        sigma_sq_batch = sigma_sq_batch.max(report.sigma_sq_batch);
        smoothness = smoothness.max(report.smoothness);
        mu = mu.min(report.strong_convexity.unwrap());
        q = report.q;
        for (i, r) in result.records.iter().enumerate() {
            mean_dist[i] += r.dist_sq_opt / seeds as f64;
        }
    }

    let constants =
        theory::strongly_convex_constants(q, 10, 10, smoothness, mu, 2.0 * sigma_sq_batch).unwrap();
    let k0 = theory::strongly_convex_k0(smoothness, mu, constants.b1, 10, tau).unwrap();
    assert!(
        (k0 as usize) * tau <= rounds * tau,
        "engineered setup failed to activate: k₀ = {k0}"
    );
    let initial_gap = mean_dist[k0 as usize - 1];
    let mut worst_margin = f64::INFINITY;
    for k in k0 as usize..=rounds {
        let bound =
            theory::strongly_convex_bound(k as u64, k0, tau, &constants, initial_gap).unwrap();
        let emp = mean_dist[k - 1];
        assert!(
            emp <= bound,
            "dominance violated at round {k}: empirical {emp} > bound {bound}"
        );
        worst_margin = worst_margin.min(bound / emp);
    }
    println!(
        "ACCEPTANCE 5 PASS — bound dominance: vacuous leg flagged (k₀ = {}), active leg holds \
         from k₀ = {k0} to {rounds} (min bound/empirical {worst_margin:.0})",
        strongly_convex.k0
    );
}

fn mlp_config(total_iters: usize, seed: u64) -> RunConfig {
    RunConfig {
        problem: ProblemSpec::SyntheticMulticlass {
            samples: 1000,
            dim: 10,
            classes: 3,
            teacher_hidden: 12,
            hidden: vec![16],
            data_seed: 9,
        },
        nodes: 10,
        participants: 10,
        local_steps: 2,
        rounds: total_iters / 2,
        batch: 10,
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

/// Criterion 6 — non-convex condition and trend: the period length satisfies
/// τ ≤ τ_max at T = 1024 (at T = 64 the bound admits no integer period, which
/// must be flagged), and the run-averaged squared gradient norm of the
/// virtual iterate average improves from T = 64 to T = 1024 for every one of
/// 20 seeds.
#[test]
fn criterion_06_nonconvex_condition_and_trend() {
    let seeds = 20;
    let mut improved = 0;
    let mut example = (0.0, 0.0);
    for s in 0..seeds {
        let seed = derive_seed(0xACC06, Purpose::Repeat, s as u64);
        let small = run(&mlp_config(64, seed)).unwrap();
        let large = run(&mlp_config(1024, seed)).unwrap();

        // The condition is satisfiable (and satisfied) at the large horizon…
        let stationarity_large = large
            .theorem
            .as_ref()
            .unwrap()
            .stationarity
            .as_ref()
            .unwrap();
        assert!(
            !stationarity_large.tau_violates_condition,
            "τ = 2 should satisfy τ_max = {:.3} at T = 1024",
            stationarity_large.tau_max
        );
        // …and unsatisfiable for any integer τ at T = 64.
        let stationarity_small = small
            .theorem
            .as_ref()
            .unwrap()
            .stationarity
            .as_ref()
            .unwrap();
        assert!(
            stationarity_small.tau_max < 1.0 && stationarity_small.tau_violates_condition,
            "expected τ_max < 1 at T = 64, got {:.3}",
            stationarity_small.tau_max
        );

        let avg = |r: &fed::RunResult| {
            let s = r.shadow_grad_sq.as_ref().unwrap();
            s.iter().sum::<f64>() / s.len() as f64
        };
        let (a, b) = (avg(&small), avg(&large));
        if b < a {
            improved += 1;
        }
        example = (a, b);
    }
    assert_eq!(
        improved, seeds,
        "stationarity must improve for every seed, got {improved}/{seeds}"
    );
    println!(
        "ACCEPTANCE 6 PASS — non-convex: τ condition satisfied at T = 1024, averaged ‖∇f(x̄)‖² \
         improved for {improved}/{seeds} seeds (e.g. {:.4} → {:.4})",
        example.0, example.1
    );
}

/// Criterion 7 — cost-model calibration: the shifted-exponential mean matches
/// τB(shift + 1/scale) within 1% over 10⁵ draws, the ratio/bandwidth
/// inversion round-trips to 1e−12 relative, and the 100:1 / 1000:1 ratio
/// configurations reproduce their targets exactly by construction.
#[test]
fn criterion_07_cost_model_calibration() {
    let params = cost::CostModelParams {
        bandwidth_bits_per_s: 16_000.0,
        shift_s_per_grad: 0.001,
        scale: 1000.0,
        float_bits: 32,
    };
    let mut rng = stream(0xACC07, Purpose::Compute, 0, 0);
    for &(tau, batch) in &[(1usize, 1usize), (5, 10)] {
        let n = 100_000;
        let mean = (0..n)
            .map(|_| cost::node_comp_time(tau, batch, &params, &mut rng))
            .sum::<f64>()
            / n as f64;
        let expected = (tau * batch) as f64 * (0.001 + 1.0 / 1000.0);
        let rel = (mean - expected).abs() / expected;
        assert!(rel < 0.01, "τ = {tau}, B = {batch}: mean off by {rel:.4}");
    }

    let mut worst_rt: f64 = 0.0;
    for &target in &[0.5, 100.0, 1000.0, 31_415.9] {
        let bw = cost::solve_bandwidth(100, target, 0.001, 1000.0, 32).unwrap();
        let p = cost::CostModelParams {
            bandwidth_bits_per_s: bw,
            shift_s_per_grad: 0.001,
            scale: 1000.0,
            float_bits: 32,
        };
        let back = cost::comm_comp_ratio(100, &p);
        worst_rt = worst_rt.max(((back - target) / target).abs());
    }
    assert!(worst_rt <= 1e-12, "ratio round-trip error {worst_rt:e}");

    for &target in &[100.0, 1000.0] {
        let bw = cost::solve_bandwidth(227, target, 0.001, 1000.0, 32).unwrap();
        let p = cost::CostModelParams {
            bandwidth_bits_per_s: bw,
            shift_s_per_grad: 0.001,
            scale: 1000.0,
            float_bits: 32,
        };
        let back = cost::comm_comp_ratio(227, &p);
        assert!(((back - target) / target).abs() <= 1e-12);
    }
    println!(
        "ACCEPTANCE 7 PASS — cost model: means within 1%, ratio round-trip ≤ 1e−12 \
         (worst {worst_rt:.1e}), 100:1 and 1000:1 exact by construction"
    );
}

fn tradeoff_config(tau: usize, seed: u64) -> RunConfig {
    RunConfig {
        problem: ProblemSpec::SyntheticLogReg {
            samples: 10_000,
            dim: 100,
            lambda: 0.1,
            data_seed: 7,
        },
        nodes: 50,
        participants: 25,
        local_steps: tau,
        rounds: 100 / tau,
        batch: 10,
        quantizer: QuantizerMode::LowPrecision { levels: 1 },
        schedule: ScheduleKind::Decay { coeff: 0.1 },
        cost: cost_ratio_100(),
        seed,
        init: InitSpec::Zero,
        shadow: false,
        threads: 0,
    }
}

/// Criterion 8 — communication/computation tradeoff: on the convex task at a
/// 100:1 ratio and a fixed budget of T = 100 iterations, sweeping
/// τ ∈ {1, 2, 5, 10, 50} with (s, r) = (1, 25), the time to reach a mid-range
/// loss target is minimized at an interior period length: both τ = 1 (pays
/// for every round's uplink) and τ = 50 (drifts locally) are strictly beaten.
#[test]
fn criterion_08_comm_comp_tradeoff() {
    let taus = [1usize, 2, 5, 10, 50];
    let seed = 0xACC08;
    let mut results = Vec::new();
    for &tau in &taus {
        let out = run(&tradeoff_config(tau, seed)).unwrap();
        results.push(out.records);
    }

    // Mid-range target: halfway (in loss) between the start (ln 2 at x₀ = 0)
    // and the best final loss across the sweep.
    let initial = std::f64::consts::LN_2;
    let best_final = results
        .iter()
        .map(|r| r.last().unwrap().train_loss)
        .fold(f64::INFINITY, f64::min);
    assert!(best_final < initial, "no configuration made progress");
    let target = initial - 0.5 * (initial - best_final);

    let times: Vec<Option<f64>> = results
        .iter()
        .map(|r| fedpaq_cli::output::time_to_target(r, target))
        .collect();
    let as_inf = |t: &Option<f64>| t.unwrap_or(f64::INFINITY);
    let (best_idx, best_time) = times
        .iter()
        .enumerate()
        .min_by(|a, b| as_inf(a.1).total_cmp(&as_inf(b.1)))
        .map(|(i, t)| (i, as_inf(t)))
        .unwrap();
    let tau_star = taus[best_idx];
    assert!(
        tau_star > 1 && tau_star < 50,
        "optimal τ must be interior, got {tau_star} (times: {times:?})"
    );
    assert!(
        best_time < as_inf(&times[0]),
        "τ = 1 not dominated: {times:?}"
    );
    assert!(
        best_time < as_inf(&times[4]),
        "τ = 50 not dominated: {times:?}"
    );
    println!(
        "ACCEPTANCE 8 PASS — tradeoff: target {target:.4} reached fastest at τ* = {tau_star} \
         in {best_time:.2}s (τ = 1: {:.2}s, τ = 50: {})",
        as_inf(&times[0]),
        times[4].map_or("never".into(), |t| format!("{t:.2}s"))
    );
}

/// Criterion 9 — sampling uniformity: all C(4,2) participant subsets occur
/// with equal probability (chi-square p > 0.01 over 6·10⁴ draws).
#[test]
fn criterion_09_sampling_uniformity() {
    let mut counts = std::collections::BTreeMap::new();
    let mut rng = stream(0xACC09, Purpose::Sampling, 0, 0);
    let n_draws = 60_000;
    for _ in 0..n_draws {
        let s = fed::sample_participants(4, 2, &mut rng).unwrap();
        *counts.entry(s).or_insert(0u32) += 1;
    }
    assert_eq!(counts.len(), 6, "not all subsets observed");
    let observed: Vec<f64> = counts.values().map(|&c| c as f64).collect();
    let expected = vec![n_draws as f64 / 6.0; 6];
    let stat = stats::chi_square_statistic(&observed, &expected);
    let p = stats::chi_square_sf(stat, 5);
    assert!(p > 0.01, "chi-square p = {p:.4} (stat {stat:.2})");
    println!("ACCEPTANCE 9 PASS — sampling uniformity: chi-square p = {p:.3} > 0.01 over all 2-of-4 subsets");
}

/// Criterion 10 — determinism: each configuration family exercised by this
/// suite (convex quantized with partial participation, identity parallel
/// SGD, shadow-mode MLP, and the tradeoff sweep point) produces byte-identical
/// metrics when re-run, at 1 and at 8 worker threads.
#[test]
fn criterion_10_determinism() {
    let mut families: Vec<(&str, RunConfig)> = vec![
        ("convergence", convergence_config(200, 42)),
        ("parallel-sgd", parallel_sgd_config(50)),
        ("mlp-shadow", mlp_config(64, 42)),
        ("tradeoff", tradeoff_config(10, 42)),
    ];
    for (name, cfg) in families.iter_mut() {
        let mut csvs = Vec::new();
        for threads in [1usize, 8] {
            cfg.threads = threads;
            for _rerun in 0..2 {
                let result = run(cfg).unwrap();
                csvs.push(render_metrics_csv(&result.records));
            }
        }
        assert!(
            csvs.windows(2).all(|w| w[0] == w[1]),
            "{name}: metrics differ across reruns/thread counts"
        );
    }
    println!(
        "ACCEPTANCE 10 PASS — determinism: 4 config families × 2 reruns × {{1, 8}} threads all byte-identical"
    );
}
