//! The four driver commands behind the binary's subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use fedpaq_core::fed::{self, RunConfig, RunResult};
use fedpaq_core::quantizer::{
    decode, dequantize, encode, estimate_variance_ratio, quantize, QuantizerMode,
};
use fedpaq_core::rng::{derive_seed, stream, Purpose};
use fedpaq_core::{cost, stats, Result};
use rand::Rng;
use serde::Serialize;

use crate::config::FileConfig;
use crate::output::{
    self, render_aggregate_csv, render_metrics_csv, render_shadow_csv, RunSummary,
};

fn note(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn execute_one(config: &RunConfig, out_dir: &Path, target_loss: Option<f64>) -> Result<RunResult> {
    let started = Instant::now();
    let result = fed::run(config)?;
    let wall = started.elapsed().as_secs_f64();
    output::write_atomic(
        &out_dir.join("metrics.csv"),
        &render_metrics_csv(&result.records),
    )?;
    let summary = RunSummary::build(config, &result, target_loss, wall);
    output::write_atomic(&out_dir.join("summary.json"), &summary.to_json()?)?;
    if let Some(series) = &result.shadow_grad_sq {
        output::write_atomic(&out_dir.join("shadow.csv"), &render_shadow_csv(series))?;
    }
    Ok(result)
}

/// `run`: execute the configured run (or its repeats) and write metrics.
pub fn cmd_run(cfg: &FileConfig, out_dir: &Path, quiet: bool) -> Result<()> {
    if cfg.repeats == 1 {
        let result = execute_one(&cfg.run, out_dir, cfg.target_loss)?;
        for w in &result.warnings {
            note(quiet, format!("warning: {w}"));
        }
        if let Some(last) = result.records.last() {
            note(
                quiet,
                format!(
                    "run complete: {} rounds, loss {:.6}, simulated {:.3}s → {}",
                    last.round,
                    last.train_loss,
                    last.sim_time_s,
                    out_dir.display()
                ),
            );
        } else {
            note(
                quiet,
                format!("run complete: 0 rounds → {}", out_dir.display()),
            );
        }
        return Ok(());
    }

    let started = Instant::now();
    let mut all_records = Vec::with_capacity(cfg.repeats);
    let mut last_result = None;
    for rep in 0..cfg.repeats {
        let mut rep_cfg = cfg.run.clone();
        rep_cfg.seed = derive_seed(cfg.run.seed, Purpose::Repeat, rep as u64);
        let rep_dir = out_dir.join(format!("rep_{rep:03}"));
        let result = execute_one(&rep_cfg, &rep_dir, cfg.target_loss)?;
        all_records.push(result.records.clone());
        last_result = Some(result);
    }
    output::write_atomic(
        &out_dir.join("aggregate.csv"),
        &render_aggregate_csv(&all_records)?,
    )?;
    // Summary of the base config with the last repeat's report for reference.
    if let Some(result) = last_result {
        let summary = RunSummary::build(
            &cfg.run,
            &result,
            cfg.target_loss,
            started.elapsed().as_secs_f64(),
        );
        output::write_atomic(&out_dir.join("summary.json"), &summary.to_json()?)?;
    }
    note(
        quiet,
        format!("{} repeats aggregated → {}", cfg.repeats, out_dir.display()),
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepIndexEntry {
    index: usize,
    quantizer: QuantizerMode,
    participants: usize,
    tau: usize,
    rounds: usize,
    seed: u64,
    dir: String,
    final_train_loss: Option<f64>,
    final_sim_time_s: Option<f64>,
    time_to_target_s: Option<f64>,
}

fn point_dir_name(index: usize, cfg: &RunConfig) -> String {
    let q = match cfg.quantizer {
        QuantizerMode::Identity => "id".to_string(),
        QuantizerMode::LowPrecision { levels } => levels.to_string(),
    };
    format!(
        "point_{index:03}_s{q}_r{}_tau{}",
        cfg.participants, cfg.local_steps
    )
}

/// `sweep`: run the cross product of the sweep lists, one output directory
/// per point plus a combined index.
pub fn cmd_sweep(cfg: &FileConfig, out_dir: &Path, quiet: bool) -> Result<()> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| {
        fedpaq_core::Error::Config("this config has no [sweep] section; use `run`".into())
    })?;
    let points = sweep.points(&cfg.run);
    let mut index = Vec::with_capacity(points.len());
    for (i, mut point) in points.into_iter().enumerate() {
        point.seed = derive_seed(cfg.run.seed, Purpose::Sweep, i as u64);
        let dir_name = point_dir_name(i, &point);
        let point_dir = out_dir.join(&dir_name);
        let result = execute_one(&point, &point_dir, cfg.target_loss)?;
        let last = result.records.last();
        index.push(SweepIndexEntry {
            index: i,
            quantizer: point.quantizer,
            participants: point.participants,
            tau: point.local_steps,
            rounds: point.rounds,
            seed: point.seed,
            dir: dir_name.clone(),
            final_train_loss: last.map(|r| r.train_loss),
            final_sim_time_s: last.map(|r| r.sim_time_s),
            time_to_target_s: cfg
                .target_loss
                .and_then(|t| output::time_to_target(&result.records, t)),
        });
        note(
            quiet,
            format!(
                "point {i}: r = {}, τ = {}, final loss {:?} → {dir_name}",
                point.participants,
                point.local_steps,
                last.map(|r| r.train_loss)
            ),
        );
    }
    let json = serde_json::to_string_pretty(&index)
        .map_err(|e| fedpaq_core::Error::Format(format!("sweep index: {e}")))?;
    output::write_atomic(&out_dir.join("index.json"), &json)?;
    note(
        quiet,
        format!("sweep index → {}", out_dir.join("index.json").display()),
    );
    Ok(())
}

/// `theory`: print (and optionally write) the bound constants for a config
/// without running it.
pub fn cmd_theory(cfg: &FileConfig, out_dir: Option<&Path>, quiet: bool) -> Result<()> {
    let (report, warnings) = fed::theorem_report(&cfg.run)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| fedpaq_core::Error::Format(format!("constants: {e}")))?;
    if !quiet {
        println!("{json}");
        for w in &warnings {
            eprintln!("warning: {w}");
        }
    }
    if let Some(dir) = out_dir {
        output::write_atomic(&dir.join("theory.json"), &json)?;
    }
    Ok(())
}

struct CheckOutcome {
    failures: usize,
}

impl CheckOutcome {
    fn report(&mut self, name: &str, pass: bool, detail: String) {
        if pass {
            println!("PASS {name}: {detail}");
        } else {
            println!("FAIL {name}: {detail}");
            self.failures += 1;
        }
    }
}

/// `check`: run the built-in property suites and print one line per suite.
/// Returns the number of failing suites.
pub fn cmd_check(seed: u64) -> Result<usize> {
    let mut out = CheckOutcome { failures: 0 };

    // Quantizer unbiasedness, multiplicity-corrected over all bands.
    {
        let dim = 16;
        let draws = 20_000;
        let mut rng = stream(seed, Purpose::Estimation, 100, 0);
        let mut bands = 0usize;
        let mut exceed = 0usize;
        let mut worst_z: f64 = 0.0;
        for s in [1u32, 4] {
            for _ in 0..4 {
                let x: Vec<f64> = (0..dim)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect();
                let mut sums = vec![0.0; dim];
                let mut sq = vec![0.0; dim];
                for _ in 0..draws {
                    let y = dequantize(&quantize(&x, s, &mut rng)?);
                    for i in 0..dim {
                        sums[i] += y[i];
                        sq[i] += y[i] * y[i];
                    }
                }
                for i in 0..dim {
                    let mean = sums[i] / draws as f64;
                    let var = (sq[i] / draws as f64 - mean * mean).max(0.0);
                    let se = (var / draws as f64).sqrt();
                    let z = if se == 0.0 {
                        0.0
                    } else {
                        (mean - x[i]).abs() / se
                    };
                    bands += 1;
                    if z > 3.0 {
                        exceed += 1;
                    }
                    worst_z = worst_z.max(z);
                }
            }
        }
        let nominal = 0.0027;
        let ceiling = nominal + 4.0 * (nominal * (1.0 - nominal) / bands as f64).sqrt();
        let frac = exceed as f64 / bands as f64;
        out.report(
            "quantizer-unbiasedness",
            frac <= ceiling && worst_z <= 5.0,
            format!("3σ exceedance {frac:.4} (ceiling {ceiling:.4}), worst z {worst_z:.2}"),
        );
    }

    // Variance contract.
    {
        let mut rng = stream(seed, Purpose::Estimation, 101, 0);
        let mut worst_margin = f64::NEG_INFINITY;
        let mut pass = true;
        for &(p, s) in &[(8usize, 1u32), (32, 4)] {
            let ratio = estimate_variance_ratio(
                QuantizerMode::LowPrecision { levels: s },
                p,
                20_000,
                &mut rng,
            )?;
            let bound = QuantizerMode::LowPrecision { levels: s }.variance_param(p);
            worst_margin = worst_margin.max(ratio / bound);
            pass &= ratio <= bound * 1.05;
        }
        out.report(
            "quantizer-variance",
            pass,
            format!("worst ratio/bound {worst_margin:.3} (allowed 1.05)"),
        );
    }

    // Codec identity.
    {
        let mut rng = stream(seed, Purpose::Estimation, 102, 0);
        let mut pass = true;
        for _ in 0..1000 {
            let p = rng.random_range(1..48);
            let s = rng.random_range(1..24);
            let x: Vec<f64> = (0..p)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let q = quantize(&x, s, &mut rng)?;
            let back = decode(&encode(&q, 64)?)?;
            pass &= back == q;
        }
        out.report(
            "codec-round-trip",
            pass,
            "1000 random vectors, 64-bit norm".into(),
        );
    }

    // Participant sampling uniformity.
    {
        let mut counts = std::collections::BTreeMap::new();
        let mut rng = stream(seed, Purpose::Estimation, 103, 0);
        let n_draws = 60_000;
        for _ in 0..n_draws {
            let s = fed::sample_participants(4, 2, &mut rng)?;
            *counts.entry(s).or_insert(0u32) += 1;
        }
        let observed: Vec<f64> = counts.values().map(|&c| c as f64).collect();
        let expected = vec![n_draws as f64 / 6.0; 6];
        let stat = stats::chi_square_statistic(&observed, &expected);
        let p = stats::chi_square_sf(stat, 5);
        out.report(
            "sampling-uniformity",
            counts.len() == 6 && p > 0.01,
            format!("chi-square p = {p:.4} over all 2-of-4 subsets"),
        );
    }

    // Cost model calibration.
    {
        let params = cost::CostModelParams {
            bandwidth_bits_per_s: 16_000.0,
            shift_s_per_grad: 0.001,
            scale: 1000.0,
            float_bits: 32,
        };
        let mut rng = stream(seed, Purpose::Estimation, 104, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| cost::node_comp_time(1, 1, &params, &mut rng))
            .collect();
        let mean = stats::mean(&draws);
        let expected = 0.002;
        let mean_ok = (mean - expected).abs() / expected < 0.01;

        let bw = cost::solve_bandwidth(100, 100.0, 0.001, 1000.0, 32)?;
        let round_trip = cost::comm_comp_ratio(
            100,
            &cost::CostModelParams {
                bandwidth_bits_per_s: bw,
                shift_s_per_grad: 0.001,
                scale: 1000.0,
                float_bits: 32,
            },
        );
        let rt_ok = (round_trip - 100.0).abs() / 100.0 < 1e-12;
        out.report(
            "cost-calibration",
            mean_ok && rt_ok,
            format!("mean comp {mean:.6}s vs 0.002s; ratio round-trip {round_trip:.12}"),
        );
    }

    // End-to-end determinism across thread counts.
    {
        let base = RunConfig {
            problem: fed::ProblemSpec::SyntheticLogReg {
                samples: 120,
                dim: 6,
                lambda: 0.2,
                data_seed: 3,
            },
            nodes: 6,
            participants: 3,
            local_steps: 2,
            rounds: 6,
            batch: 4,
            quantizer: QuantizerMode::LowPrecision { levels: 2 },
            schedule: fed::ScheduleKind::Decay { coeff: 0.2 },
            cost: fed::CostSpec {
                bandwidth: fed::BandwidthSpec::TargetRatio(100.0),
                shift_s_per_grad: 0.001,
                scale: 1000.0,
                float_bits: 32,
            },
            seed,
            init: fed::InitSpec::Zero,
            shadow: false,
            threads: 1,
        };
        let a = fed::run(&base)?;
        let mut wide = base.clone();
        wide.threads = 8;
        let b = fed::run(&wide)?;
        let identical = render_metrics_csv(&a.records) == render_metrics_csv(&b.records);
        out.report(
            "determinism",
            identical,
            "metrics byte-identical at 1 and 8 worker threads".into(),
        );
    }

    Ok(out.failures)
}

/// Resolve the output directory: flag, else `FEDPAQ_OUT`, else `./out`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("FEDPAQ_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}
