//! Plot-ready output files: one metrics CSV per run with a fixed column set,
//! a JSON summary with the config echo and theorem constants, and aggregate
//! bands for repeated runs. All files are written atomically (temp + rename)
//! and are byte-stable for a fixed config.

use std::fs;
use std::path::Path;

use fedpaq_core::fed::{RoundRecord, RunConfig, RunResult, StepsizeSchedule};
use fedpaq_core::theory::TheoremReport;
use fedpaq_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Fixed column set of every metrics file.
pub const CSV_HEADER: &str =
    "round,iter,sim_time_s,comm_time_s,comp_time_s,train_loss,grad_norm,dist_sq_opt,bits_uplink_cum";

/// Shortest round-trippable decimal for a float; NaN prints as `NaN`.
fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn render_metrics_csv(records: &[RoundRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.round,
            r.iter,
            fmt(r.sim_time_s),
            fmt(r.comm_time_s),
            fmt(r.comp_time_s),
            fmt(r.train_loss),
            fmt(r.grad_norm),
            fmt(r.dist_sq_opt),
            r.bits_uplink_cum,
        ));
    }
    out
}

/// Parse a metrics CSV back into records (the participant hash is not part
/// of the file and comes back as 0).
pub fn parse_metrics_csv(text: &str) -> Result<Vec<RoundRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("metrics csv: empty file".into()))?;
    if header != CSV_HEADER {
        return Err(Error::Format(format!(
            "metrics csv: unexpected header `{header}`"
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Format(format!(
                "metrics csv: row {} has {} fields",
                i + 1,
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("metrics csv: bad float `{s}`")))
        };
        records.push(RoundRecord {
            round: fields[0]
                .parse()
                .map_err(|_| Error::Format("metrics csv: bad round".into()))?,
            iter: fields[1]
                .parse()
                .map_err(|_| Error::Format("metrics csv: bad iter".into()))?,
            sim_time_s: parse_f(fields[2])?,
            comm_time_s: parse_f(fields[3])?,
            comp_time_s: parse_f(fields[4])?,
            train_loss: parse_f(fields[5])?,
            grad_norm: parse_f(fields[6])?,
            dist_sq_opt: parse_f(fields[7])?,
            bits_uplink_cum: fields[8]
                .parse()
                .map_err(|_| Error::Format("metrics csv: bad bit count".into()))?,
            participants_hash: 0,
        });
    }
    Ok(records)
}

/// First cumulative simulated time at which the training loss reaches the
/// target, or `None` if it never does.
pub fn time_to_target(records: &[RoundRecord], target_loss: f64) -> Option<f64> {
    records
        .iter()
        .find(|r| r.train_loss <= target_loss)
        .map(|r| r.sim_time_s)
}

/// Write with a temp-file + rename so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub round: usize,
    pub iter: usize,
    pub sim_time_s: f64,
    pub train_loss: f64,
    pub grad_norm: f64,
    pub dist_sq_opt: f64,
    pub bits_uplink_cum: u64,
}

impl FinalMetrics {
    fn from_record(r: &RoundRecord) -> Self {
        FinalMetrics {
            round: r.round,
            iter: r.iter,
            sim_time_s: r.sim_time_s,
            train_loss: r.train_loss,
            grad_norm: r.grad_norm,
            dist_sq_opt: r.dist_sq_opt,
            bits_uplink_cum: r.bits_uplink_cum,
        }
    }
}

/// The run summary written next to each metrics file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub schedule: StepsizeSchedule,
    pub theorem: Option<TheoremReport>,
    #[serde(rename = "final")]
    pub final_metrics: Option<FinalMetrics>,
    pub target_loss: Option<f64>,
    pub time_to_target_s: Option<f64>,
    /// Run average of `‖∇f(x̄)‖²` when global-view logging was on.
    pub shadow_avg_grad_sq: Option<f64>,
    pub warnings: Vec<String>,
    /// Real time the simulation itself took; the only field that varies
    /// between identical runs.
    pub wall_clock_s: f64,
}

impl RunSummary {
    pub fn build(
        config: &RunConfig,
        result: &RunResult,
        target_loss: Option<f64>,
        wall_clock_s: f64,
    ) -> Self {
        RunSummary {
            config: config.clone(),
            schedule: result.schedule,
            theorem: result.theorem.clone(),
            final_metrics: result.records.last().map(FinalMetrics::from_record),
            target_loss,
            time_to_target_s: target_loss.and_then(|t| time_to_target(&result.records, t)),
            shadow_avg_grad_sq: result
                .shadow_grad_sq
                .as_ref()
                .filter(|s| !s.is_empty())
                .map(|s| s.iter().sum::<f64>() / s.len() as f64),
            warnings: result.warnings.clone(),
            wall_clock_s,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("summary serialization: {e}")))
    }
}

pub fn render_shadow_csv(series: &[f64]) -> String {
    let mut out = String::from("iter,grad_sq_xbar\n");
    for (i, v) in series.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i, fmt(*v)));
    }
    out
}

/// Per-round mean and min/max band over repeated runs with identical round
/// structure.
pub fn render_aggregate_csv(all: &[Vec<RoundRecord>]) -> Result<String> {
    let first = all
        .first()
        .ok_or_else(|| Error::InvalidInput("aggregate of zero runs".into()))?;
    if all.iter().any(|r| r.len() != first.len()) {
        return Err(Error::InvalidInput(
            "aggregate: repeats have different round counts".into(),
        ));
    }
    let reps = all.len() as f64;
    let mut out = String::from(
        "round,iter,sim_time_s_mean,train_loss_mean,train_loss_min,train_loss_max,grad_norm_mean,dist_sq_opt_mean\n",
    );
    for i in 0..first.len() {
        let rows: Vec<&RoundRecord> = all.iter().map(|r| &r[i]).collect();
        let mean = |f: fn(&RoundRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / reps;
        let loss_min = rows
            .iter()
            .map(|r| r.train_loss)
            .fold(f64::INFINITY, f64::min);
        let loss_max = rows
            .iter()
            .map(|r| r.train_loss)
            .fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            first[i].round,
            first[i].iter,
            fmt(mean(|r| r.sim_time_s)),
            fmt(mean(|r| r.train_loss)),
            fmt(loss_min),
            fmt(loss_max),
            fmt(mean(|r| r.grad_norm)),
            fmt(mean(|r| r.dist_sq_opt)),
        ));
    }
    Ok(out)
}
