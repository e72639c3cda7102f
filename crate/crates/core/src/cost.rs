//! Simulated wall-clock accounting for a communication round: uplink time is
//! total uploaded bits over a fixed bandwidth, per-node compute time follows
//! a shifted-exponential model, and the round's compute time is the slowest
//! contributing node (stragglers are not preempted).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CostModelParams {
    /// Uplink bandwidth shared by all uploads, bits per second.
    pub bandwidth_bits_per_s: f64,
    /// Deterministic seconds per single-sample gradient.
    pub shift_s_per_grad: f64,
    /// Rate parameter of the exponential tail; the random part of one
    /// gradient has mean `1/scale` seconds.
    pub scale: f64,
    /// Bits used to represent one unquantized float on the wire.
    pub float_bits: u32,
}

impl CostModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_bits_per_s > 0.0) {
            return Err(Error::InvalidInput("bandwidth must be > 0".into()));
        }
        if !(self.shift_s_per_grad >= 0.0) {
            return Err(Error::InvalidInput("shift must be ≥ 0".into()));
        }
        if !(self.scale > 0.0) {
            return Err(Error::InvalidInput("scale must be > 0".into()));
        }
        if self.float_bits == 0 {
            return Err(Error::InvalidInput("float_bits must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Seconds to upload all participants' bits: `Σ bits / BW`.
pub fn round_comm_time(participant_bits: &[u64], params: &CostModelParams) -> f64 {
    let total: u64 = participant_bits.iter().sum();
    total as f64 / params.bandwidth_bits_per_s
}

/// One node's compute time for a period of `tau` iterations at batch size
/// `batch`: a deterministic shift `τ·B·shift` plus an exponential draw with
/// mean `τ·B/scale`. The draw is by inverse CDF so a stub generator that
/// yields u = 0 produces exactly the shift.
pub fn node_comp_time(
    tau: usize,
    batch: usize,
    params: &CostModelParams,
    rng: &mut impl Rng,
) -> f64 {
    let grads = (tau * batch) as f64;
    let u: f64 = rng.random(); // in [0, 1)
    let exp_draw = -(grads / params.scale) * (1.0 - u).ln();
    grads * params.shift_s_per_grad + exp_draw
}

/// The round waits for its slowest participant.
pub fn round_comp_time(participant_times: &[f64]) -> Result<f64> {
    participant_times
        .iter()
        .cloned()
        .fold(None, |acc: Option<f64>, t| {
            Some(acc.map_or(t, |a| a.max(t)))
        })
        .ok_or_else(|| Error::InvalidInput("round with no participants".into()))
}

/// The communication/computation ratio `(pF/BW) / (shift + 1/scale)`: upload
/// time of one length-p float vector over the mean compute time of one
/// gradient.
pub fn comm_comp_ratio(dim: usize, params: &CostModelParams) -> f64 {
    let upload = dim as f64 * params.float_bits as f64 / params.bandwidth_bits_per_s;
    upload / (params.shift_s_per_grad + 1.0 / params.scale)
}

/// Invert the ratio formula: the bandwidth that makes `comm_comp_ratio`
/// equal `target_ratio`.
pub fn solve_bandwidth(
    dim: usize,
    target_ratio: f64,
    shift: f64,
    scale: f64,
    float_bits: u32,
) -> Result<f64> {
    if !(target_ratio > 0.0) {
        return Err(Error::InvalidInput("target ratio must be > 0".into()));
    }
    if !(scale > 0.0) || !(shift >= 0.0) || dim == 0 {
        return Err(Error::InvalidInput("invalid cost parameters".into()));
    }
    Ok(dim as f64 * float_bits as f64 / (target_ratio * (shift + 1.0 / scale)))
}
