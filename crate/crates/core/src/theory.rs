//! Evaluators for the convergence-bound constants of the two guarantees the
//! simulator is checked against: the strongly convex `O(1/T)` distance bound
//! and the non-convex `O(1/√T)` stationarity bound. These are plain formula
//! evaluations; runs export them so empirical curves can be compared with
//! their proved ceilings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::{self, Dataset, Objective};

fn check_population(n: usize, r: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(
            "bound constants need n ≥ 2 (the participation term divides by n−1)".into(),
        ));
    }
    if r == 0 || r > n {
        return Err(Error::InvalidInput(format!(
            "participants r = {r} must be in [1, n = {n}]"
        )));
    }
    Ok(())
}

/// `(n−r) / (r(n−1))` — the partial-participation factor.
fn participation_factor(n: usize, r: usize) -> f64 {
    (n - r) as f64 / (r as f64 * (n - 1) as f64)
}

/// Constants of the strongly convex bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StronglyConvexConstants {
    pub b1: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// Strongly convex constants:
///
/// ```text
/// B₁ = 2L²(q/n + 4(1+q)(n−r)/(r(n−1)))
/// C₁ = 16σ²/(μ²n) · (1 + 2q + 8(1+q)·n(n−r)/(r(n−1)))
/// C₂ = 16eL²σ²/(μ²n)
/// C₃ = 256eL²σ²/(μ⁴n) · (n + 2q + 8(1+q)·n(n−r)/(r(n−1)))
/// ```
pub fn strongly_convex_constants(
    q: f64,
    n: usize,
    r: usize,
    smoothness: f64,
    strong_convexity: f64,
    sigma_sq: f64,
) -> Result<StronglyConvexConstants> {
    check_population(n, r)?;
    if !(strong_convexity > 0.0) {
        return Err(Error::InvalidInput("strong convexity μ must be > 0".into()));
    }
    let e = std::f64::consts::E;
    let nf = n as f64;
    let part = participation_factor(n, r);
    let l2 = smoothness * smoothness;
    let mu2 = strong_convexity * strong_convexity;
    let b1 = 2.0 * l2 * (q / nf + 4.0 * (1.0 + q) * part);
    let c1 = 16.0 * sigma_sq / (mu2 * nf) * (1.0 + 2.0 * q + 8.0 * (1.0 + q) * nf * part);
    let c2 = 16.0 * e * l2 * sigma_sq / (mu2 * nf);
    let c3 =
        256.0 * e * l2 * sigma_sq / (mu2 * mu2 * nf) * (nf + 2.0 * q + 8.0 * (1.0 + q) * nf * part);
    Ok(StronglyConvexConstants { b1, c1, c2, c3 })
}

/// The first round index from which the strongly convex bound holds: the
/// smallest integer at least `4·max{L/μ, 4(B₁/μ² + 1), 1/τ, 4n/(μ²τ)}`.
pub fn strongly_convex_k0(
    smoothness: f64,
    strong_convexity: f64,
    b1: f64,
    n: usize,
    tau: usize,
) -> Result<u64> {
    if !(strong_convexity > 0.0) {
        return Err(Error::InvalidInput("strong convexity μ must be > 0".into()));
    }
    if tau == 0 {
        return Err(Error::InvalidInput("period length τ must be ≥ 1".into()));
    }
    let mu2 = strong_convexity * strong_convexity;
    let terms = [
        smoothness / strong_convexity,
        4.0 * (b1 / mu2 + 1.0),
        1.0 / tau as f64,
        4.0 * n as f64 / (mu2 * tau as f64),
    ];
    let bound = 4.0 * terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Smallest integer ≥ bound, tolerating float fuzz at exact integers.
    let rounded = bound.round();
    let k0 = if (bound - rounded).abs() < 1e-9 {
        rounded
    } else {
        bound.ceil()
    };
    Ok((k0 as u64).max(1))
}

/// Right-hand side of the strongly convex bound at round `k ≥ k₀`:
///
/// ```text
/// (k₀τ+1)²/(kτ+1)² · gap + C₁·τ/(kτ+1) + C₂·(τ−1)²/(kτ+1) + C₃·(τ−1)/(kτ+1)²
/// ```
///
/// where `gap` is the expected squared distance at round `k₀`.
pub fn strongly_convex_bound(
    round: u64,
    k0: u64,
    tau: usize,
    constants: &StronglyConvexConstants,
    initial_gap: f64,
) -> Result<f64> {
    if round < k0 {
        return Err(Error::InvalidInput(format!(
            "bound only holds from round {k0}, asked at {round}"
        )));
    }
    let t = tau as f64;
    let kt = round as f64 * t + 1.0;
    let k0t = k0 as f64 * t + 1.0;
    Ok(initial_gap * (k0t / kt) * (k0t / kt)
        + constants.c1 * t / kt
        + constants.c2 * (t - 1.0) * (t - 1.0) / kt
        + constants.c3 * (t - 1.0) / (kt * kt))
}

/// Constants of the non-convex stationarity bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StationarityConstants {
    pub b2: f64,
    pub n1: f64,
    pub n2: f64,
}

/// Non-convex constants:
///
/// ```text
/// B₂ = q/n + 4(1+q)(n−r)/(r(n−1))
/// N₁ = (1+q)·σ²/n·(1 + n(n−r)/(r(n−1)))
/// N₂ = σ²/n·(n+1)
/// ```
pub fn stationarity_constants(
    q: f64,
    n: usize,
    r: usize,
    sigma_sq: f64,
) -> Result<StationarityConstants> {
    check_population(n, r)?;
    let nf = n as f64;
    let part = participation_factor(n, r);
    Ok(StationarityConstants {
        b2: q / nf + 4.0 * (1.0 + q) * part,
        n1: (1.0 + q) * sigma_sq / nf * (1.0 + nf * part),
        n2: sigma_sq / nf * (nf + 1.0),
    })
}

/// Largest period length the non-convex guarantee admits at `total_iters`
/// iterations: `(√(B₂² + 0.8) − B₂)/8 · √T`, requiring `T ≥ 2`.
pub fn stationarity_tau_max(total_iters: usize, b2: f64) -> Result<f64> {
    if total_iters < 2 {
        return Err(Error::InvalidInput(
            "the non-convex guarantee needs T ≥ 2".into(),
        ));
    }
    Ok(((b2 * b2 + 0.8).sqrt() - b2) / 8.0 * (total_iters as f64).sqrt())
}

/// Right-hand side of the non-convex bound:
///
/// ```text
/// 2L(f(x₀) − f*)/√T + N₁/√T + N₂(τ−1)/T
/// ```
pub fn stationarity_bound(
    total_iters: usize,
    tau: usize,
    smoothness: f64,
    f0_gap: f64,
    n1: f64,
    n2: f64,
) -> f64 {
    let t = total_iters as f64;
    2.0 * smoothness * f0_gap / t.sqrt() + n1 / t.sqrt() + n2 * (tau as f64 - 1.0) / t
}

/// Empirical gradient-noise bound: the largest per-sample gradient variance
/// `(1/N)Σᵢ‖gᵢ − ḡ‖²` over the given reference points. This estimates the σ²
/// of the single-sample stochastic gradient; divide by the batch size for
/// minibatch updates.
pub fn estimate_sigma_sq(obj: &Objective, data: &Dataset, points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidInput(
            "need at least one reference point".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    for x in points {
        let full = objectives::grad(obj, x, data)?;
        let mut acc = 0.0;
        for i in 0..data.len() {
            let gi = objectives::grad_on_indices(obj, x, data, &[i])?;
            acc += linalg::sq_dist(&gi, &full);
        }
        worst = worst.max(acc / data.len() as f64);
    }
    Ok(worst)
}

/// Everything a run exports about its theoretical guarantees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremReport {
    /// Quantizer variance parameter used in the constants.
    pub q: f64,
    pub nodes: usize,
    pub participants: usize,
    pub tau: usize,
    pub total_iters: usize,
    pub smoothness: f64,
    pub strong_convexity: Option<f64>,
    /// Single-sample gradient-noise estimate.
    pub sigma_sq_single: f64,
    /// Noise of the minibatch gradient actually used: `sigma_sq_single / B`.
    pub sigma_sq_batch: f64,
    pub strongly_convex: Option<StronglyConvexReport>,
    pub stationarity: Option<StationarityReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StronglyConvexReport {
    #[serde(flatten)]
    pub constants: StronglyConvexConstants,
    pub k0: u64,
    /// True when `k₀τ` exceeds the configured iteration budget, i.e. the
    /// bound never activates within this run.
    pub k0_beyond_horizon: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarityReport {
    #[serde(flatten)]
    pub constants: StationarityConstants,
    pub tau_max: f64,
    /// True when the configured τ violates the period-length condition.
    pub tau_violates_condition: bool,
}
