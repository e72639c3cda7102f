//! Deterministic desk-scale simulator for communication-efficient federated
//! learning: periodic local SGD, partial node participation, and stochastic
//! low-precision quantization of the uploaded model updates.
//!
//! The crate is organized around the pieces a simulated training run needs:
//!
//! * [`quantizer`] — the s-level stochastic quantizer, its bit-exact wire
//!   codec, and statistical verifiers for its unbiasedness/variance contract.
//! * [`objectives`] — L2-regularized logistic regression and a small MLP,
//!   with exact gradients, minibatch stochastic gradients, and curvature
//!   constant estimators.
//! * [`data`] — synthetic problems with a known optimum, IDX ingestion, and
//!   i.i.d. sharding across nodes.
//! * [`fed`] — the training loop itself (node sampling, local periods,
//!   quantized aggregation, stepsize schedules) plus its degenerate
//!   baselines.
//! * [`cost`] — simulated wall-clock accounting: uplink bits over a fixed
//!   bandwidth and shifted-exponential per-node compute times.
//! * [`theory`] — evaluators for the convergence-bound constants so runs can
//!   be compared against their proved rates.
//!
//! Everything is deterministic given a master seed: all randomness flows
//! through counter-based streams keyed by `(seed, purpose, node, round)`, so
//! parallel and sequential execution produce bit-identical results.

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check; the
// un-negated forms accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod data;
pub mod error;
pub mod fed;
pub mod linalg;
pub mod objectives;
pub mod quantizer;
pub mod rng;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use fed::{
    InitSpec, ProblemSpec, RoundRecord, RunConfig, RunResult, ScheduleKind, StepsizeSchedule,
};
pub use quantizer::{QuantizedVector, QuantizerMode};
