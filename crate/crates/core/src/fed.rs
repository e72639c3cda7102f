//! The federated training loop: in each round the server samples `r` of `n`
//! nodes, broadcasts its model, every participant runs `τ` local SGD steps on
//! its shard, uploads a (possibly quantized) model delta, and the server
//! averages the decoded deltas into the next model. Setting `τ = 1`, full
//! participation, and the identity quantizer recovers plain minibatch
//! parallel SGD; identity quantization alone recovers periodic model
//! averaging; `τ = 1` with quantization recovers quantized parallel SGD.
//!
//! Determinism contract: everything a run does is driven by counter-based
//! streams keyed on `(seed, purpose, node, round)`, participants are reduced
//! in node-id order, and the per-round work is dispatched through an
//! order-preserving parallel map — so any thread count produces bit-identical
//! results.

use std::path::PathBuf;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{self, CostModelParams};
use crate::data::{self, NodeShard};
use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::{self, Dataset, Objective};
use crate::quantizer::{self, QuantizerMode};
use crate::rng::{self, Purpose};
use crate::theory::{self, StationarityReport, StronglyConvexReport, TheoremReport};

/// Fully resolved stepsize rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepsizeSchedule {
    Constant {
        eta: f64,
    },
    /// `η_k = coeff · 4/(μ·(kτ+1))`, the decaying schedule of the strongly
    /// convex guarantee.
    StronglyConvexDecay {
        strong_convexity: f64,
        local_steps: usize,
        coeff: f64,
    },
    /// `η = coeff / (L√T)`, the flat schedule of the non-convex guarantee.
    NonConvexFlat {
        smoothness: f64,
        total_iters: usize,
        coeff: f64,
    },
}

impl StepsizeSchedule {
    /// Stepsize at local iteration `t` of round `k`. The current schedules
    /// only depend on the round.
    pub fn stepsize(&self, round: usize, _local_iter: usize) -> f64 {
        match *self {
            StepsizeSchedule::Constant { eta } => eta,
            StepsizeSchedule::StronglyConvexDecay {
                strong_convexity,
                local_steps,
                coeff,
            } => coeff * 4.0 / (strong_convexity * ((round * local_steps) as f64 + 1.0)),
            StepsizeSchedule::NonConvexFlat {
                smoothness,
                total_iters,
                coeff,
            } => coeff / (smoothness * (total_iters as f64).sqrt()),
        }
    }
}

/// Draw a uniformly random `r`-subset of `{0, …, n−1}`, returned sorted.
pub fn sample_participants(n: usize, r: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if r == 0 || r > n {
        return Err(Error::InvalidInput(format!(
            "cannot sample {r} participants from {n} nodes"
        )));
    }
    // Partial Fisher–Yates: the first r entries are a uniform r-permutation,
    // hence a uniform r-subset once sorted.
    let mut ids: Vec<usize> = (0..n).collect();
    for i in 0..r {
        let j = rng.random_range(i..n);
        ids.swap(i, j);
    }
    let mut take: Vec<usize> = ids[..r].to_vec();
    take.sort_unstable();
    Ok(take)
}

/// Run `tau` local SGD steps from `x_start` on one shard and return the model
/// delta `x_local − x_start`.
#[allow(clippy::too_many_arguments)]
pub fn local_period(
    x_start: &[f64],
    shard: &NodeShard,
    obj: &Objective,
    tau: usize,
    batch: usize,
    schedule: &StepsizeSchedule,
    round: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let (delta, _) =
        local_period_inner(x_start, shard, obj, tau, batch, schedule, round, rng, false)?;
    Ok(delta)
}

/// As [`local_period`], also returning the local iterates after each step
/// (used by global-view logging).
#[allow(clippy::too_many_arguments)]
pub fn local_period_trace(
    x_start: &[f64],
    shard: &NodeShard,
    obj: &Objective,
    tau: usize,
    batch: usize,
    schedule: &StepsizeSchedule,
    round: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (delta, trace) =
        local_period_inner(x_start, shard, obj, tau, batch, schedule, round, rng, true)?;
    Ok((delta, trace))
}

#[allow(clippy::too_many_arguments)]
fn local_period_inner(
    x_start: &[f64],
    shard: &NodeShard,
    obj: &Objective,
    tau: usize,
    batch: usize,
    schedule: &StepsizeSchedule,
    round: usize,
    rng: &mut impl Rng,
    keep_trace: bool,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if tau == 0 {
        return Err(Error::InvalidInput("period length τ must be ≥ 1".into()));
    }
    let mut x = x_start.to_vec();
    let mut trace = Vec::new();
    for t in 0..tau {
        let eta = schedule.stepsize(round, t);
        let g = objectives::stoch_grad(obj, &x, &shard.data, batch, rng)?;
        linalg::axpy(-eta, &g, &mut x);
        if keep_trace {
            trace.push(x.clone());
        }
    }
    Ok((linalg::sub(&x, x_start), trace))
}

/// Server aggregation: `x + (1/r)·Σ deltas`, reducing in node-id order so the
/// result is independent of arrival order.
pub fn server_round(x: &[f64], deltas: &[(usize, Vec<f64>)], expected: usize) -> Result<Vec<f64>> {
    if deltas.len() != expected {
        return Err(Error::InvalidInput(format!(
            "aggregation expected {expected} updates, got {}",
            deltas.len()
        )));
    }
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by_key(|&i| deltas[i].0);
    let mut sum = vec![0.0; x.len()];
    for &i in &order {
        let (_, d) = &deltas[i];
        if d.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: d.len(),
            });
        }
        linalg::axpy(1.0, d, &mut sum);
    }
    let mut next = x.to_vec();
    linalg::axpy(1.0 / expected as f64, &sum, &mut next);
    Ok(next)
}

/// What problem a run trains on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProblemSpec {
    /// Planted logistic regression with a Newton-solved optimum.
    SyntheticLogReg {
        samples: usize,
        dim: usize,
        lambda: f64,
        data_seed: u64,
    },
    /// Teacher-labeled multiclass data trained with a small MLP.
    SyntheticMulticlass {
        samples: usize,
        dim: usize,
        classes: usize,
        teacher_hidden: usize,
        /// Hidden layer sizes of the trained network.
        hidden: Vec<usize>,
        data_seed: u64,
    },
    /// Binary logistic regression over an IDX image/label pair.
    IdxLogistic {
        images: PathBuf,
        labels: PathBuf,
        keep: Vec<u8>,
        lambda: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitSpec {
    Zero,
    Gaussian { std: f64 },
}

/// Stepsize schedule as configured; curvature constants are resolved against
/// the materialized problem at run start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScheduleKind {
    Constant { eta: f64 },
    Decay { coeff: f64 },
    Flat { coeff: f64, smoothness: Option<f64> },
}

/// Bandwidth may be given directly or implied by a target
/// communication/computation ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BandwidthSpec {
    BitsPerSecond(f64),
    TargetRatio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub bandwidth: BandwidthSpec,
    pub shift_s_per_grad: f64,
    pub scale: f64,
    pub float_bits: u32,
}

/// Everything one simulated training run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub nodes: usize,
    pub participants: usize,
    pub local_steps: usize,
    pub rounds: usize,
    pub batch: usize,
    pub quantizer: QuantizerMode,
    pub schedule: ScheduleKind,
    pub cost: CostSpec,
    pub seed: u64,
    pub init: InitSpec,
    /// Materialize the virtual per-iteration average over all nodes and log
    /// its gradient norm (costs a full simulation of every node each round).
    pub shadow: bool,
    /// Worker threads for the per-round participant map; 0 uses the global
    /// pool. The result is identical for any value.
    pub threads: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::Config("nodes must be ≥ 1".into()));
        }
        if self.participants == 0 || self.participants > self.nodes {
            return Err(Error::Config(format!(
                "participants must satisfy 1 ≤ r ≤ n, got r = {} with n = {}",
                self.participants, self.nodes
            )));
        }
        if self.local_steps == 0 {
            return Err(Error::Config("local_steps (τ) must be ≥ 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be ≥ 1".into()));
        }
        if let QuantizerMode::LowPrecision { levels } = self.quantizer {
            if levels == 0 {
                return Err(Error::Config("quantizer levels must be ≥ 1".into()));
            }
        }
        match self.schedule {
            ScheduleKind::Constant { eta } if !(eta > 0.0) => {
                return Err(Error::Config("constant stepsize must be > 0".into()))
            }
            ScheduleKind::Decay { coeff } | ScheduleKind::Flat { coeff, .. } if !(coeff > 0.0) => {
                return Err(Error::Config("stepsize coefficient must be > 0".into()))
            }
            _ => {}
        }
        if !(self.cost.shift_s_per_grad >= 0.0) || !(self.cost.scale > 0.0) {
            return Err(Error::Config(
                "cost model needs shift ≥ 0 and scale > 0".into(),
            ));
        }
        if self.cost.float_bits != 32 && self.cost.float_bits != 64 {
            return Err(Error::Config("float_bits must be 32 or 64".into()));
        }
        match self.cost.bandwidth {
            BandwidthSpec::BitsPerSecond(bw) if !(bw > 0.0) => {
                return Err(Error::Config("bandwidth must be > 0".into()))
            }
            BandwidthSpec::TargetRatio(t) if !(t > 0.0) => {
                return Err(Error::Config("target ratio must be > 0".into()))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn total_iters(&self) -> usize {
        self.rounds * self.local_steps
    }
}

/// Metrics recorded after each completed round; all time and bit fields are
/// cumulative from the start of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based: record `k` describes the server model after `k` rounds.
    pub round: usize,
    /// Iterations completed: `round · τ`.
    pub iter: usize,
    pub comm_time_s: f64,
    pub comp_time_s: f64,
    pub sim_time_s: f64,
    pub train_loss: f64,
    pub grad_norm: f64,
    /// Squared distance to the known optimum; NaN when it is not known.
    pub dist_sq_opt: f64,
    pub bits_uplink_cum: u64,
    /// Order-independent hash of the participant set that produced this model.
    pub participants_hash: u64,
}

/// A materialized problem: objective, data, and (when known) its optimum.
#[derive(Debug, Clone)]
pub struct Problem {
    pub objective: Objective,
    pub data: Dataset,
    pub x_star: Option<Vec<f64>>,
    pub f_star: Option<f64>,
}

impl ProblemSpec {
    pub fn materialize(&self) -> Result<Problem> {
        match self {
            ProblemSpec::SyntheticLogReg {
                samples,
                dim,
                lambda,
                data_seed,
            } => {
                let prob = data::gen_synthetic_logreg(*samples, *dim, *lambda, *data_seed)?;
                Ok(Problem {
                    objective: Objective::logistic(*lambda)?,
                    data: prob.data,
                    x_star: Some(prob.x_star),
                    f_star: Some(prob.f_star),
                })
            }
            ProblemSpec::SyntheticMulticlass {
                samples,
                dim,
                classes,
                teacher_hidden,
                hidden,
                data_seed,
            } => {
                let dataset = data::gen_synthetic_multiclass(
                    *samples,
                    *dim,
                    *classes,
                    *teacher_hidden,
                    *data_seed,
                )?;
                let mut layers = Vec::with_capacity(hidden.len() + 2);
                layers.push(*dim);
                layers.extend_from_slice(hidden);
                layers.push(*classes);
                Ok(Problem {
                    objective: Objective::mlp(layers)?,
                    data: dataset,
                    x_star: None,
                    f_star: None,
                })
            }
            ProblemSpec::IdxLogistic {
                images,
                labels,
                keep,
                lambda,
            } => {
                let keep_opt = if keep.is_empty() {
                    None
                } else {
                    Some(keep.as_slice())
                };
                let dataset = data::load_idx(images, labels, keep_opt)?;
                Ok(Problem {
                    objective: Objective::logistic(*lambda)?,
                    data: dataset,
                    x_star: None,
                    f_star: None,
                })
            }
        }
    }

    /// Seed that fixes the dataset (independent of the run seed, so seed
    /// sweeps rerun the same problem).
    pub fn data_seed(&self) -> u64 {
        match self {
            ProblemSpec::SyntheticLogReg { data_seed, .. }
            | ProblemSpec::SyntheticMulticlass { data_seed, .. } => *data_seed,
            ProblemSpec::IdxLogistic { .. } => 0,
        }
    }
}

/// Output of one run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<RoundRecord>,
    pub final_model: Vec<f64>,
    /// Resolved stepsize schedule (constants filled in).
    pub schedule: StepsizeSchedule,
    pub theorem: Option<TheoremReport>,
    /// With global-view logging: `‖∇f(x̄_{k,t})‖²` for every global iteration
    /// `kτ + t`, where `x̄` averages all `n` local models.
    pub shadow_grad_sq: Option<Vec<f64>>,
    pub warnings: Vec<String>,
    pub x_star: Option<Vec<f64>>,
    pub f_star: Option<f64>,
}

fn hash_participants(ids: &[usize]) -> u64 {
    let mut h = 0xA5A5_5A5A_DEAD_BEEF_u64;
    for &id in ids {
        h = rng::splitmix64(h ^ id as u64);
    }
    h
}

/// A materialized, resolved run: everything derived from the config that the
/// round loop (and the constants report) needs.
struct Prepared {
    problem: Problem,
    param_dim: usize,
    x0: Vec<f64>,
    smoothness: f64,
    strong_convexity: Option<f64>,
    schedule: StepsizeSchedule,
    cost_params: CostModelParams,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let problem = config.problem.materialize()?;
    let obj = &problem.objective;
    let param_dim = obj.param_dim(problem.data.dim());

    let x0 = match config.init {
        InitSpec::Zero => vec![0.0; param_dim],
        InitSpec::Gaussian { std } => {
            let mut r = rng::stream(config.seed, Purpose::InitModel, 0, 0);
            (0..param_dim)
                .map(|_| std * r.sample::<f64, _>(StandardNormal))
                .collect()
        }
    };

    // Curvature constants for schedule resolution and the theorem report.
    let curvature = match obj {
        Objective::LogisticL2 { .. } => Some(objectives::constants(obj, &problem.data)?),
        Objective::Mlp { .. } => None,
    };
    let smoothness = match (config.schedule, &curvature) {
        (
            ScheduleKind::Flat {
                smoothness: Some(l),
                ..
            },
            _,
        ) => l,
        (_, Some(c)) => c.smoothness,
        (_, None) => {
            let mut r = rng::stream(config.seed, Purpose::Estimation, 0, 0);
            objectives::estimate_smoothness(obj, &problem.data, &x0, 0.3, 30, &mut r)?
        }
    };
    let strong_convexity = curvature.map(|c| c.strong_convexity);

    let schedule = match config.schedule {
        ScheduleKind::Constant { eta } => StepsizeSchedule::Constant { eta },
        ScheduleKind::Decay { coeff } => {
            let mu = strong_convexity.unwrap_or(0.0);
            if !(mu > 0.0) {
                return Err(Error::Config(
                    "the decaying schedule needs a strongly convex objective (λ > 0)".into(),
                ));
            }
            StepsizeSchedule::StronglyConvexDecay {
                strong_convexity: mu,
                local_steps: config.local_steps,
                coeff,
            }
        }
        ScheduleKind::Flat { coeff, .. } => {
            if config.total_iters() == 0 {
                return Err(Error::Config(
                    "the flat schedule needs at least one round".into(),
                ));
            }
            StepsizeSchedule::NonConvexFlat {
                smoothness,
                total_iters: config.total_iters(),
                coeff,
            }
        }
    };

    let cost_params = CostModelParams {
        bandwidth_bits_per_s: match config.cost.bandwidth {
            BandwidthSpec::BitsPerSecond(bw) => bw,
            BandwidthSpec::TargetRatio(target) => cost::solve_bandwidth(
                param_dim,
                target,
                config.cost.shift_s_per_grad,
                config.cost.scale,
                config.cost.float_bits,
            )?,
        },
        shift_s_per_grad: config.cost.shift_s_per_grad,
        scale: config.cost.scale,
        float_bits: config.cost.float_bits,
    };
    cost_params.validate()?;

    Ok(Prepared {
        problem,
        param_dim,
        x0,
        smoothness,
        strong_convexity,
        schedule,
        cost_params,
    })
}

/// Compute a run's theorem report (and any warnings) without executing any
/// rounds.
pub fn theorem_report(config: &RunConfig) -> Result<(Option<TheoremReport>, Vec<String>)> {
    config.validate()?;
    let prep = prepare(config)?;
    let mut warnings = Vec::new();
    let report = build_theorem_report(
        config,
        &prep.problem.objective,
        &prep.problem,
        &prep.x0,
        prep.param_dim,
        prep.smoothness,
        prep.strong_convexity,
        &mut warnings,
    )?;
    Ok((report, warnings))
}

/// Execute a run. Deterministic in `config` (including the seed and
/// regardless of `threads`).
pub fn run(config: &RunConfig) -> Result<RunResult> {
    config.validate()?;
    if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| run_inner(config))
    } else {
        run_inner(config)
    }
}

fn run_inner(config: &RunConfig) -> Result<RunResult> {
    let mut warnings = Vec::new();
    let Prepared {
        problem,
        param_dim,
        x0,
        smoothness,
        strong_convexity,
        schedule,
        cost_params,
    } = prepare(config)?;
    let obj = &problem.objective;
    let shards = data::partition_iid(&problem.data, config.nodes, config.problem.data_seed())?;

    let theorem = build_theorem_report(
        config,
        obj,
        &problem,
        &x0,
        param_dim,
        smoothness,
        strong_convexity,
        &mut warnings,
    )?;

    let upload_bits = config
        .quantizer
        .upload_bits(param_dim, config.cost.float_bits);

    let mut x = x0;
    let mut records = Vec::with_capacity(config.rounds);
    let mut shadow_grad_sq = if config.shadow {
        Some(Vec::new())
    } else {
        None
    };
    let mut comm_cum = 0.0;
    let mut comp_cum = 0.0;
    let mut bits_cum: u64 = 0;

    for k in 0..config.rounds {
        let ids = sample_participants(
            config.nodes,
            config.participants,
            &mut rng::stream(config.seed, Purpose::Sampling, k as u64, 0),
        )?;

        struct NodeOutput {
            node: usize,
            delta: Vec<f64>,
            comp_time: f64,
            trace: Option<Vec<Vec<f64>>>,
        }

        // In shadow mode every node is simulated so the virtual average
        // exists; only sampled participants contribute to the aggregate.
        let simulate: Vec<usize> = if config.shadow {
            (0..config.nodes).collect()
        } else {
            ids.clone()
        };
        let participant_set: std::collections::BTreeSet<usize> = ids.iter().cloned().collect();

        let outputs: Result<Vec<NodeOutput>> = simulate
            .par_iter()
            .map(|&node| {
                let mut sgd_rng =
                    rng::stream(config.seed, Purpose::LocalSgd, node as u64, k as u64);
                let (raw_delta, trace) = if config.shadow {
                    let (d, t) = local_period_trace(
                        &x,
                        &shards[node],
                        obj,
                        config.local_steps,
                        config.batch,
                        &schedule,
                        k,
                        &mut sgd_rng,
                    )?;
                    (d, Some(t))
                } else {
                    let d = local_period(
                        &x,
                        &shards[node],
                        obj,
                        config.local_steps,
                        config.batch,
                        &schedule,
                        k,
                        &mut sgd_rng,
                    )?;
                    (d, None)
                };
                // Only participants quantize, upload, and draw compute time.
                let is_participant = participant_set.contains(&node);
                let delta = if is_participant {
                    match config.quantizer {
                        QuantizerMode::Identity => raw_delta,
                        QuantizerMode::LowPrecision { levels } => {
                            let mut qrng =
                                rng::stream(config.seed, Purpose::Quantize, node as u64, k as u64);
                            let q = quantizer::quantize(&raw_delta, levels, &mut qrng)?;
                            // Round-trip through the wire so the server sees
                            // exactly what a real uplink would deliver.
                            let bytes = quantizer::encode(&q, config.cost.float_bits)?;
                            quantizer::dequantize(&quantizer::decode(&bytes)?)
                        }
                    }
                } else {
                    raw_delta
                };
                let comp_time = if is_participant {
                    cost::node_comp_time(
                        config.local_steps,
                        config.batch,
                        &cost_params,
                        &mut rng::stream(config.seed, Purpose::Compute, node as u64, k as u64),
                    )
                } else {
                    0.0
                };
                Ok(NodeOutput {
                    node,
                    delta,
                    comp_time,
                    trace,
                })
            })
            .collect();
        let outputs = outputs?;

        if let (Some(series), true) = (&mut shadow_grad_sq, config.shadow) {
            // x̄_{k,0} is the broadcast model itself.
            let g0 = objectives::grad(obj, &x, &problem.data)?;
            series.push(linalg::sq_norm(&g0));
            for t in 1..config.local_steps {
                let mut avg = vec![0.0; x.len()];
                for out in &outputs {
                    let tr = out.trace.as_ref().expect("shadow mode keeps traces");
                    linalg::axpy(1.0, &tr[t - 1], &mut avg);
                }
                for v in avg.iter_mut() {
                    *v /= config.nodes as f64;
                }
                let g = objectives::grad(obj, &avg, &problem.data)?;
                series.push(linalg::sq_norm(&g));
            }
        }

        let deltas: Vec<(usize, Vec<f64>)> = outputs
            .iter()
            .filter(|o| participant_set.contains(&o.node))
            .map(|o| (o.node, o.delta.clone()))
            .collect();
        x = server_round(&x, &deltas, config.participants)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "model diverged to non-finite values after round {} (stepsize too large?)",
                k + 1
            )));
        }

        let comp_times: Vec<f64> = outputs
            .iter()
            .filter(|o| participant_set.contains(&o.node))
            .map(|o| o.comp_time)
            .collect();
        let bits: Vec<u64> = vec![upload_bits; config.participants];
        comm_cum += cost::round_comm_time(&bits, &cost_params);
        comp_cum += cost::round_comp_time(&comp_times)?;
        bits_cum += upload_bits * config.participants as u64;

        let train_loss = objectives::loss(obj, &x, &problem.data)?;
        let grad_norm = linalg::norm(&objectives::grad(obj, &x, &problem.data)?);
        let dist_sq_opt = problem
            .x_star
            .as_ref()
            .map_or(f64::NAN, |star| linalg::sq_dist(&x, star));
        records.push(RoundRecord {
            round: k + 1,
            iter: (k + 1) * config.local_steps,
            comm_time_s: comm_cum,
            comp_time_s: comp_cum,
            sim_time_s: comm_cum + comp_cum,
            train_loss,
            grad_norm,
            dist_sq_opt,
            bits_uplink_cum: bits_cum,
            participants_hash: hash_participants(&ids),
        });
    }

    Ok(RunResult {
        records,
        final_model: x,
        schedule,
        theorem,
        shadow_grad_sq,
        warnings,
        x_star: problem.x_star,
        f_star: problem.f_star,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_theorem_report(
    config: &RunConfig,
    obj: &Objective,
    problem: &Problem,
    x0: &[f64],
    param_dim: usize,
    smoothness: f64,
    strong_convexity: Option<f64>,
    warnings: &mut Vec<String>,
) -> Result<Option<TheoremReport>> {
    if config.nodes < 2 {
        warnings.push("theorem constants skipped: they need n ≥ 2".into());
        return Ok(None);
    }
    let q = config.quantizer.variance_param(param_dim);

    // Reference points for the gradient-noise estimate: the start, the
    // optimum when known (otherwise perturbations of the start), and a
    // midpoint.
    let mut points = vec![x0.to_vec()];
    match &problem.x_star {
        Some(star) => {
            points.push(star.clone());
            points.push(x0.iter().zip(star).map(|(a, b)| 0.5 * (a + b)).collect());
        }
        None => {
            let mut r = rng::stream(config.seed, Purpose::Estimation, 1, 0);
            for _ in 0..2 {
                points.push(
                    x0.iter()
                        .map(|&v| v + 0.5 * r.sample::<f64, _>(StandardNormal))
                        .collect(),
                );
            }
        }
    }
    let sigma_sq_single = theory::estimate_sigma_sq(obj, &problem.data, &points)?;
    let sigma_sq_batch = sigma_sq_single / config.batch as f64;

    let strongly_convex = match strong_convexity {
        Some(mu) if mu > 0.0 => {
            let constants = theory::strongly_convex_constants(
                q,
                config.nodes,
                config.participants,
                smoothness,
                mu,
                sigma_sq_batch,
            )?;
            let k0 = theory::strongly_convex_k0(
                smoothness,
                mu,
                constants.b1,
                config.nodes,
                config.local_steps,
            )?;
            let beyond = k0 as usize * config.local_steps > config.total_iters();
            if beyond {
                warnings.push(format!(
                    "strongly convex bound activates at round {k0} (k₀τ = {} > T = {}); \
                     it never applies within this run",
                    k0 as usize * config.local_steps,
                    config.total_iters()
                ));
            }
            Some(StronglyConvexReport {
                constants,
                k0,
                k0_beyond_horizon: beyond,
            })
        }
        _ => {
            warnings.push("strongly convex constants skipped: objective has μ = 0".into());
            None
        }
    };

    let stationarity = if config.total_iters() >= 2 {
        let constants =
            theory::stationarity_constants(q, config.nodes, config.participants, sigma_sq_batch)?;
        let tau_max = theory::stationarity_tau_max(config.total_iters(), constants.b2)?;
        let violates = (config.local_steps as f64) > tau_max;
        if violates {
            warnings.push(format!(
                "τ = {} exceeds the non-convex period bound τ_max = {tau_max:.4}",
                config.local_steps
            ));
        }
        Some(StationarityReport {
            constants,
            tau_max,
            tau_violates_condition: violates,
        })
    } else {
        warnings.push("non-convex constants skipped: they need T ≥ 2".into());
        None
    };

    Ok(Some(TheoremReport {
        q,
        nodes: config.nodes,
        participants: config.participants,
        tau: config.local_steps,
        total_iters: config.total_iters(),
        smoothness,
        strong_convexity,
        sigma_sq_single,
        sigma_sq_batch,
        strongly_convex,
        stationarity,
    }))
}
