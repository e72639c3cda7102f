//! Loss functions, exact and stochastic gradients, and curvature constants
//! for the two experiment families: L2-regularized logistic regression and a
//! small tanh MLP with softmax cross-entropy output.
//!
//! All gradients are means over samples plus the regularizer, so a stochastic
//! gradient built from uniformly drawn sample indices is unbiased for the
//! full-batch gradient on the same data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Labels attached to a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// Binary targets in {−1, +1}.
    Binary(Vec<f64>),
    /// Class indices in `[0, count)`.
    Classes { ids: Vec<usize>, count: usize },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Binary(v) => v.len(),
            Labels::Classes { ids, .. } => ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A dense row-major dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Labels,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Labels) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dataset: zero feature dim".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                got: features.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::InvalidInput("dataset: no samples".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset: non-finite feature".into()));
        }
        if let Labels::Binary(v) = &labels {
            if v.iter().any(|&y| y != 1.0 && y != -1.0) {
                return Err(Error::InvalidInput("binary labels must be ±1".into()));
            }
        }
        if let Labels::Classes { ids, count } = &labels {
            if ids.iter().any(|&c| c >= *count) {
                return Err(Error::InvalidInput("class id out of range".into()));
            }
        }
        Ok(Dataset {
            features,
            dim,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// New dataset holding the listed samples, in order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidInput(format!(
                    "sample index {i} out of range"
                )));
            }
            features.extend_from_slice(self.row(i));
        }
        let labels = match &self.labels {
            Labels::Binary(v) => Labels::Binary(indices.iter().map(|&i| v[i]).collect()),
            Labels::Classes { ids, count } => Labels::Classes {
                ids: indices.iter().map(|&i| ids[i]).collect(),
                count: *count,
            },
        };
        Dataset::new(features, self.dim, labels)
    }
}

/// The objective being minimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// Mean logistic loss plus `(λ/2)‖x‖²`.
    LogisticL2 { lambda: f64 },
    /// Fully connected net; `layers` is the full size chain
    /// `[input, hidden…, classes]`, tanh hidden activations, softmax
    /// cross-entropy output.
    Mlp { layers: Vec<usize> },
}

impl Objective {
    pub fn logistic(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda must be ≥ 0, got {lambda}"
            )));
        }
        Ok(Objective::LogisticL2 { lambda })
    }

    pub fn mlp(layers: Vec<usize>) -> Result<Self> {
        if layers.len() < 2 || layers.contains(&0) {
            return Err(Error::InvalidInput(
                "mlp needs at least input and output layers of size ≥ 1".into(),
            ));
        }
        Ok(Objective::Mlp { layers })
    }

    /// Length of the parameter vector for data of dimension `feature_dim`.
    pub fn param_dim(&self, feature_dim: usize) -> usize {
        match self {
            Objective::LogisticL2 { .. } => feature_dim,
            Objective::Mlp { layers } => layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum(),
        }
    }

    fn check_compat(&self, x: &[f64], data: &Dataset) -> Result<()> {
        let expected = self.param_dim(data.dim());
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: x.len(),
            });
        }
        match self {
            Objective::LogisticL2 { .. } => {
                if !matches!(data.labels(), Labels::Binary(_)) {
                    return Err(Error::InvalidInput(
                        "logistic objective needs binary ±1 labels".into(),
                    ));
                }
            }
            Objective::Mlp { layers } => {
                if layers[0] != data.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: layers[0],
                        got: data.dim(),
                    });
                }
                match data.labels() {
                    Labels::Classes { count, .. } if *count == *layers.last().unwrap() => {}
                    _ => {
                        return Err(Error::InvalidInput(
                            "mlp objective needs class labels matching the output layer".into(),
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

/// `ln(1 + e^{-z})` without overflow.
fn log1p_exp_neg(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Logistic sigmoid, saturating stably.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean loss of `obj` at parameters `x` over `data`.
pub fn loss(obj: &Objective, x: &[f64], data: &Dataset) -> Result<f64> {
    obj.check_compat(x, data)?;
    match obj {
        Objective::LogisticL2 { lambda } => {
            let ys = match data.labels() {
                Labels::Binary(v) => v,
                _ => unreachable!(),
            };
            let mut acc = 0.0;
            for (i, &y) in ys.iter().enumerate() {
                let z = linalg::dot(x, data.row(i));
                acc += log1p_exp_neg(y * z);
            }
            Ok(acc / data.len() as f64 + 0.5 * lambda * linalg::sq_norm(x))
        }
        Objective::Mlp { layers } => {
            let net = MlpView::new(layers, x);
            let ids = match data.labels() {
                Labels::Classes { ids, .. } => ids,
                _ => unreachable!(),
            };
            let mut acc = 0.0;
            for (i, &y) in ids.iter().enumerate() {
                acc += net.sample_loss(data.row(i), y);
            }
            Ok(acc / data.len() as f64)
        }
    }
}

/// Exact full-batch gradient.
pub fn grad(obj: &Objective, x: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..data.len()).collect();
    grad_on_indices(obj, x, data, &all)
}

/// Mean gradient over the listed samples (with the regularizer). This is the
/// shared kernel behind both the exact gradient (all indices) and the
/// minibatch stochastic gradient (drawn indices).
pub fn grad_on_indices(
    obj: &Objective,
    x: &[f64],
    data: &Dataset,
    indices: &[usize],
) -> Result<Vec<f64>> {
    obj.check_compat(x, data)?;
    if indices.is_empty() {
        return Err(Error::InvalidInput("gradient over empty index set".into()));
    }
    let inv = 1.0 / indices.len() as f64;
    match obj {
        Objective::LogisticL2 { lambda } => {
            let ys = match data.labels() {
                Labels::Binary(v) => v,
                _ => unreachable!(),
            };
            let mut g = vec![0.0; x.len()];
            for &i in indices {
                let row = data.row(i);
                let y = ys[i];
                let z = linalg::dot(x, row);
                // d/dz ln(1 + e^{-yz}) = -y·σ(-yz)
                let coeff = -y * sigmoid(-y * z) * inv;
                linalg::axpy(coeff, row, &mut g);
            }
            linalg::axpy(*lambda, x, &mut g);
            Ok(g)
        }
        Objective::Mlp { layers } => {
            let net = MlpView::new(layers, x);
            let ids = match data.labels() {
                Labels::Classes { ids, .. } => ids,
                _ => unreachable!(),
            };
            let mut g = vec![0.0; x.len()];
            for &i in indices {
                net.accumulate_sample_grad(data.row(i), ids[i], inv, &mut g);
            }
            Ok(g)
        }
    }
}

/// Minibatch stochastic gradient: `batch` samples drawn uniformly with
/// replacement from `shard`.
pub fn stoch_grad(
    obj: &Objective,
    x: &[f64],
    shard: &Dataset,
    batch: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if shard.is_empty() {
        return Err(Error::InvalidInput(
            "stochastic gradient over empty shard".into(),
        ));
    }
    if batch == 0 || batch > shard.len() {
        return Err(Error::InvalidInput(format!(
            "batch size {batch} must be in [1, {}]",
            shard.len()
        )));
    }
    let indices: Vec<usize> = (0..batch)
        .map(|_| rng.random_range(0..shard.len()))
        .collect();
    grad_on_indices(obj, x, shard, &indices)
}

/// Smoothness and strong-convexity constants of an objective over a dataset.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurvatureConstants {
    pub smoothness: f64,
    pub strong_convexity: f64,
}

/// Exact curvature constants for the logistic objective: `μ = λ` and
/// `L = λmax(AᵀA/N)/4 + λ` (the sigmoid's second derivative is at most 1/4).
/// The MLP has no closed form and is rejected.
pub fn constants(obj: &Objective, data: &Dataset) -> Result<CurvatureConstants> {
    match obj {
        Objective::LogisticL2 { lambda } => {
            let top = linalg::gram_max_eigenvalue(data.features(), data.len(), data.dim())?;
            Ok(CurvatureConstants {
                smoothness: top / 4.0 + lambda,
                strong_convexity: *lambda,
            })
        }
        Objective::Mlp { .. } => Err(Error::Unsupported(
            "curvature constants are only defined for the logistic objective; \
             use estimate_smoothness for the mlp"
                .into(),
        )),
    }
}

/// Empirical smoothness estimate: the largest gradient Lipschitz ratio
/// `‖∇f(x) − ∇f(y)‖ / ‖x − y‖` over `pairs` random pairs drawn within
/// `radius` of `center`.
pub fn estimate_smoothness(
    obj: &Objective,
    data: &Dataset,
    center: &[f64],
    radius: f64,
    pairs: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if pairs == 0 || radius <= 0.0 {
        return Err(Error::InvalidInput("need pairs ≥ 1 and radius > 0".into()));
    }
    let normal = rand_distr::StandardNormal;
    let perturb = |rng: &mut dyn rand::RngCore| -> Vec<f64> {
        center
            .iter()
            .map(|&c| c + radius * rand::Rng::sample::<f64, _>(rng, normal))
            .collect()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let a = perturb(rng);
        let b = perturb(rng);
        let d = linalg::norm(&linalg::sub(&a, &b));
        if d == 0.0 {
            continue;
        }
        let ga = grad(obj, &a, data)?;
        let gb = grad(obj, &b, data)?;
        worst = worst.max(linalg::norm(&linalg::sub(&ga, &gb)) / d);
    }
    Ok(worst)
}

/// Flattened view of MLP parameters: per layer, a row-major `out×in` weight
/// block followed by an `out` bias block.
struct MlpView<'a> {
    layers: &'a [usize],
    params: &'a [f64],
}

impl<'a> MlpView<'a> {
    fn new(layers: &'a [usize], params: &'a [f64]) -> Self {
        MlpView { layers, params }
    }

    fn blocks(&self, layer: usize) -> (&[f64], &[f64]) {
        let mut offset = 0;
        for l in 0..layer {
            offset += self.layers[l] * self.layers[l + 1] + self.layers[l + 1];
        }
        let rows = self.layers[layer + 1];
        let cols = self.layers[layer];
        let w = &self.params[offset..offset + rows * cols];
        let b = &self.params[offset + rows * cols..offset + rows * cols + rows];
        (w, b)
    }

    /// Activations after every layer: `acts[0]` is the input, `acts[last]`
    /// the logits.
    fn forward(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let depth = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(depth + 1);
        acts.push(input.to_vec());
        for layer in 0..depth {
            let (w, b) = self.blocks(layer);
            let cols = self.layers[layer];
            let rows = self.layers[layer + 1];
            let prev = &acts[layer];
            let mut out = Vec::with_capacity(rows);
            for r in 0..rows {
                let z = linalg::dot(&w[r * cols..(r + 1) * cols], prev) + b[r];
                out.push(if layer + 1 < depth { z.tanh() } else { z });
            }
            acts.push(out);
        }
        acts
    }

    fn sample_loss(&self, input: &[f64], class: usize) -> f64 {
        let acts = self.forward(input);
        let logits = acts.last().unwrap();
        log_sum_exp(logits) - logits[class]
    }

    /// Add `weight` times this sample's gradient into `out`.
    fn accumulate_sample_grad(&self, input: &[f64], class: usize, weight: f64, out: &mut [f64]) {
        let depth = self.layers.len() - 1;
        let acts = self.forward(input);
        let logits = acts.last().unwrap();

        // softmax − onehot
        let lse = log_sum_exp(logits);
        let mut delta: Vec<f64> = logits.iter().map(|&z| (z - lse).exp()).collect();
        delta[class] -= 1.0;

        let mut offsets = Vec::with_capacity(depth);
        let mut offset = 0;
        for l in 0..depth {
            offsets.push(offset);
            offset += self.layers[l] * self.layers[l + 1] + self.layers[l + 1];
        }

        for layer in (0..depth).rev() {
            let cols = self.layers[layer];
            let rows = self.layers[layer + 1];
            let base = offsets[layer];
            let prev = &acts[layer];
            for r in 0..rows {
                let d = delta[r] * weight;
                let wrow = &mut out[base + r * cols..base + (r + 1) * cols];
                for (o, &p) in wrow.iter_mut().zip(prev) {
                    *o += d * p;
                }
                out[base + rows * cols + r] += d;
            }
            if layer > 0 {
                let (w, _) = self.blocks(layer);
                let mut next = vec![0.0; cols];
                for r in 0..rows {
                    let d = delta[r];
                    for c in 0..cols {
                        next[c] += d * w[r * cols + c];
                    }
                }
                // tanh' = 1 − tanh²; acts[layer] already holds tanh values.
                for (n, &a) in next.iter_mut().zip(prev) {
                    *n *= 1.0 - a * a;
                }
                delta = next;
            }
        }
    }
}

fn log_sum_exp(zs: &[f64]) -> f64 {
    let m = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + zs.iter().map(|&z| (z - m).exp()).sum::<f64>().ln()
}

/// Raw output logits of an MLP parameter vector on one input row.
pub(crate) fn mlp_logits(layers: &[usize], params: &[f64], input: &[f64]) -> Vec<f64> {
    MlpView::new(layers, params).forward(input).pop().unwrap()
}
