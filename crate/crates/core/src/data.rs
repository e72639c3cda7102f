//! Problem data: synthetic generators with a known optimum, IDX ingestion at
//! desk scale, i.i.d. sharding across nodes, and a small columnar dump format
//! for reproducible dataset snapshots.

use std::fs;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::{self, Dataset, Labels, Objective};
use crate::rng::{self, Purpose};

/// One node's local dataset plus the identity of its randomness stream.
#[derive(Debug, Clone)]
pub struct NodeShard {
    pub node_id: usize,
    pub data: Dataset,
    /// Derivation key identifying this shard's random streams.
    pub stream_key: u64,
}

/// A generated problem whose optimum is known exactly.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub data: Dataset,
    pub x_star: Vec<f64>,
    pub f_star: f64,
}

/// Generate a regularized logistic-regression problem with Gaussian features
/// and labels drawn from a planted logistic model, then solve it to a
/// gradient norm of at most 1e-10 with a damped Newton method so consumers
/// can measure exact distance to the optimum.
pub fn gen_synthetic_logreg(
    n_samples: usize,
    dim: usize,
    lambda: f64,
    seed: u64,
) -> Result<SyntheticProblem> {
    if dim == 0 || n_samples < dim {
        return Err(Error::InvalidInput(format!(
            "need n_samples ≥ dim ≥ 1, got {n_samples} × {dim}"
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(
            "synthetic logistic generation needs λ > 0 for a unique optimum".into(),
        ));
    }
    let mut r = rng::stream(seed, Purpose::DataGen, 0, 0);
    let planted: Vec<f64> = (0..dim)
        .map(|_| 2.0 / (dim as f64).sqrt() * r.sample::<f64, _>(StandardNormal))
        .collect();
    let mut features = Vec::with_capacity(n_samples * dim);
    let mut ys = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let row: Vec<f64> = (0..dim).map(|_| r.sample(StandardNormal)).collect();
        let z = linalg::dot(&planted, &row);
        let p = 1.0 / (1.0 + (-z).exp());
        ys.push(if r.random::<f64>() < p { 1.0 } else { -1.0 });
        features.extend(row);
    }
    let x_star = solve_logreg_newton(&features, n_samples, dim, &ys, lambda)?;
    let data = Dataset::new(features, dim, Labels::Binary(ys))?;
    let obj = Objective::logistic(lambda)?;
    let f_star = objectives::loss(&obj, &x_star, &data)?;
    Ok(SyntheticProblem {
        data,
        x_star,
        f_star,
    })
}

/// Damped Newton on the regularized logistic loss, written against its own
/// gradient/Hessian formulas so it stands apart from the objectives module it
/// is used to check.
fn solve_logreg_newton(
    features: &[f64],
    n: usize,
    p: usize,
    ys: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let sigmoid = |z: f64| -> f64 {
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    };
    let grad_at = |x: &[f64]| -> Vec<f64> {
        let mut g: Vec<f64> = x.iter().map(|&v| lambda * v).collect();
        for (i, &y) in ys.iter().enumerate() {
            let row = &features[i * p..(i + 1) * p];
            let z: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            let c = -y * sigmoid(-y * z) / n as f64;
            for (gj, &rj) in g.iter_mut().zip(row) {
                *gj += c * rj;
            }
        }
        g
    };
    let value_at = |x: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (i, &y) in ys.iter().enumerate() {
            let row = &features[i * p..(i + 1) * p];
            let z: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            let m = -y * z;
            acc += if m > 0.0 {
                m + (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p()
            };
        }
        acc / n as f64 + 0.5 * lambda * x.iter().map(|v| v * v).sum::<f64>()
    };

    let mut x = vec![0.0; p];
    for _ in 0..200 {
        let g = grad_at(&x);
        let gn = linalg::norm(&g);
        if gn <= 1e-11 {
            return Ok(x);
        }
        // Hessian = (1/n) Aᵀ D A + λI with D_ii = σ(z_i)(1 − σ(z_i)).
        let mut h = vec![0.0; p * p];
        for i in 0..n {
            let row = &features[i * p..(i + 1) * p];
            let z: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            let s = sigmoid(z);
            let d = s * (1.0 - s) / n as f64;
            for a in 0..p {
                let da = d * row[a];
                if da == 0.0 {
                    continue;
                }
                for b in 0..p {
                    h[a * p + b] += da * row[b];
                }
            }
        }
        for a in 0..p {
            h[a * p + a] += lambda;
        }
        let step = linalg::cholesky_solve(&mut h, &g)?;
        if gn < 1e-6 {
            // Quadratic basin: the objective is flat to machine precision, so
            // a value-based line search can stall. Take the full step.
            for (xi, si) in x.iter_mut().zip(&step) {
                *xi -= si;
            }
            continue;
        }
        // Backtrack on the true objective; Newton on this problem accepts the
        // full step almost always.
        let f0 = value_at(&x);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - t * si).collect();
            if value_at(&cand) <= f0 || t < 1e-8 {
                x = cand;
                break;
            }
            t *= 0.5;
        }
    }
    let g = grad_at(&x);
    if linalg::norm(&g) <= 1e-10 {
        Ok(x)
    } else {
        Err(Error::NoConvergence(format!(
            "newton stalled at gradient norm {}",
            linalg::norm(&g)
        )))
    }
}

/// Multiclass data from a planted teacher network: Gaussian features labeled
/// by the argmax of a randomly initialized one-hidden-layer net.
pub fn gen_synthetic_multiclass(
    n_samples: usize,
    dim: usize,
    classes: usize,
    teacher_hidden: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_samples == 0 || dim == 0 || classes < 2 || teacher_hidden == 0 {
        return Err(Error::InvalidInput(
            "multiclass generation needs samples, dim, hidden ≥ 1 and classes ≥ 2".into(),
        ));
    }
    let mut r = rng::stream(seed, Purpose::DataGen, 1, 0);
    let layers = vec![dim, teacher_hidden, classes];
    let teacher = Objective::mlp(layers.clone())?;
    let pdim = teacher.param_dim(dim);
    let params: Vec<f64> = (0..pdim)
        .map(|_| r.sample::<f64, _>(StandardNormal) / (dim as f64).sqrt())
        .collect();

    let mut features = Vec::with_capacity(n_samples * dim);
    let mut ids = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let row: Vec<f64> = (0..dim).map(|_| r.sample(StandardNormal)).collect();
        let logits = objectives::mlp_logits(&layers, &params, &row);
        let label = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        ids.push(label);
        features.extend(row);
    }
    Dataset::new(
        features,
        dim,
        Labels::Classes {
            ids,
            count: classes,
        },
    )
}

/// Split `data` into `n_nodes` shards by a uniformly random permutation cut
/// into near-equal contiguous blocks (sizes differ by at most one).
pub fn partition_iid(data: &Dataset, n_nodes: usize, seed: u64) -> Result<Vec<NodeShard>> {
    if n_nodes == 0 {
        return Err(Error::InvalidInput("need at least one node".into()));
    }
    if data.len() < n_nodes {
        return Err(Error::InvalidInput(format!(
            "cannot split {} samples over {n_nodes} nodes",
            data.len()
        )));
    }
    let mut perm: Vec<usize> = (0..data.len()).collect();
    let mut r = rng::stream(seed, Purpose::Partition, 0, 0);
    // Fisher–Yates
    for i in (1..perm.len()).rev() {
        let j = r.random_range(0..=i);
        perm.swap(i, j);
    }
    let n = data.len();
    let base = n / n_nodes;
    let extra = n % n_nodes;
    let mut shards = Vec::with_capacity(n_nodes);
    let mut offset = 0;
    for node_id in 0..n_nodes {
        let size = base + usize::from(node_id < extra);
        let idx = &perm[offset..offset + size];
        offset += size;
        shards.push(NodeShard {
            node_id,
            data: data.subset(idx)?,
            stream_key: rng::key(seed, Purpose::Partition, node_id as u64, 1),
        });
    }
    Ok(shards)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    if *pos + 4 > bytes.len() {
        return Err(Error::Format("idx: truncated header".into()));
    }
    let v = u32::from_be_bytes(bytes[*pos..*pos + 4].try_into().unwrap());
    *pos += 4;
    Ok(v)
}

/// Load an IDX image/label pair (the MNIST container format: big-endian
/// headers, u8 pixels). Pixels are scaled to [0, 1].
///
/// With `keep = Some(set)`, only samples whose label is in the set are
/// retained. A two-label set becomes a binary ±1 dataset (smaller label
/// → −1); any other set becomes class indices ordered by label value.
pub fn load_idx(images_path: &Path, labels_path: &Path, keep: Option<&[u8]>) -> Result<Dataset> {
    let mut image_bytes = Vec::new();
    fs::File::open(images_path)?.read_to_end(&mut image_bytes)?;
    let mut label_bytes = Vec::new();
    fs::File::open(labels_path)?.read_to_end(&mut label_bytes)?;

    let mut pos = 0;
    let magic = read_u32_be(&image_bytes, &mut pos)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!("idx: bad image magic {magic:#010x}")));
    }
    let count = read_u32_be(&image_bytes, &mut pos)? as usize;
    let rows = read_u32_be(&image_bytes, &mut pos)? as usize;
    let cols = read_u32_be(&image_bytes, &mut pos)? as usize;
    let dim = rows * cols;
    if image_bytes.len() != pos + count * dim {
        return Err(Error::Format(format!(
            "idx: image payload is {} bytes, expected {}",
            image_bytes.len() - pos,
            count * dim
        )));
    }

    let mut lpos = 0;
    let lmagic = read_u32_be(&label_bytes, &mut lpos)?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "idx: bad label magic {lmagic:#010x}"
        )));
    }
    let lcount = read_u32_be(&label_bytes, &mut lpos)? as usize;
    if lcount != count {
        return Err(Error::Format(format!(
            "idx: {count} images but {lcount} labels"
        )));
    }
    if label_bytes.len() != lpos + count {
        return Err(Error::Format("idx: truncated label payload".into()));
    }
    let raw_labels = &label_bytes[lpos..];

    let mut kept: Vec<u8> = match keep {
        Some(set) => {
            let mut v = set.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        }
        None => {
            let mut v: Vec<u8> = raw_labels.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        }
    };
    if kept.is_empty() {
        return Err(Error::InvalidInput("idx: empty label filter".into()));
    }
    kept.dedup();

    let mut features = Vec::new();
    let mut indices = Vec::new();
    for (i, &lab) in raw_labels.iter().enumerate() {
        if let Ok(k) = kept.binary_search(&lab) {
            indices.push(k);
            let px = &image_bytes[pos + i * dim..pos + (i + 1) * dim];
            features.extend(px.iter().map(|&b| b as f64 / 255.0));
        }
    }
    if indices.is_empty() {
        return Err(Error::InvalidInput(
            "idx: no samples match the label filter".into(),
        ));
    }
    let labels = if kept.len() == 2 {
        Labels::Binary(
            indices
                .iter()
                .map(|&k| if k == 0 { -1.0 } else { 1.0 })
                .collect(),
        )
    } else {
        Labels::Classes {
            ids: indices,
            count: kept.len(),
        }
    };
    Dataset::new(features, dim, labels)
}

const COLUMNAR_MAGIC: u32 = 0x4650_4451;
const COLUMNAR_VERSION: u32 = 1;

/// Dump a dataset as the columnar snapshot format: a 16-byte header (magic,
/// version, N, p — big-endian u32s), then p feature columns of N f64s each,
/// then a label block (tag byte 0 = binary f64s, 1 = class u32s preceded by
/// the class count). All scalars big-endian.
pub fn write_columnar(data: &Dataset, path: &Path) -> Result<()> {
    let n = data.len();
    let p = data.dim();
    let mut bytes = Vec::with_capacity(16 + n * p * 8);
    bytes.extend(COLUMNAR_MAGIC.to_be_bytes());
    bytes.extend(COLUMNAR_VERSION.to_be_bytes());
    bytes.extend((n as u32).to_be_bytes());
    bytes.extend((p as u32).to_be_bytes());
    for col in 0..p {
        for row in 0..n {
            bytes.extend(data.row(row)[col].to_bits().to_be_bytes());
        }
    }
    match data.labels() {
        Labels::Binary(v) => {
            bytes.push(0);
            for &y in v {
                bytes.extend(y.to_bits().to_be_bytes());
            }
        }
        Labels::Classes { ids, count } => {
            bytes.push(1);
            bytes.extend((*count as u32).to_be_bytes());
            for &c in ids {
                bytes.extend((c as u32).to_be_bytes());
            }
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reload a columnar snapshot written by [`write_columnar`].
pub fn read_columnar(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    let mut pos = 0;
    let magic = read_u32_be(&bytes, &mut pos)?;
    if magic != COLUMNAR_MAGIC {
        return Err(Error::Format(format!("columnar: bad magic {magic:#010x}")));
    }
    let version = read_u32_be(&bytes, &mut pos)?;
    if version != COLUMNAR_VERSION {
        return Err(Error::Format(format!(
            "columnar: unknown version {version}"
        )));
    }
    let n = read_u32_be(&bytes, &mut pos)? as usize;
    let p = read_u32_be(&bytes, &mut pos)? as usize;
    let need = n * p * 8;
    if bytes.len() < pos + need + 1 {
        return Err(Error::Format("columnar: truncated feature block".into()));
    }
    let mut features = vec![0.0; n * p];
    for col in 0..p {
        for row in 0..n {
            let b: [u8; 8] = bytes[pos..pos + 8].try_into().unwrap();
            features[row * p + col] = f64::from_bits(u64::from_be_bytes(b));
            pos += 8;
        }
    }
    let tag = bytes[pos];
    pos += 1;
    let labels = match tag {
        0 => {
            if bytes.len() != pos + n * 8 {
                return Err(Error::Format("columnar: truncated binary labels".into()));
            }
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                let b: [u8; 8] = bytes[pos..pos + 8].try_into().unwrap();
                v.push(f64::from_bits(u64::from_be_bytes(b)));
                pos += 8;
            }
            Labels::Binary(v)
        }
        1 => {
            let count = read_u32_be(&bytes, &mut pos)? as usize;
            if bytes.len() != pos + n * 4 {
                return Err(Error::Format("columnar: truncated class labels".into()));
            }
            let mut ids = Vec::with_capacity(n);
            for _ in 0..n {
                ids.push(read_u32_be(&bytes, &mut pos)? as usize);
            }
            Labels::Classes { ids, count }
        }
        t => return Err(Error::Format(format!("columnar: unknown label tag {t}"))),
    };
    Dataset::new(features, p, labels)
}
