//! The s-level stochastic low-precision quantizer and its wire codec.
//!
//! A vector `x` is represented by its ℓ₂ norm, per-coordinate signs, and
//! per-coordinate integer levels in `[0, s]`. Coordinate `i` with ratio
//! `|x_i| / ‖x‖` falling in the bin `[l/s, (l+1)/s)` is rounded up to level
//! `l + 1` with probability `(|x_i|/‖x‖)·s − l` and down to `l` otherwise,
//! which makes the reconstruction `‖x‖ · sign(x_i) · level_i / s` an unbiased
//! estimator of `x_i`. A ratio of exactly 1 clamps to the top bin and
//! reproduces the coordinate deterministically.
//!
//! # Wire format
//!
//! Big-endian, bit-packed, MSB first:
//!
//! ```text
//! dim: 32 bits | s: 32 bits | norm: F bits | p sign bits | p level fields
//! ```
//!
//! Each level field is `ceil(log2(s+1))` bits; the buffer is padded to a byte
//! boundary with zero bits. `F` is 32 or 64 and is inferred from the buffer
//! length on decode. The payload length in bits is therefore exactly
//! `64 + F + p·(1 + ceil(log2(s+1)))`.
//!
//! A sign bit is set only for `+1` on a coordinate with a nonzero level; a
//! zero-level coordinate always carries a zero sign bit. One bit cannot
//! distinguish the three signs `{−1, 0, +1}`, but a sign attached to a zero
//! level is unobservable (the coordinate reconstructs to exactly 0 either
//! way), so equality of [`QuantizedVector`]s ignores the sign of zero-level
//! coordinates and the codec canonicalizes it to 0.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Whether uploads are quantized, and at how many levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantizerMode {
    /// Upload raw vectors (`p·F` bits each); quantization variance is 0.
    Identity,
    /// Stochastic quantization with `levels` levels per coordinate.
    LowPrecision { levels: u32 },
}

impl QuantizerMode {
    /// The variance parameter `q` bounding `E‖Q(x) − x‖² ≤ q‖x‖²` for this
    /// mode at dimension `dim`: 0 for identity, `min(p/s², √p/s)` otherwise.
    pub fn variance_param(&self, dim: usize) -> f64 {
        match *self {
            QuantizerMode::Identity => 0.0,
            QuantizerMode::LowPrecision { levels } => default_variance_param(dim, levels),
        }
    }

    /// Uplink cost of one encoded update of dimension `dim`, in bits.
    pub fn upload_bits(&self, dim: usize, float_bits: u32) -> u64 {
        match *self {
            QuantizerMode::Identity => dim as u64 * float_bits as u64,
            QuantizerMode::LowPrecision { levels } => encoded_bits(dim, levels, float_bits),
        }
    }
}

/// The known variance bound `min(p/s², √p/s)` for this quantizer family.
pub fn default_variance_param(dim: usize, s: u32) -> f64 {
    let p = dim as f64;
    let s = s as f64;
    (p / (s * s)).min(p.sqrt() / s)
}

/// Encoded form of a quantized vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantizedVector {
    norm: f64,
    signs: Vec<i8>,
    levels: Vec<u32>,
    level_count: u32,
}

impl QuantizedVector {
    /// Build from parts, checking the type invariants.
    pub fn new(norm: f64, signs: Vec<i8>, levels: Vec<u32>, level_count: u32) -> Result<Self> {
        if signs.len() != levels.len() || signs.is_empty() {
            return Err(Error::InvalidInput(
                "quantized vector: signs/levels must be nonempty and equal length".into(),
            ));
        }
        if level_count == 0 {
            return Err(Error::InvalidInput("level count must be ≥ 1".into()));
        }
        if !(norm.is_finite() && norm >= 0.0) {
            return Err(Error::InvalidInput(format!("invalid norm {norm}")));
        }
        if levels.iter().any(|&l| l > level_count) {
            return Err(Error::InvalidInput("level exceeds level count".into()));
        }
        if norm == 0.0 && levels.iter().any(|&l| l != 0) {
            return Err(Error::InvalidInput("zero norm with nonzero level".into()));
        }
        if signs.iter().any(|&s| !(-1..=1).contains(&s)) {
            return Err(Error::InvalidInput("sign outside {-1, 0, +1}".into()));
        }
        Ok(QuantizedVector {
            norm,
            signs,
            levels,
            level_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn level_count(&self) -> u32 {
        self.level_count
    }
}

impl PartialEq for QuantizedVector {
    /// Semantic equality: the sign of a coordinate whose level is 0 does not
    /// affect reconstruction and is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.norm == other.norm
            && self.level_count == other.level_count
            && self.levels == other.levels
            && self
                .signs
                .iter()
                .zip(&other.signs)
                .zip(&self.levels)
                .all(|((a, b), &l)| l == 0 || a == b)
    }
}

fn sign_of(x: f64) -> i8 {
    if x == 0.0 {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// Quantize `x` to `s` levels, drawing the stochastic rounding from `rng`.
///
/// A zero vector quantizes to all-zero levels and signs without touching the
/// stream. Every coordinate of a nonzero vector consumes exactly one draw,
/// which keeps stream consumption independent of the data.
pub fn quantize(x: &[f64], s: u32, rng: &mut impl Rng) -> Result<QuantizedVector> {
    if x.is_empty() {
        return Err(Error::InvalidInput("quantize: empty vector".into()));
    }
    if s == 0 {
        return Err(Error::InvalidInput(
            "quantize: need at least 1 level".into(),
        ));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "quantize: non-finite coordinate {bad}"
        )));
    }
    let norm = linalg::norm(x);
    let p = x.len();
    if norm == 0.0 {
        return QuantizedVector::new(0.0, vec![0; p], vec![0; p], s);
    }
    let mut signs = Vec::with_capacity(p);
    let mut levels = Vec::with_capacity(p);
    for &xi in x {
        // Rounding in the norm can push the ratio a hair above 1; clamp so the
        // top bin stays deterministic.
        let ratio = (xi.abs() / norm).min(1.0);
        let scaled = ratio * s as f64;
        let mut low = scaled.floor() as u32;
        if low >= s {
            low = s - 1;
        }
        let up_prob = scaled - low as f64;
        let u: f64 = rng.random();
        levels.push(low + u64::from(u < up_prob) as u32);
        signs.push(sign_of(xi));
    }
    QuantizedVector::new(norm, signs, levels, s)
}

/// Reconstruct the vector: `out[i] = norm · sign_i · level_i / s`.
pub fn dequantize(q: &QuantizedVector) -> Vec<f64> {
    let s = q.level_count as f64;
    q.signs
        .iter()
        .zip(&q.levels)
        .map(|(&sg, &l)| q.norm * sg as f64 * (l as f64 / s))
        .collect()
}

fn level_bits(s: u32) -> u32 {
    // ceil(log2(s + 1)); s ≥ 1 so this is ≥ 1.
    32 - s.leading_zeros()
}

/// Exact encoded size in bits: `64 + F + p·(1 + ceil(log2(s+1)))`.
pub fn encoded_bits(dim: usize, s: u32, float_bits: u32) -> u64 {
    64 + float_bits as u64 + dim as u64 * (1 + level_bits(s) as u64)
}

struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    fn new() -> Self {
        BitWriter {
            bytes: Vec::new(),
            bit_len: 0,
        }
    }

    /// Append the low `n` bits of `value`, most significant first.
    fn push(&mut self, value: u64, n: u32) {
        for i in (0..n).rev() {
            let bit = (value >> i) & 1;
            let byte_idx = self.bit_len / 8;
            if byte_idx == self.bytes.len() {
                self.bytes.push(0);
            }
            if bit == 1 {
                self.bytes[byte_idx] |= 1 << (7 - (self.bit_len % 8));
            }
            self.bit_len += 1;
        }
    }

    fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    fn read(&mut self, n: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..n {
            let byte_idx = self.pos / 8;
            if byte_idx >= self.bytes.len() {
                return Err(Error::Format("truncated buffer".into()));
            }
            let bit = (self.bytes[byte_idx] >> (7 - (self.pos % 8))) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        Ok(v)
    }
}

/// Serialize to the wire format. `float_bits` must be 32 or 64.
pub fn encode(q: &QuantizedVector, float_bits: u32) -> Result<Vec<u8>> {
    if float_bits != 32 && float_bits != 64 {
        return Err(Error::InvalidInput(format!(
            "float width must be 32 or 64 bits, got {float_bits}"
        )));
    }
    let p = q.dim();
    if p > u32::MAX as usize {
        return Err(Error::InvalidInput("dimension exceeds u32".into()));
    }
    let mut w = BitWriter::new();
    w.push(p as u64, 32);
    w.push(q.level_count as u64, 32);
    if float_bits == 32 {
        w.push((q.norm as f32).to_bits() as u64, 32);
    } else {
        w.push(q.norm.to_bits(), 64);
    }
    for (&sg, &l) in q.signs.iter().zip(&q.levels) {
        w.push(u64::from(l > 0 && sg > 0), 1);
    }
    let lb = level_bits(q.level_count);
    for &l in &q.levels {
        w.push(l as u64, lb);
    }
    let bytes = w.finish();
    debug_assert_eq!(
        bytes.len() as u64,
        encoded_bits(p, q.level_count, float_bits).div_ceil(8)
    );
    Ok(bytes)
}

/// Deserialize and validate a wire buffer.
pub fn decode(bytes: &[u8]) -> Result<QuantizedVector> {
    let mut r = BitReader::new(bytes);
    let p = r.read(32)? as usize;
    let s = r.read(32)? as u32;
    if p == 0 {
        return Err(Error::Format("zero dimension".into()));
    }
    if s == 0 {
        return Err(Error::Format("zero level count".into()));
    }
    if p > 1 << 28 {
        return Err(Error::Format(format!("implausible dimension {p}")));
    }
    // The header does not carry the float width; recover it from the length.
    let float_bits = [32u32, 64]
        .into_iter()
        .find(|&f| encoded_bits(p, s, f).div_ceil(8) == bytes.len() as u64)
        .ok_or_else(|| {
            Error::Format(format!(
                "buffer length {} matches no layout for dim {p}, {s} levels",
                bytes.len()
            ))
        })?;
    let norm = if float_bits == 32 {
        f32::from_bits(r.read(32)? as u32) as f64
    } else {
        f64::from_bits(r.read(64)?)
    };
    if !(norm.is_finite() && norm >= 0.0) {
        return Err(Error::Format(format!("invalid norm {norm}")));
    }
    let mut sign_bits = Vec::with_capacity(p);
    for _ in 0..p {
        sign_bits.push(r.read(1)? == 1);
    }
    let lb = level_bits(s);
    let mut levels = Vec::with_capacity(p);
    for _ in 0..p {
        let l = r.read(lb)? as u32;
        if l > s {
            return Err(Error::Format(format!("level {l} exceeds {s}")));
        }
        levels.push(l);
    }
    // Padding must be zero; anything else is corruption.
    while r.pos < bytes.len() * 8 {
        if r.read(1)? != 0 {
            return Err(Error::Format("nonzero padding".into()));
        }
    }
    let mut signs = Vec::with_capacity(p);
    for (&bit_set, &l) in sign_bits.iter().zip(&levels) {
        let sg = if l == 0 {
            if bit_set {
                return Err(Error::Format("sign bit set on zero level".into()));
            }
            0
        } else if bit_set {
            1
        } else {
            -1
        };
        signs.push(sg);
    }
    QuantizedVector::new(norm, signs, levels, s)
}

/// Monte-Carlo estimate of `E‖Q(x) − x‖² / ‖x‖²` at a fixed `x`.
pub fn empirical_variance_ratio(
    x: &[f64],
    s: u32,
    draws: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let nsq = linalg::sq_norm(x);
    if nsq == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for _ in 0..draws {
        let q = quantize(x, s, rng)?;
        let y = dequantize(&q);
        acc += linalg::sq_dist(&y, x) / nsq;
    }
    Ok(acc / draws as f64)
}

/// Empirical check of the variance contract for a whole mode: the maximum of
/// `E‖Q(x) − x‖² / ‖x‖²` over sampled random unit directions, spending
/// `trials` total quantizer draws (at least 10⁴).
pub fn estimate_variance_ratio(
    mode: QuantizerMode,
    dim: usize,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if trials < 10_000 {
        return Err(Error::InvalidInput(
            "variance estimation needs at least 10^4 trials".into(),
        ));
    }
    let s = match mode {
        QuantizerMode::Identity => return Ok(0.0),
        QuantizerMode::LowPrecision { levels } => levels,
    };
    let directions = 16;
    let draws = trials / directions;
    let normal = rand_distr::StandardNormal;
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let x: Vec<f64> = (0..dim).map(|_| rng.sample(normal)).collect();
        if linalg::norm(&x) == 0.0 {
            continue;
        }
        worst = worst.max(empirical_variance_ratio(&x, s, draws, rng)?);
    }
    Ok(worst)
}
