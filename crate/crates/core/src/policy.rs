//! Log-linear autoregressive policy with closed-form gradients.
//!
//! Scores are `W * phi(context)` with `W` a `V x F` row-major matrix and `phi`
//! the binary feature map of [`crate::features`]; the next-token distribution
//! is their softmax.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureSpec, ReadHead, StepContext};
use crate::task::TokenId;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    spec: FeatureSpec,
    weights: Vec<f64>,
}

impl PolicyParams {
    /// Zero weights: the uniform policy.
    pub fn zeros(spec: FeatureSpec) -> Self {
        Self {
            weights: vec![0.0; spec.vocab_size * spec.dim()],
            spec,
        }
    }

    pub fn from_weights(spec: FeatureSpec, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != spec.vocab_size * spec.dim() {
            return Err(Error::Contract(format!(
                "weight count {} does not match {} x {}",
                weights.len(),
                spec.vocab_size,
                spec.dim()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Contract("non-finite weight".into()));
        }
        Ok(Self { spec, weights })
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn weight(&self, token: usize, feature: usize) -> f64 {
        self.weights[token * self.spec.dim() + feature]
    }

    pub fn weight_mut(&mut self, token: usize, feature: usize) -> &mut f64 {
        let f = self.spec.dim();
        &mut self.weights[token * f + feature]
    }

    pub fn logits(&self, active: &[usize]) -> Vec<f64> {
        let f = self.spec.dim();
        (0..self.spec.vocab_size)
            .map(|y| {
                let row = &self.weights[y * f..(y + 1) * f];
                active.iter().map(|&j| row[j]).sum()
            })
            .collect()
    }

    /// `theta += step * grad`.
    pub fn ascend(&mut self, grad: &Gradient, step: f64) {
        debug_assert_eq!(grad.data.len(), self.weights.len());
        for (w, g) in self.weights.iter_mut().zip(&grad.data) {
            *w += step * g;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    pub probs: Vec<f64>,
    pub logprobs: Vec<f64>,
    /// Shannon entropy in nats.
    pub entropy: f64,
}

impl StepDistribution {
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        let logprobs: Vec<f64> = logits.iter().map(|z| z - lse).collect();
        let probs: Vec<f64> = logprobs.iter().map(|lp| lp.exp()).collect();
        let entropy = -probs
            .iter()
            .zip(&logprobs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, lp)| p * lp)
            .sum::<f64>();
        Self {
            probs,
            logprobs,
            entropy: entropy.max(0.0),
        }
    }

    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best as TokenId
    }
}

pub fn next_distribution(params: &PolicyParams, ctx: &StepContext) -> Result<StepDistribution> {
    let active = params.spec.active(ctx)?;
    Ok(StepDistribution::from_logits(&params.logits(&active)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decoding {
    Greedy,
    Temperature(f64),
}

/// Greedy returns the argmax (lowest id on ties); otherwise inverse-CDF
/// sampling from the temperature-scaled distribution with one uniform draw.
pub fn sample_token<R: Rng + ?Sized>(dist: &StepDistribution, decoding: Decoding, rng: &mut R) -> TokenId {
    let scaled;
    let probs = match decoding {
        Decoding::Greedy => return dist.argmax(),
        Decoding::Temperature(1.0) => &dist.probs,
        Decoding::Temperature(t) => {
            assert!(t > 0.0, "temperature must be positive");
            let z: Vec<f64> = dist.logprobs.iter().map(|lp| lp / t).collect();
            scaled = StepDistribution::from_logits(&z).probs;
            &scaled
        }
    };
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as TokenId;
        }
    }
    // u landed in the rounding slack above the last cumulative sum
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0) as TokenId
}

/// `d log pi(y | ctx) / dW` in factored form: the outer product of
/// `row_coeffs = onehot(y) - probs` with the binary feature vector whose
/// active columns are `features`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrad {
    pub features: Vec<usize>,
    pub row_coeffs: Vec<f64>,
}

pub fn logprob_grad(params: &PolicyParams, ctx: &StepContext, y: TokenId) -> Result<SparseGrad> {
    let features = params.spec.active(ctx)?;
    let dist = StepDistribution::from_logits(&params.logits(&features));
    Ok(grad_from_dist(features, &dist, y))
}

pub(crate) fn grad_from_dist(features: Vec<usize>, dist: &StepDistribution, y: TokenId) -> SparseGrad {
    let mut row_coeffs: Vec<f64> = dist.probs.iter().map(|p| -p).collect();
    row_coeffs[y as usize] += 1.0;
    SparseGrad { features, row_coeffs }
}

/// Dense accumulator shaped like the weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    dim: usize,
    pub data: Vec<f64>,
}

impl Gradient {
    pub fn zeros(spec: &FeatureSpec) -> Self {
        Self {
            dim: spec.dim(),
            data: vec![0.0; spec.vocab_size * spec.dim()],
        }
    }

    pub fn add_scaled(&mut self, g: &SparseGrad, scale: f64) {
        for (y, c) in g.row_coeffs.iter().enumerate() {
            let row = &mut self.data[y * self.dim..(y + 1) * self.dim];
            for &j in &g.features {
                row[j] += scale * c;
            }
        }
    }

    pub fn add(&mut self, other: &Gradient) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn get(&self, token: usize, feature: usize) -> f64 {
        self.data[token * self.dim + feature]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

const MAGIC: &[u8; 8] = b"ADHCKPT\0";
const VERSION: u32 = 1;

/// Saves `params` as: magic, version, V, K, B, length buckets, alphabet,
/// head flag, step (all little-endian), then the row-major `f64` weights.
pub fn checkpoint_save(params: &PolicyParams, step: u64, path: &Path) -> Result<()> {
    if params.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Contract("refusing to checkpoint non-finite weights".into()));
    }
    let s = &params.spec;
    let mut buf = Vec::with_capacity(64 + 8 * params.weights.len());
    buf.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        s.vocab_size as u32,
        s.context_order as u32,
        s.query_buckets() as u32,
        s.length_buckets as u32,
        s.alphabet as u32,
        u32::from(s.read_head == ReadHead::Scratchpad),
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&step.to_le_bytes());
    for w in &params.weights {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint, requiring its shape to match `expected`. Returns the
/// parameters and the training step they were saved at.
pub fn checkpoint_load(path: &Path, expected: &FeatureSpec) -> Result<(PolicyParams, u64)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::parse(path, 0, msg.to_string());
    if bytes.len() < 44 || &bytes[..8] != MAGIC {
        return Err(bad("not a policy checkpoint"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    if word(0) != VERSION as usize {
        return Err(bad("unsupported checkpoint version"));
    }
    let found = (word(1), word(2), word(3), word(4), word(5), word(6) == 1);
    let want = (
        expected.vocab_size,
        expected.context_order,
        expected.query_buckets(),
        expected.length_buckets,
        expected.alphabet,
        expected.read_head == ReadHead::Scratchpad,
    );
    if found != want {
        return Err(Error::Config(format!(
            "checkpoint shape (V, K, B, length buckets, alphabet, head) = {found:?} does not match configured {want:?}"
        )));
    }
    let step = u64::from_le_bytes(bytes[36..44].try_into().unwrap());
    let body = &bytes[44..];
    if body.len() != 8 * expected.vocab_size * expected.dim() {
        return Err(bad("weight block has the wrong length"));
    }
    let weights = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((PolicyParams::from_weights(*expected, weights)?, step))
}
