//! Naive and hint-guided rollouts from a parameter snapshot.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::features::ContextTracker;
use crate::policy::{next_distribution, sample_token, Decoding, PolicyParams};
use crate::rng::{self, Purpose, StreamRng};
use crate::task::{verify, HintCorpusEntry, RewardBreakdown, TaskInstance, TokenId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutKind {
    Naive,
    Hint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub kind: RolloutKind,
    pub tokens: Vec<TokenId>,
    /// Forced teacher prefix length; 0 for naive rollouts.
    pub hint_len: usize,
    pub logprob_new: Vec<f64>,
    /// 0 (probability 1) on hint tokens, the sampling-time log-prob elsewhere.
    pub logprob_old: Vec<f64>,
    pub entropy: Vec<f64>,
    pub truncated: bool,
    pub reward: RewardBreakdown,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens produced by the policy itself (`t >= hint_len`).
    pub fn continuation_len(&self) -> usize {
        self.tokens.len() - self.hint_len
    }
}

/// Importance ratio `pi_theta / pi_old` at token `t`, optionally clipped to
/// `[1 - eps, 1 + eps]`.
pub fn importance_ratio(rollout: &Rollout, t: usize, clip_eps: Option<f64>) -> f64 {
    let r = (rollout.logprob_new[t] - rollout.logprob_old[t]).exp();
    match clip_eps {
        Some(eps) => r.clamp(1.0 - eps, 1.0 + eps),
        None => r,
    }
}

/// Sampling settings shared by both rollout kinds.
#[derive(Debug, Clone, Copy)]
pub struct RolloutSettings {
    pub vocab: Vocab,
    pub max_len: usize,
    pub decoding: Decoding,
}

/// Forces `prefix`, then samples until `EOS` or `max_len` tokens.
pub fn sample_rollout(
    params: &PolicyParams,
    settings: &RolloutSettings,
    task: &TaskInstance,
    prefix: &[TokenId],
    kind: RolloutKind,
    rng: &mut StreamRng,
) -> Result<Rollout> {
    ensure!(prefix.len() <= settings.max_len, "hint prefix of {} exceeds max length {}", prefix.len(), settings.max_len);
    ensure!(kind == RolloutKind::Hint || prefix.is_empty(), "naive rollouts take no prefix");
    let mut tracker = ContextTracker::new(params.spec(), &settings.vocab, task);
    let cap = settings.max_len;
    let mut out = Rollout {
        kind,
        tokens: Vec::with_capacity(cap),
        hint_len: prefix.len(),
        logprob_new: Vec::with_capacity(cap),
        logprob_old: Vec::with_capacity(cap),
        entropy: Vec::with_capacity(cap),
        truncated: true,
        reward: RewardBreakdown::zero(),
    };
    while out.tokens.len() < cap {
        let t = out.tokens.len();
        let dist = next_distribution(params, &tracker.context())?;
        let (tok, old) = if t < prefix.len() {
            (prefix[t], 0.0)
        } else {
            let tok = sample_token(&dist, settings.decoding, rng);
            (tok, dist.logprobs[tok as usize])
        };
        out.tokens.push(tok);
        out.logprob_new.push(dist.logprobs[tok as usize]);
        out.logprob_old.push(old);
        out.entropy.push(dist.entropy);
        tracker.push(tok);
        if tok == Vocab::EOS {
            out.truncated = false;
            break;
        }
    }
    if out.tokens.len() < prefix.len() {
        // the prefix itself ended with EOS
        out.hint_len = out.tokens.len();
    }
    out.reward = verify(task, &out.tokens);
    Ok(out)
}

/// Stream coordinates of one query's rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutKey {
    pub seed: u64,
    pub step: u64,
    pub task: u64,
}

pub fn roll_naive(
    params: &PolicyParams,
    settings: &RolloutSettings,
    task: &TaskInstance,
    n: usize,
    key: RolloutKey,
) -> Result<Vec<Rollout>> {
    ensure!(n >= 1, "need at least one naive rollout");
    (0..n)
        .map(|i| {
            let mut r = rng::stream(key.seed, Purpose::NaiveRollout, key.step, key.task, i as u64);
            sample_rollout(params, settings, task, &[], RolloutKind::Naive, &mut r)
        })
        .collect()
}

pub fn roll_hint(
    params: &PolicyParams,
    settings: &RolloutSettings,
    entry: &HintCorpusEntry,
    m: usize,
    hint_len: usize,
    key: RolloutKey,
) -> Result<Vec<Rollout>> {
    ensure!(m >= 1, "need at least one hint rollout");
    ensure!(
        hint_len <= entry.teacher_len(),
        "hint length {hint_len} exceeds teacher length {}",
        entry.teacher_len()
    );
    let prefix = &entry.teacher_trajectory[..hint_len];
    (0..m)
        .map(|i| {
            let mut r = rng::stream(key.seed, Purpose::HintRollout, key.step, key.task, i as u64);
            sample_rollout(params, settings, &entry.task, prefix, RolloutKind::Hint, &mut r)
        })
        .collect()
}

/// One query's rollouts: `n` naive followed by `m` hint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub naive: Vec<Rollout>,
    pub hint: Vec<Rollout>,
}

impl RolloutGroup {
    pub fn iter(&self) -> impl Iterator<Item = &Rollout> {
        self.naive.iter().chain(&self.hint)
    }

    pub fn size(&self) -> usize {
        self.naive.len() + self.hint.len()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.iter().map(|r| r.reward.total).collect()
    }
}
