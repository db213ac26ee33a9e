//! The hard-curriculum dynamics experiment: full ADHint against GRPO-only
//! training and the pooled-advantage ablation on the same corpus.
//!
//! The curriculum is sized so a zero-initialised policy almost never solves
//! a task unaided: every success needs a full work-then-answer trace of
//! 12 to 21 tokens. A KL pull towards the uniform initial policy keeps
//! per-token confidence bounded, so rewards stay graded with task length
//! instead of saturating once the copy skill is found.

use std::path::Path;

use crate::commands::build_corpora;
use crate::config::Config;
use crate::error::Result;
use crate::trainer::{evaluate, run_training, EvalMode, StepMetrics};

pub const HARD_CURRICULUM: &str = r#"
[task]
vocab_size = 10
alphabet = 4
train_lengths = [3, 6]
heldout_lengths = [3, 6]

[hint]
w_max = 0.9

[train]
steps = 300
kl_coef = 0.08
checkpoint_every = 0
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Adhint,
    GrpoOnly,
    Pooled,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Adhint, Variant::GrpoOnly, Variant::Pooled];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Adhint => "adhint",
            Variant::GrpoOnly => "grpo_only",
            Variant::Pooled => "pooled",
        }
    }

    fn overrides(self) -> &'static [&'static str] {
        match self {
            Variant::Adhint => &[],
            Variant::GrpoOnly => &["train.grpo_only=true"],
            Variant::Pooled => &["advantage.mode=pooled"],
        }
    }
}

/// The curriculum config for one seed with the variant's toggles applied.
pub fn hard_curriculum(seed: u64, variant: Variant, extra: &[String]) -> Result<Config> {
    let mut overrides = vec![format!("seed={seed}")];
    overrides.extend(variant.overrides().iter().map(|s| s.to_string()));
    overrides.extend_from_slice(extra);
    Config::from_toml_str(HARD_CURRICULUM, &overrides)
}

#[derive(Debug, Clone)]
pub struct VariantRun {
    pub variant: Variant,
    pub metrics: Vec<StepMetrics>,
    pub heldout_pass1: f64,
}

impl VariantRun {
    /// Naive-rollout mean reward at the first step, before any update.
    pub fn initial_naive_reward(&self) -> f64 {
        self.metrics.first().map_or(0.0, |m| m.reward_naive)
    }

    pub fn hint_in_band(&self, lo: f64, hi: f64) -> f64 {
        hint_in_band(&self.metrics, lo, hi)
    }

    pub fn final_quarter_gap(&self) -> f64 {
        final_quarter_gap(&self.metrics)
    }
}

/// Fraction of post-warmup steps whose hint-rollout mean reward lies in
/// `[lo, hi]`. Steps without hint rollouts count as outside.
pub fn hint_in_band(metrics: &[StepMetrics], lo: f64, hi: f64) -> f64 {
    let post: Vec<_> = metrics.iter().filter(|m| !m.warmup).collect();
    if post.is_empty() {
        return 0.0;
    }
    let inside = post
        .iter()
        .filter(|m| m.reward_hint.is_some_and(|r| (lo..=hi).contains(&r)))
        .count();
    inside as f64 / post.len() as f64
}

/// Mean of `hint - naive` reward over the last quarter of steps, with a
/// missing hint reward read as zero.
pub fn final_quarter_gap(metrics: &[StepMetrics]) -> f64 {
    let tail = &metrics[metrics.len() - metrics.len() / 4..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter()
        .map(|m| m.reward_hint.unwrap_or(0.0) - m.reward_naive)
        .sum::<f64>()
        / tail.len() as f64
}

/// Trains one variant from zero init on the configured corpus and scores
/// the final policy with greedy pass@1 on the heldout split.
pub fn run_variant(cfg: &Config, variant: Variant, out_dir: &Path) -> Result<VariantRun> {
    let vocab = cfg.vocab()?;
    let spec = cfg.feature_spec()?;
    let (train, heldout) = build_corpora(cfg)?;
    let summary = run_training(&cfg.train_config(), &vocab, &spec, &train, out_dir, None)?;
    let tasks: Vec<_> = heldout.into_iter().map(|e| e.task).collect();
    let heldout_pass1 = evaluate(
        &summary.params,
        &vocab,
        &tasks,
        EvalMode::Pass1,
        1,
        cfg.rollout.max_len,
        cfg.seed,
    )?;
    Ok(VariantRun {
        variant,
        metrics: summary.metrics,
        heldout_pass1,
    })
}
