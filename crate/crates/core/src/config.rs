//! TOML run configuration with one section per subsystem.
//!
//! Unknown keys are rejected. Command-line overrides use dotted paths
//! (`train.steps=50`) and are applied to the parsed document before it is
//! validated, so they win over file values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::advantage::AdvantageMode;
use crate::error::{Error, Result};
use crate::features::{FeatureSpec, ReadHead};
use crate::hint::HintSchedule;
use crate::modulation::FactorMode;
use crate::policy::Decoding;
use crate::rollout::RolloutSettings;
use crate::task::{Family, TaskSpace, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub vocab_size: usize,
    pub alphabet: usize,
    pub max_length: usize,
    pub families: Vec<Family>,
    pub train_count: usize,
    pub heldout_count: usize,
    pub train_lengths: [usize; 2],
    pub heldout_lengths: [usize; 2],
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            vocab_size: 32,
            alphabet: 8,
            max_length: 8,
            families: Family::ALL.to_vec(),
            train_count: 2000,
            heldout_count: 500,
            train_lengths: [2, 8],
            heldout_lengths: [2, 8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub context_order: usize,
    pub read_head: ReadHead,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            context_order: 3,
            read_head: ReadHead::Scratchpad,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutConfig {
    pub n: usize,
    pub m: usize,
    pub temperature: f64,
    pub max_len: usize,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            n: 8,
            m: 8,
            temperature: 1.0,
            max_len: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Ratio from each query's naive-rollout difficulty.
    Adaptive,
    /// One ratio for all queries, decaying linearly with the step.
    Annealing,
    /// Constant `w_max`.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HintConfig {
    pub w_max: f64,
    pub w_min: f64,
    pub noise_radius: f64,
    pub schedule: ScheduleMode,
    /// Skip hint rollouts for queries whose naive rollouts all scored 1.
    pub skip_solved: bool,
}

impl Default for HintConfig {
    fn default() -> Self {
        let s = HintSchedule::default();
        Self {
            w_max: s.w_max,
            w_min: s.w_min,
            noise_radius: s.noise_radius,
            schedule: ScheduleMode::Adaptive,
            skip_solved: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvantageConfig {
    pub mode: AdvantageMode,
}

impl Default for AdvantageConfig {
    fn default() -> Self {
        Self {
            mode: AdvantageMode::AeRdp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationConfig {
    pub mode: FactorMode,
    pub alpha: f64,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        Self {
            mode: FactorMode::Full,
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub steps: usize,
    pub batch_size: usize,
    pub warmup_steps: usize,
    pub learning_rate: f64,
    pub clip: bool,
    pub clip_eps: f64,
    pub kl_coef: f64,
    pub checkpoint_every: usize,
    /// Never issue hint rollouts: plain group-relative training throughout.
    pub grpo_only: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            steps: 300,
            batch_size: 16,
            warmup_steps: 5,
            learning_rate: 0.5,
            clip: false,
            clip_eps: 0.2,
            kl_coef: 0.0,
            checkpoint_every: 100,
            grpo_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { k: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub task: TaskConfig,
    pub policy: PolicyConfig,
    pub rollout: RolloutConfig,
    pub hint: HintConfig,
    pub advantage: AdvantageConfig,
    pub modulation: ModulationConfig,
    pub train: TrainSection,
    pub eval: EvalConfig,
}

/// Flat view of everything one training step needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub n: usize,
    pub m: usize,
    pub temperature: f64,
    pub max_len: usize,
    pub warmup_steps: usize,
    pub schedule_mode: ScheduleMode,
    pub hint: HintSchedule,
    pub skip_solved: bool,
    pub advantage: AdvantageMode,
    pub factors: FactorMode,
    pub alpha: f64,
    pub learning_rate: f64,
    pub clip_eps: Option<f64>,
    pub kl_coef: f64,
    pub checkpoint_every: usize,
    pub grpo_only: bool,
}

impl Config {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Config = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn vocab(&self) -> Result<Vocab> {
        Vocab::new(self.task.vocab_size, self.task.alphabet)
    }

    pub fn task_space(&self) -> Result<TaskSpace> {
        TaskSpace::new(self.vocab()?, self.task.max_length)
    }

    pub fn feature_spec(&self) -> Result<FeatureSpec> {
        Ok(FeatureSpec::new(
            &self.vocab()?,
            self.policy.context_order,
            self.task.max_length,
            self.policy.read_head,
        ))
    }

    pub fn rollout_settings(&self, decoding: Decoding) -> Result<RolloutSettings> {
        Ok(RolloutSettings {
            vocab: self.vocab()?,
            max_len: self.rollout.max_len,
            decoding,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            steps: self.train.steps,
            batch_size: self.train.batch_size,
            n: self.rollout.n,
            m: self.rollout.m,
            temperature: self.rollout.temperature,
            max_len: self.rollout.max_len,
            warmup_steps: self.train.warmup_steps,
            schedule_mode: self.hint.schedule,
            hint: HintSchedule {
                w_max: self.hint.w_max,
                w_min: self.hint.w_min,
                noise_radius: self.hint.noise_radius,
            },
            skip_solved: self.hint.skip_solved,
            advantage: self.advantage.mode,
            factors: self.modulation.mode,
            alpha: self.modulation.alpha,
            learning_rate: self.train.learning_rate,
            clip_eps: self.train.clip.then_some(self.train.clip_eps),
            kl_coef: self.train.kl_coef,
            checkpoint_every: self.train.checkpoint_every,
            grpo_only: self.train.grpo_only,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.task_space()?;
        let t = &self.task;
        for (name, [lo, hi]) in [("train_lengths", t.train_lengths), ("heldout_lengths", t.heldout_lengths)] {
            if lo < 2 || hi < lo || hi > t.max_length {
                return bad(format!("task.{name} = [{lo}, {hi}] must lie within [2, {}]", t.max_length));
            }
        }
        if t.families.is_empty() {
            return bad("task.families must not be empty".into());
        }
        if self.policy.context_order == 0 {
            return bad("policy.context_order must be at least 1".into());
        }
        let r = &self.rollout;
        if r.n == 0 || r.m == 0 {
            return bad("rollout.n and rollout.m must be positive".into());
        }
        if r.n + r.m < 2 || r.n < 2 && self.train.warmup_steps > 0 {
            return bad("groups need at least 2 rollouts".into());
        }
        if !(r.temperature > 0.0 && r.temperature.is_finite()) {
            return bad(format!("rollout.temperature must be positive, got {}", r.temperature));
        }
        if r.max_len < 2 {
            return bad("rollout.max_len must be at least 2".into());
        }
        self.train_config().hint.validate()?;
        let a = self.modulation.alpha;
        if !(a > 0.0 && a <= 1.0) {
            return bad(format!("modulation.alpha must lie in (0, 1], got {a}"));
        }
        let tr = &self.train;
        if tr.batch_size == 0 {
            return bad("train.batch_size must be positive".into());
        }
        if !(tr.learning_rate.is_finite() && tr.learning_rate >= 0.0) {
            return bad("train.learning_rate must be finite and non-negative".into());
        }
        if !(tr.clip_eps > 0.0 && tr.clip_eps < 1.0) {
            return bad("train.clip_eps must lie in (0, 1)".into());
        }
        if !(tr.kl_coef >= 0.0 && tr.kl_coef.is_finite()) {
            return bad("train.kl_coef must be non-negative".into());
        }
        if self.eval.k == 0 {
            return bad("eval.k must be positive".into());
        }
        Ok(())
    }
}

fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let value: toml::Value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut keys: Vec<&str> = path.trim().split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| Error::Config(format!("empty key in `{spec}`")))?;
    let mut table = doc;
    for k in keys {
        table = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{k}` in `{path}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
