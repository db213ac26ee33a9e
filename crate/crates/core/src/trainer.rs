//! The training loop: two-phase rollouts per query, difficulty-scheduled
//! hints, advantage estimation, factor assembly and one ascent step.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advantage::{estimate, AdvantageMode, AdvantageReport};
use crate::config::{ScheduleMode, TrainConfig};
use crate::error::{ensure, Error, Result};
use crate::features::{ContextTracker, FeatureSpec};
use crate::hint::{annealing_ratio, difficulty_prior, hint_length, hint_ratio};
use crate::modulation::{token_factors, FactorMode, TokenFactorPlan};
use crate::policy::{checkpoint_save, grad_from_dist, Decoding, Gradient, PolicyParams, SparseGrad, StepDistribution};
use crate::rng::{self, Purpose};
use crate::rollout::{roll_hint, roll_naive, Rollout, RolloutGroup, RolloutKey, RolloutSettings};
use crate::task::{HintCorpusEntry, TaskInstance, Vocab};

/// Everything computed for one query in one step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub step: usize,
    pub warmup: bool,
    pub diff_n: f64,
    pub hint_ratio: f64,
    pub hint_len: usize,
    pub group: RolloutGroup,
    pub advantages: AdvantageReport,
    pub factors: Vec<TokenFactorPlan>,
}

/// Per-token coefficient of the policy-gradient assembly:
/// `k * ratio * A / (G * |o|)` given the current log-probs.
pub fn token_coefficient(
    factor: f64,
    logprob_now: f64,
    logprob_old: f64,
    advantage: f64,
    group_size: usize,
    rollout_len: usize,
    clip_eps: Option<f64>,
) -> f64 {
    if factor == 0.0 || advantage == 0.0 {
        return 0.0;
    }
    let mut ratio = (logprob_now - logprob_old).exp();
    if let Some(eps) = clip_eps {
        ratio = ratio.clamp(1.0 - eps, 1.0 + eps);
    }
    factor * ratio * advantage / (group_size as f64 * rollout_len as f64)
}

/// Accumulates one rollout's contribution into `grad` by replaying its
/// contexts under `params`. Tokens with a zero coefficient are skipped
/// outright, so nothing about their logits can reach the update.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_rollout(
    grad: &mut Gradient,
    params: &PolicyParams,
    reference: Option<&PolicyParams>,
    vocab: &Vocab,
    task: &TaskInstance,
    rollout: &Rollout,
    factors: &[f64],
    advantage: f64,
    group_size: usize,
    clip_eps: Option<f64>,
    kl_coef: f64,
) -> Result<()> {
    let len = rollout.len();
    if len == 0 {
        return Ok(());
    }
    let mut tracker = ContextTracker::new(params.spec(), vocab, task);
    let norm = 1.0 / (group_size as f64 * len as f64);
    for (t, &tok) in rollout.tokens.iter().enumerate() {
        let sampled = t >= rollout.hint_len;
        let kl_active = kl_coef > 0.0 && sampled && reference.is_some();
        if factors[t] != 0.0 && advantage != 0.0 || kl_active {
            let ctx = tracker.context();
            let active = params.spec().active(&ctx)?;
            let dist = StepDistribution::from_logits(&params.logits(&active));
            let coef = token_coefficient(
                factors[t],
                dist.logprobs[tok as usize],
                rollout.logprob_old[t],
                advantage,
                group_size,
                len,
                clip_eps,
            );
            if kl_active {
                let reference = reference.expect("checked above");
                let ref_dist = StepDistribution::from_logits(&reference.logits(&active));
                grad.add_scaled(&kl_grad(active.clone(), &dist, &ref_dist), -kl_coef * norm);
            }
            if coef != 0.0 {
                grad.add_scaled(&grad_from_dist(active, &dist, tok), coef);
            }
        }
        tracker.push(tok);
    }
    Ok(())
}

/// Gradient of `KL(pi || ref)` at one context with respect to the logits,
/// `p_j (log p_j - log r_j - KL)`, in the factored form of [`SparseGrad`].
fn kl_grad(features: Vec<usize>, p: &StepDistribution, r: &StepDistribution) -> SparseGrad {
    let kl: f64 = p
        .probs
        .iter()
        .zip(p.logprobs.iter().zip(&r.logprobs))
        .map(|(pj, (lp, lr))| pj * (lp - lr))
        .sum();
    let row_coeffs = p
        .probs
        .iter()
        .zip(p.logprobs.iter().zip(&r.logprobs))
        .map(|(pj, (lp, lr))| pj * (lp - lr - kl))
        .collect();
    SparseGrad { features, row_coeffs }
}

/// Rollouts, advantages and factors for one query.
pub fn process_query(
    params: &PolicyParams,
    vocab: &Vocab,
    cfg: &TrainConfig,
    entry: &HintCorpusEntry,
    step: usize,
    key: RolloutKey,
) -> Result<QueryOutcome> {
    let settings = RolloutSettings {
        vocab: *vocab,
        max_len: cfg.max_len,
        decoding: Decoding::Temperature(cfg.temperature),
    };
    let naive = roll_naive(params, &settings, &entry.task, cfg.n, key)?;
    let naive_rewards: Vec<f64> = naive.iter().map(|r| r.reward.total).collect();
    let prior = difficulty_prior(&naive_rewards)?;
    let warmup = cfg.grpo_only || step <= cfg.warmup_steps;
    let skip = warmup || (cfg.skip_solved && prior.diff_n <= 0.0);

    let (w, h, hint) = if skip {
        (0.0, 0, Vec::new())
    } else {
        let w = match cfg.schedule_mode {
            ScheduleMode::Adaptive => {
                let mut noise = rng::stream(key.seed, Purpose::HintNoise, key.step, key.task, 0);
                hint_ratio(&prior, &cfg.hint, &mut noise)
            }
            ScheduleMode::Annealing => annealing_ratio(step, cfg.steps, &cfg.hint),
            ScheduleMode::Fixed => cfg.hint.w_max,
        };
        let h = hint_length(w, entry.teacher_len(), cfg.max_len);
        (w, h, roll_hint(params, &settings, entry, cfg.m, h, key)?)
    };
    let hint_rewards: Vec<f64> = hint.iter().map(|r| r.reward.total).collect();
    let mode = if warmup { AdvantageMode::Pooled } else { cfg.advantage };
    let advantages = estimate(&naive_rewards, &hint_rewards, mode)?;
    let group = RolloutGroup { naive, hint };
    let factor_mode = if warmup { FactorMode::None } else { cfg.factors };
    let factors = group
        .iter()
        .zip(&advantages.a_hat)
        .map(|(r, &a)| token_factors(r, a, cfg.alpha, factor_mode))
        .collect();
    Ok(QueryOutcome {
        step,
        warmup,
        diff_n: prior.diff_n,
        hint_ratio: w,
        hint_len: h,
        group,
        advantages,
        factors,
    })
}

/// The query's summed gradient contribution.
pub fn query_gradient(
    params: &PolicyParams,
    reference: Option<&PolicyParams>,
    vocab: &Vocab,
    cfg: &TrainConfig,
    task: &TaskInstance,
    outcome: &QueryOutcome,
) -> Result<Gradient> {
    let mut grad = Gradient::zeros(params.spec());
    let g = outcome.group.size();
    for ((rollout, plan), &adv) in outcome.group.iter().zip(&outcome.factors).zip(&outcome.advantages.a_tilde) {
        accumulate_rollout(
            &mut grad,
            params,
            reference,
            vocab,
            task,
            rollout,
            &plan.factors,
            adv,
            g,
            cfg.clip_eps,
            cfg.kl_coef,
        )?;
    }
    Ok(grad)
}

/// Deterministic per-step telemetry (`metrics_v1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub schema: String,
    pub step: usize,
    pub warmup: bool,
    pub reward_mean: f64,
    pub reward_naive: f64,
    pub reward_hint: Option<f64>,
    pub accuracy_naive: f64,
    pub accuracy_hint: Option<f64>,
    pub entropy_mean: f64,
    pub entropy_naive: f64,
    pub entropy_hint: Option<f64>,
    pub length_naive: f64,
    pub length_hint: Option<f64>,
    pub grad_norm: f64,
    pub hint_ratio_mean: f64,
    pub hint_len_mean: f64,
    pub clip_frac: f64,
    pub format_mean: f64,
    pub degenerate_groups: usize,
    pub all_degenerate: bool,
    pub empty_continuations: usize,
}

pub const METRICS_SCHEMA: &str = "metrics_v1";

fn mean_of<'a>(xs: impl Iterator<Item = &'a Rollout>, f: impl Fn(&Rollout) -> f64) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), r| (s + f(r), n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Token-weighted mean entropy over policy-generated tokens.
fn generated_entropy<'a>(xs: impl Iterator<Item = &'a Rollout>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), r| {
        (s + r.entropy[r.hint_len..].iter().sum::<f64>(), n + r.continuation_len())
    });
    (n > 0).then(|| sum / n as f64)
}

impl StepMetrics {
    pub fn from_outcomes(step: usize, outcomes: &[QueryOutcome], grad_norm: f64) -> Self {
        let naive = || outcomes.iter().flat_map(|o| o.group.naive.iter());
        let hint = || outcomes.iter().flat_map(|o| o.group.hint.iter());
        let all = || naive().chain(hint());
        let reward = |r: &Rollout| r.reward.total;
        let correct = |r: &Rollout| f64::from(r.reward.answer_correct);
        let degenerate_groups = outcomes.iter().filter(|o| o.advantages.degenerate).count();
        let nq = outcomes.len().max(1) as f64;
        Self {
            schema: METRICS_SCHEMA.to_string(),
            step,
            warmup: outcomes.first().is_some_and(|o| o.warmup),
            reward_mean: mean_of(all(), reward).unwrap_or(0.0),
            reward_naive: mean_of(naive(), reward).unwrap_or(0.0),
            reward_hint: mean_of(hint(), reward),
            accuracy_naive: mean_of(naive(), correct).unwrap_or(0.0),
            accuracy_hint: mean_of(hint(), correct),
            entropy_mean: generated_entropy(all()).unwrap_or(0.0),
            entropy_naive: generated_entropy(naive()).unwrap_or(0.0),
            entropy_hint: generated_entropy(hint()),
            length_naive: mean_of(naive(), |r| r.len() as f64).unwrap_or(0.0),
            length_hint: mean_of(hint(), |r| r.len() as f64),
            grad_norm,
            hint_ratio_mean: outcomes.iter().map(|o| o.hint_ratio).sum::<f64>() / nq,
            hint_len_mean: outcomes.iter().map(|o| o.hint_len as f64).sum::<f64>() / nq,
            clip_frac: mean_of(all(), |r| f64::from(u8::from(r.truncated))).unwrap_or(0.0),
            format_mean: mean_of(all(), |r| f64::from(r.reward.format_ok)).unwrap_or(0.0),
            degenerate_groups,
            all_degenerate: degenerate_groups == outcomes.len(),
            empty_continuations: outcomes
                .iter()
                .flat_map(|o| &o.factors)
                .filter(|p| p.empty_continuation)
                .count(),
        }
    }
}

pub struct StepResult {
    pub metrics: StepMetrics,
    pub outcomes: Vec<QueryOutcome>,
    pub gradient: Gradient,
}

/// One optimisation step over `batch`. Query `i` of the batch draws from
/// streams keyed by `(step, i)`; gradients are reduced in batch order.
pub fn train_step(
    params: &mut PolicyParams,
    reference: Option<&PolicyParams>,
    batch: &[&HintCorpusEntry],
    vocab: &Vocab,
    cfg: &TrainConfig,
    step: usize,
) -> Result<StepResult> {
    ensure!(!batch.is_empty(), "training step needs a non-empty batch");
    ensure!(step >= 1, "steps are numbered from 1");
    let snapshot: &PolicyParams = params;
    let per_query: Vec<(QueryOutcome, Gradient)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let key = RolloutKey {
                seed: cfg.seed,
                step: step as u64,
                task: i as u64,
            };
            let outcome = process_query(snapshot, vocab, cfg, entry, step, key)?;
            let grad = query_gradient(snapshot, reference, vocab, cfg, &entry.task, &outcome)?;
            Ok((outcome, grad))
        })
        .collect::<Result<_>>()?;
    let mut gradient = Gradient::zeros(params.spec());
    let mut outcomes = Vec::with_capacity(per_query.len());
    for (o, g) in per_query {
        gradient.add(&g);
        outcomes.push(o);
    }
    let metrics = StepMetrics::from_outcomes(step, &outcomes, gradient.norm());
    if !metrics.all_degenerate || cfg.kl_coef > 0.0 {
        params.ascend(&gradient, cfg.learning_rate);
    }
    Ok(StepResult {
        metrics,
        outcomes,
        gradient,
    })
}

/// Corpus indices of the batch at `step`: consecutive slices of per-epoch
/// permutations keyed by the seed, so any step's batch is computable without
/// replaying earlier ones.
pub fn batch_indices(corpus_len: usize, batch_size: usize, step: usize, seed: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(batch_size);
    let mut cached: Option<(usize, Vec<usize>)> = None;
    for j in 0..batch_size {
        let pos = (step - 1) * batch_size + j;
        let (epoch, within) = (pos / corpus_len, pos % corpus_len);
        if cached.as_ref().map(|c| c.0) != Some(epoch) {
            let mut perm: Vec<usize> = (0..corpus_len).collect();
            perm.shuffle(&mut rng::stream(seed, Purpose::Shuffle, epoch as u64, 0, 0));
            cached = Some((epoch, perm));
        }
        out.push(cached.as_ref().expect("filled above").1[within]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Pass1,
    AvgK,
}

/// Hint-free accuracy on `tasks`: greedy single-rollout accuracy, or the
/// mean over `k` temperature-1 samples per task.
pub fn evaluate(
    params: &PolicyParams,
    vocab: &Vocab,
    tasks: &[TaskInstance],
    mode: EvalMode,
    k: usize,
    max_len: usize,
    seed: u64,
) -> Result<f64> {
    ensure!(!tasks.is_empty(), "evaluation needs at least one task");
    ensure!(k >= 1, "avg@k needs k >= 1");
    let (decoding, samples) = match mode {
        EvalMode::Pass1 => (Decoding::Greedy, 1),
        EvalMode::AvgK => (Decoding::Temperature(1.0), k),
    };
    let settings = RolloutSettings {
        vocab: *vocab,
        max_len,
        decoding,
    };
    let per_task: Vec<f64> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let mut hits = 0usize;
            for s in 0..samples {
                let mut r = rng::stream(seed, Purpose::Eval, i as u64, s as u64, 0);
                let ro = crate::rollout::sample_rollout(params, &settings, task, &[], crate::rollout::RolloutKind::Naive, &mut r)?;
                hits += usize::from(ro.reward.answer_correct);
            }
            Ok(hits as f64 / samples as f64)
        })
        .collect::<Result<_>>()?;
    Ok(per_task.iter().sum::<f64>() / per_task.len() as f64)
}

/// Where a run writes its artifacts.
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.jsonl")
    }

    pub fn timing(&self) -> PathBuf {
        self.dir.join("timing.jsonl")
    }

    pub fn checkpoint(&self, step: usize) -> PathBuf {
        self.dir.join(format!("step_{step:06}.ckpt"))
    }

    pub fn final_checkpoint(&self) -> PathBuf {
        self.dir.join("final.ckpt")
    }
}

pub struct RunSummary {
    pub params: PolicyParams,
    pub metrics: Vec<StepMetrics>,
    pub paths: RunPaths,
}

/// Runs steps `start+1..=cfg.steps`, writing one metrics line per step,
/// periodic checkpoints, and `final.ckpt`. Wall-clock times go to a
/// separate `timing.jsonl` so the metrics log stays reproducible.
pub fn run_training(
    cfg: &TrainConfig,
    vocab: &Vocab,
    spec: &FeatureSpec,
    corpus: &[HintCorpusEntry],
    out_dir: &Path,
    resume: Option<(PolicyParams, u64)>,
) -> Result<RunSummary> {
    ensure!(!corpus.is_empty(), "training corpus is empty");
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let paths = RunPaths {
        dir: out_dir.to_path_buf(),
    };
    let (mut params, start) = match resume {
        Some((p, s)) => {
            ensure!(p.spec() == spec, "resumed parameters do not match the configured features");
            (p, s as usize)
        }
        None => (PolicyParams::zeros(*spec), 0),
    };
    let reference = (cfg.kl_coef > 0.0).then(|| PolicyParams::zeros(*spec));
    let open = |p: &Path| -> Result<BufWriter<File>> {
        let f = OpenOptions::new()
            .create(true)
            .write(true)
            .append(start > 0)
            .truncate(start == 0)
            .open(p)
            .map_err(|e| Error::io(p, e))?;
        Ok(BufWriter::new(f))
    };
    let mut metrics_out = open(&paths.metrics())?;
    let mut timing_out = open(&paths.timing())?;
    if start == 0 {
        checkpoint_save(&params, 0, &paths.checkpoint(0))?;
    }
    let mut log = Vec::new();
    for step in start + 1..=cfg.steps {
        let t0 = Instant::now();
        let batch: Vec<&HintCorpusEntry> = batch_indices(corpus.len(), cfg.batch_size, step, cfg.seed)
            .into_iter()
            .map(|i| &corpus[i])
            .collect();
        let res = train_step(&mut params, reference.as_ref(), &batch, vocab, cfg, step)?;
        let line = serde_json::to_string(&res.metrics).expect("metrics serialize");
        writeln!(metrics_out, "{line}").map_err(|e| Error::io(paths.metrics(), e))?;
        writeln!(
            timing_out,
            "{{\"step\":{step},\"wall_ms\":{:.3}}}",
            t0.elapsed().as_secs_f64() * 1e3
        )
        .map_err(|e| Error::io(paths.timing(), e))?;
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
            checkpoint_save(&params, step as u64, &paths.checkpoint(step))?;
        }
        log.push(res.metrics);
    }
    metrics_out.flush().map_err(|e| Error::io(paths.metrics(), e))?;
    timing_out.flush().map_err(|e| Error::io(paths.timing(), e))?;
    checkpoint_save(&params, cfg.steps.max(start) as u64, &paths.final_checkpoint())?;
    Ok(RunSummary {
        params,
        metrics: log,
        paths,
    })
}
