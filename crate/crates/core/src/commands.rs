//! The `adhint` command line: argument types and one function per
//! subcommand, usable from code as well as from the binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::Config;
use crate::corpus::{read_corpus, write_corpus};
use crate::error::{Error, Result};
use crate::policy::checkpoint_load;
use crate::report::{export_csv, group_dump, read_metrics};
use crate::rollout::RolloutKey;
use crate::task::{teacher_trajectory, HintCorpusEntry, Split};
use crate::trainer::{evaluate, process_query, run_training, EvalMode};

/// Environment variable naming the default root for generated output.
pub const OUTPUT_ROOT_VAR: &str = "ADHINT_OUTPUT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "adhint", version, about = "Hint-guided policy-gradient lab on synthetic sequence tasks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate train and heldout hint corpora.
    GenData(GenDataArgs),
    /// Train a policy and write checkpoints plus a metrics log.
    Train(TrainArgs),
    /// Hint-free accuracy of a checkpoint.
    Eval(EvalArgs),
    /// Dump one full rollout group with advantages and token factors.
    Inspect(InspectArgs),
    /// Convert a metrics log into per-panel CSV files.
    ExportCsv(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML config file; every key has a default.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dotted `section.key=value` override, repeatable.
    #[arg(short = 'o', long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Replaces the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    pub fn load(&self, extra: &[String]) -> Result<Config> {
        let mut overrides = self.overrides.clone();
        overrides.extend_from_slice(extra);
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        Config::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Output directory [default: $ADHINT_OUTPUT_ROOT/data or ./data]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing corpus files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdvantageFlag {
    AeRdp,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleFlag {
    Adaptive,
    Annealing,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FactorFlag {
    Full,
    NoCgm,
    NoMasking,
    None,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Directory holding `train.jsonl` [default: $ADHINT_OUTPUT_ROOT/data or ./data]
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Run directory [default: $ADHINT_OUTPUT_ROOT/run or ./run]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from this checkpoint.
    #[arg(long, conflicts_with = "init")]
    pub resume: Option<PathBuf>,
    /// Start from these weights at step 0 instead of zeros.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub advantage: Option<AdvantageFlag>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleFlag>,
    #[arg(long, value_enum)]
    pub factors: Option<FactorFlag>,
    /// Never issue hint rollouts.
    #[arg(long)]
    pub grpo_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitFlag {
    Train,
    Heldout,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "heldout")]
    pub split: SplitFlag,
    /// `pass1`, or `avg@K` / `avg_k` (K from `--k` or `eval.k`).
    #[arg(long, default_value = "pass1")]
    pub metric: String,
    #[arg(long)]
    pub k: Option<usize>,
    /// Also write the JSON record here.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitFlag,
    /// Corpus entry index.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Step number used for stream keys and the warmup rule
    /// [default: one past the checkpoint, at least the first hinted step]
    #[arg(long)]
    pub step: Option<usize>,
    /// Write the dump here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    /// Metrics log written by `train`.
    #[arg(long)]
    pub metrics: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn default_dir(explicit: &Option<PathBuf>, leaf: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        std::env::var_os(OUTPUT_ROOT_VAR)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join(leaf)
    })
}

fn corpus_file(dir: &Path, split: SplitFlag) -> PathBuf {
    dir.join(match split {
        SplitFlag::Train => "train.jsonl",
        SplitFlag::Heldout => "heldout.jsonl",
    })
}

#[derive(Debug, Serialize)]
struct SplitManifest {
    file: String,
    count: usize,
    lengths: [usize; 2],
    family_counts: Vec<(String, usize)>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    seed: u64,
    vocab_size: usize,
    alphabet: usize,
    max_length: usize,
    train: SplitManifest,
    heldout: SplitManifest,
}

fn split_manifest(file: &str, entries: &[HintCorpusEntry], lengths: [usize; 2], cfg: &Config) -> SplitManifest {
    SplitManifest {
        file: file.into(),
        count: entries.len(),
        lengths,
        family_counts: cfg
            .task
            .families
            .iter()
            .map(|f| (f.name().to_string(), entries.iter().filter(|e| e.task.family == *f).count()))
            .collect(),
    }
}

/// Builds the train and heldout corpora described by `cfg`.
pub fn build_corpora(cfg: &Config) -> Result<(Vec<HintCorpusEntry>, Vec<HintCorpusEntry>)> {
    let space = cfg.task_space()?;
    let t = &cfg.task;
    let make = |count, [lo, hi]: [usize; 2], split| -> Result<Vec<HintCorpusEntry>> {
        Ok(space
            .generate_mix(&t.families, count, (lo, hi), cfg.seed, split)?
            .iter()
            .map(teacher_trajectory)
            .collect())
    };
    Ok((
        make(t.train_count, t.train_lengths, Split::Train)?,
        make(t.heldout_count, t.heldout_lengths, Split::Heldout)?,
    ))
}

pub fn gen_data(args: &GenDataArgs) -> Result<PathBuf> {
    let cfg = args.cfg.load(&[])?;
    let dir = default_dir(&args.out, "data");
    let files = ["train.jsonl", "heldout.jsonl", "manifest.json"].map(|f| dir.join(f));
    if !args.force {
        if let Some(existing) = files.iter().find(|p| p.exists()) {
            return Err(Error::Config(format!(
                "{} already exists; pass --force to overwrite",
                existing.display()
            )));
        }
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let (train, heldout) = build_corpora(&cfg)?;
    write_corpus(&files[0], &train)?;
    write_corpus(&files[1], &heldout)?;
    let manifest = Manifest {
        seed: cfg.seed,
        vocab_size: cfg.task.vocab_size,
        alphabet: cfg.task.alphabet,
        max_length: cfg.task.max_length,
        train: split_manifest("train.jsonl", &train, cfg.task.train_lengths, &cfg),
        heldout: split_manifest("heldout.jsonl", &heldout, cfg.task.heldout_lengths, &cfg),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&files[2], text).map_err(|e| Error::io(&files[2], e))?;
    println!("wrote {} train / {} heldout entries to {}", train.len(), heldout.len(), dir.display());
    Ok(dir)
}

pub fn train(args: &TrainArgs) -> Result<PathBuf> {
    let mut extra = Vec::new();
    if let Some(a) = args.advantage {
        extra.push(format!("advantage.mode={}", flag_name(a)));
    }
    if let Some(s) = args.schedule {
        extra.push(format!("hint.schedule={}", flag_name(s)));
    }
    if let Some(f) = args.factors {
        extra.push(format!("modulation.mode={}", flag_name(f)));
    }
    if args.grpo_only {
        extra.push("train.grpo_only=true".into());
    }
    let cfg = args.cfg.load(&extra)?;
    let vocab = cfg.vocab()?;
    let spec = cfg.feature_spec()?;
    let data = default_dir(&args.data, "data");
    let corpus = read_corpus(&corpus_file(&data, SplitFlag::Train), &vocab)?;
    let out = default_dir(&args.out, "run");
    let resume = match (&args.resume, &args.init) {
        (Some(p), _) => Some(checkpoint_load(p, &spec)?),
        (None, Some(p)) => Some((checkpoint_load(p, &spec)?.0, 0)),
        (None, None) => None,
    };
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let cfg_path = out.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
    let summary = run_training(&cfg.train_config(), &vocab, &spec, &corpus, &out, resume)?;
    if let Some(last) = summary.metrics.last() {
        let hint = last.reward_hint.map_or("-".to_string(), |h| format!("{h:.3}"));
        println!(
            "step {}: reward naive {:.3} hint {hint}, grad norm {:.4}",
            last.step, last.reward_naive, last.grad_norm
        );
    }
    println!("final checkpoint: {}", summary.paths.final_checkpoint().display());
    Ok(out)
}

fn flag_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().replace('-', "_")
}

/// Accepts `pass1`, `avg_k`, or `avg@K`.
pub fn parse_metric(metric: &str, k: Option<usize>, default_k: usize) -> Result<(EvalMode, usize)> {
    match metric {
        "pass1" | "pass@1" => Ok((EvalMode::Pass1, 1)),
        "avg_k" => Ok((EvalMode::AvgK, k.unwrap_or(default_k))),
        m => match m.strip_prefix("avg@").map(str::parse::<usize>) {
            Some(Ok(n)) if n >= 1 => Ok((EvalMode::AvgK, k.unwrap_or(n))),
            _ => Err(Error::Config(format!("unknown metric `{m}`; use pass1, avg_k or avg@K"))),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct EvalRecord {
    pub checkpoint: String,
    pub step: u64,
    pub split: String,
    pub metric: String,
    pub k: usize,
    pub tasks: usize,
    pub accuracy: f64,
}

pub fn eval(args: &EvalArgs) -> Result<EvalRecord> {
    let cfg = args.cfg.load(&[])?;
    let vocab = cfg.vocab()?;
    let (params, step) = checkpoint_load(&args.checkpoint, &cfg.feature_spec()?)?;
    let (mode, k) = parse_metric(&args.metric, args.k, cfg.eval.k)?;
    let data = default_dir(&args.data, "data");
    let corpus = read_corpus(&corpus_file(&data, args.split), &vocab)?;
    let tasks: Vec<_> = corpus.into_iter().map(|e| e.task).collect();
    let accuracy = evaluate(&params, &vocab, &tasks, mode, k, cfg.rollout.max_len, cfg.seed)?;
    let record = EvalRecord {
        checkpoint: args.checkpoint.display().to_string(),
        step,
        split: flag_name(args.split),
        metric: match mode {
            EvalMode::Pass1 => "pass1".into(),
            EvalMode::AvgK => format!("avg@{k}"),
        },
        k,
        tasks: tasks.len(),
        accuracy,
    };
    let json = serde_json::to_string(&record).expect("record serializes");
    println!("{} on {} ({} tasks): {:.4}", record.metric, record.split, record.tasks, accuracy);
    println!("{json}");
    if let Some(p) = &args.record {
        fs::write(p, json + "\n").map_err(|e| Error::io(p, e))?;
    }
    Ok(record)
}

pub fn inspect(args: &InspectArgs) -> Result<String> {
    let cfg = args.cfg.load(&[])?;
    let vocab = cfg.vocab()?;
    let (params, ckpt_step) = checkpoint_load(&args.checkpoint, &cfg.feature_spec()?)?;
    let data = default_dir(&args.data, "data");
    let corpus = read_corpus(&corpus_file(&data, args.split), &vocab)?;
    let entry = corpus.get(args.index).ok_or_else(|| {
        Error::Config(format!("entry {} out of range; corpus has {} entries", args.index, corpus.len()))
    })?;
    let tc = cfg.train_config();
    let step = args
        .step
        .unwrap_or((ckpt_step as usize + 1).max(tc.warmup_steps + 1));
    let key = RolloutKey {
        seed: tc.seed,
        step: step as u64,
        task: args.index as u64,
    };
    let outcome = process_query(&params, &vocab, &tc, entry, step.max(1), key)?;
    let dump = group_dump(args.index, entry.task.family.name(), &outcome, tc.alpha);
    match &args.out {
        Some(p) => fs::write(p, &dump).map_err(|e| Error::io(p, e))?,
        None => print!("{dump}"),
    }
    Ok(dump)
}

pub fn export(args: &ExportArgs) -> Result<Vec<PathBuf>> {
    let metrics = read_metrics(&args.metrics)?;
    let files = export_csv(&metrics, &args.out)?;
    println!("wrote {} panels for {} steps to {}", files.len(), metrics.len(), args.out.display());
    Ok(files)
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(&a).map(drop),
        Command::Train(a) => train(&a).map(drop),
        Command::Eval(a) => eval(&a).map(drop),
        Command::Inspect(a) => inspect(&a).map(drop),
        Command::ExportCsv(a) => export(&a).map(drop),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names() {
        assert_eq!(parse_metric("pass1", None, 8).unwrap(), (EvalMode::Pass1, 1));
        assert_eq!(parse_metric("avg@8", None, 3).unwrap(), (EvalMode::AvgK, 8));
        assert_eq!(parse_metric("avg_k", None, 3).unwrap(), (EvalMode::AvgK, 3));
        assert!(parse_metric("avg@0", None, 3).is_err());
        assert!(parse_metric("best", None, 3).is_err());
    }

    #[test]
    fn flag_names_match_config_values() {
        assert_eq!(flag_name(FactorFlag::NoCgm), "no_cgm");
        assert_eq!(flag_name(AdvantageFlag::AeRdp), "ae_rdp");
    }
}
