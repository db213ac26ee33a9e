//! Metrics logs, CSV export of training dynamics, and the group dump used by
//! `inspect`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rollout::Rollout;
use crate::trainer::{QueryOutcome, StepMetrics, METRICS_SCHEMA};

pub fn read_metrics(path: &Path) -> Result<Vec<StepMetrics>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let m: StepMetrics = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if m.schema != METRICS_SCHEMA {
            return Err(Error::parse(path, i + 1, format!("unknown schema `{}`", m.schema)));
        }
        out.push(m);
    }
    Ok(out)
}

type Column = fn(&StepMetrics) -> Option<f64>;

struct Panel {
    file: &'static str,
    columns: &'static [(&'static str, Column)],
}

const PANELS: &[Panel] = &[
    Panel {
        file: "reward.csv",
        columns: &[
            ("overall", |m| Some(m.reward_mean)),
            ("naive", |m| Some(m.reward_naive)),
            ("hint", |m| m.reward_hint),
        ],
    },
    Panel {
        file: "entropy.csv",
        columns: &[
            ("overall", |m| Some(m.entropy_mean)),
            ("naive", |m| Some(m.entropy_naive)),
            ("hint", |m| m.entropy_hint),
        ],
    },
    Panel {
        file: "length.csv",
        columns: &[("naive", |m| Some(m.length_naive)), ("hint", |m| m.length_hint)],
    },
    Panel {
        file: "gradnorm.csv",
        columns: &[("overall", |m| Some(m.grad_norm))],
    },
    Panel {
        file: "clipping.csv",
        columns: &[("overall", |m| Some(m.clip_frac))],
    },
    Panel {
        file: "format.csv",
        columns: &[("overall", |m| Some(m.format_mean))],
    },
];

/// Writes one CSV per dynamics panel into `dir` and returns their paths.
/// Steps without hint rollouts leave the `hint` cell empty.
pub fn export_csv(metrics: &[StepMetrics], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for panel in PANELS {
        let path = dir.join(panel.file);
        let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        let mut text = String::from("step");
        for (name, _) in panel.columns {
            text.push(',');
            text.push_str(name);
        }
        text.push('\n');
        for m in metrics {
            text.push_str(&m.step.to_string());
            for (_, col) in panel.columns {
                text.push(',');
                if let Some(v) = col(m) {
                    text.push_str(&v.to_string());
                }
            }
            text.push('\n');
        }
        out.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))?;
        out.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// One rollout of an inspected group with its advantages and factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub index: usize,
    pub kind: String,
    pub hint_len: usize,
    pub tokens: Vec<u32>,
    pub logprob_new: Vec<f64>,
    pub logprob_old: Vec<f64>,
    pub entropy: Vec<f64>,
    pub truncated: bool,
    pub reward: f64,
    pub answer_correct: u8,
    pub format_ok: u8,
    pub a_hat: f64,
    pub a_tilde: f64,
    pub h_bar: Option<f64>,
    pub factors: Vec<f64>,
}

/// Header line of a group dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupHeader {
    pub entry: usize,
    pub family: String,
    pub step: usize,
    pub warmup: bool,
    pub diff_n: f64,
    pub diff_h: Option<f64>,
    pub hint_ratio: f64,
    pub hint_len: usize,
    pub pooled_mean: f64,
    pub pooled_std: f64,
    pub degenerate: bool,
    pub alpha: f64,
}

fn record(i: usize, r: &Rollout, o: &QueryOutcome) -> RolloutRecord {
    let plan = &o.factors[i];
    RolloutRecord {
        index: i,
        kind: format!("{:?}", r.kind).to_lowercase(),
        hint_len: r.hint_len,
        tokens: r.tokens.clone(),
        logprob_new: r.logprob_new.clone(),
        logprob_old: r.logprob_old.clone(),
        entropy: r.entropy.clone(),
        truncated: r.truncated,
        reward: r.reward.total,
        answer_correct: r.reward.answer_correct,
        format_ok: r.reward.format_ok,
        a_hat: o.advantages.a_hat[i],
        a_tilde: o.advantages.a_tilde[i],
        h_bar: plan.h_bar,
        factors: plan.factors.clone(),
    }
}

/// Line-delimited dump: a header object then one object per rollout.
pub fn group_dump(entry: usize, family: &str, outcome: &QueryOutcome, alpha: f64) -> String {
    let header = GroupHeader {
        entry,
        family: family.to_string(),
        step: outcome.step,
        warmup: outcome.warmup,
        diff_n: outcome.diff_n,
        diff_h: outcome.advantages.diff_h,
        hint_ratio: outcome.hint_ratio,
        hint_len: outcome.hint_len,
        pooled_mean: outcome.advantages.pooled_mean,
        pooled_std: outcome.advantages.pooled_std,
        degenerate: outcome.advantages.degenerate,
        alpha,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (i, r) in outcome.group.iter().enumerate() {
        out.push_str(&serde_json::to_string(&record(i, r, outcome)).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_group_dump(text: &str) -> Result<(GroupHeader, Vec<RolloutRecord>)> {
    let src = PathBuf::from("<dump>");
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::parse(&src, 1, "empty dump"))?;
    let header = serde_json::from_str(first).map_err(|e| Error::parse(&src, 1, e.to_string()))?;
    let records = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(&src, i + 1, e.to_string())))
        .collect::<Result<_>>()?;
    Ok((header, records))
}
