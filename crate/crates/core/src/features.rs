//! Binary feature map of the policy and the per-rollout context tracker.
//!
//! A step's features are the concatenation of
//!
//! * one-hots of the last `K` tokens (lag 1 first), PAD-padded before `BOS`;
//! * a one-hot query bucket (family x coarse length bucket);
//! * optionally, the scratchpad read head: one slot reading a task-derived
//!   value under a cursor, plus a one-hot of the response region.
//!
//! The read head is what makes the toy families learnable by a log-linear
//! policy. In the work region the cursor advances with each `FILLER` and,
//! right after a `FILLER`, exposes the intermediate value the teacher writes
//! at that step; anywhere else, including before the first step, it reports
//! whether work remains. Inside the answer span it reads back the symbols
//! the response itself wrote during its work, so a correct answer requires
//! the work to have been done.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::task::{Family, TaskInstance, TokenId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadHead {
    Off,
    Scratchpad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub vocab_size: usize,
    pub context_order: usize,
    pub length_buckets: usize,
    pub alphabet: usize,
    pub read_head: ReadHead,
}

impl FeatureSpec {
    pub fn new(vocab: &Vocab, context_order: usize, max_task_length: usize, read_head: ReadHead) -> Self {
        Self {
            vocab_size: vocab.size(),
            context_order,
            length_buckets: (max_task_length.max(2) - 2) / 2 + 1,
            alphabet: vocab.alphabet(),
            read_head,
        }
    }

    /// Query bucket count `B` (families x length buckets).
    pub fn query_buckets(&self) -> usize {
        Family::ALL.len() * self.length_buckets
    }

    pub fn head_dim(&self) -> usize {
        match self.read_head {
            ReadHead::Off => 0,
            ReadHead::Scratchpad => self.alphabet + HEAD_FIXED_SLOTS,
        }
    }

    /// Feature dimension `F = K*V + B (+ head block)`.
    pub fn dim(&self) -> usize {
        self.context_order * self.vocab_size + self.query_buckets() + self.head_dim()
    }

    pub fn bucket_of(&self, task: &TaskInstance) -> usize {
        let lb = ((task.length().max(2) - 2) / 2).min(self.length_buckets - 1);
        task.family.index() * self.length_buckets + lb
    }

    fn head_offset(&self) -> usize {
        self.context_order * self.vocab_size + self.query_buckets()
    }

    /// Indices of the active (value 1) features for `ctx`.
    pub fn active(&self, ctx: &StepContext) -> Result<Vec<usize>> {
        ensure!(
            ctx.window.len() == self.context_order,
            "context window holds {} tokens, expected {}",
            ctx.window.len(),
            self.context_order
        );
        ensure!(
            ctx.query_bucket < self.query_buckets(),
            "query bucket {} out of range {}",
            ctx.query_bucket,
            self.query_buckets()
        );
        let mut out = Vec::with_capacity(self.context_order + 1 + ctx.head.len());
        for (lag, &tok) in ctx.window.iter().enumerate() {
            ensure!((tok as usize) < self.vocab_size, "token id {tok} out of vocab {}", self.vocab_size);
            out.push(lag * self.vocab_size + tok as usize);
        }
        out.push(self.context_order * self.vocab_size + ctx.query_bucket);
        let hd = self.head_dim();
        for &h in &ctx.head {
            ensure!(h < hd, "head slot {h} out of range {hd}");
            out.push(self.head_offset() + h);
        }
        Ok(out)
    }
}

const HEAD_FIXED_SLOTS: usize = 6;

/// Head slot layout after the `alphabet` value slots.
mod slot {
    pub const MORE: usize = 0;
    pub const END: usize = 1;
    pub const IDLE: usize = 2;
    pub const WORK: usize = 3;
    pub const ANSWER: usize = 4;
    pub const DONE: usize = 5;
}

/// Everything the policy conditions on at one decoding step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepContext {
    pub query_bucket: usize,
    /// Last `K` tokens, most recent first.
    pub window: Vec<TokenId>,
    /// Active read-head slots (empty when the head is off).
    pub head: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Work,
    Answer,
    Done,
}

/// Incremental context for one rollout: push tokens, read the next step's
/// context.
#[derive(Debug, Clone)]
pub struct ContextTracker {
    spec: FeatureSpec,
    vocab: Vocab,
    bucket: usize,
    targets: Vec<TokenId>,
    history: Vec<TokenId>,
    region: Region,
    fillers: usize,
    work_symbols: Vec<TokenId>,
    since_open: usize,
}

impl ContextTracker {
    pub fn new(spec: &FeatureSpec, vocab: &Vocab, task: &TaskInstance) -> Self {
        Self {
            spec: *spec,
            vocab: *vocab,
            bucket: spec.bucket_of(task),
            targets: task.answer.clone(),
            history: vec![Vocab::BOS],
            region: Region::Work,
            fillers: 0,
            work_symbols: Vec::new(),
            since_open: 0,
        }
    }

    pub fn push(&mut self, tok: TokenId) {
        match (self.region, tok) {
            (_, Vocab::ANS_CLOSE) => self.region = Region::Done,
            (Region::Work, Vocab::ANS_OPEN) => {
                self.region = Region::Answer;
                self.since_open = 0;
            }
            (Region::Work, Vocab::FILLER) => self.fillers += 1,
            (Region::Work, t) if self.vocab.symbol_index(t).is_some() => self.work_symbols.push(t),
            (Region::Answer, _) => self.since_open += 1,
            _ => {}
        }
        self.history.push(tok);
    }

    fn value_slot(&self, tok: TokenId) -> usize {
        self.vocab.symbol_index(tok).expect("head values are payload symbols")
    }

    fn head(&self) -> Vec<usize> {
        if self.spec.read_head == ReadHead::Off {
            return Vec::new();
        }
        let a = self.spec.alphabet;
        let last = *self.history.last().expect("history starts with BOS");
        let (reading, region) = match self.region {
            Region::Work => {
                let f = self.fillers;
                let reading = if f > 0 && last == Vocab::FILLER {
                    match self.targets.get(f - 1) {
                        Some(&t) => self.value_slot(t),
                        None => a + slot::END,
                    }
                } else if f < self.targets.len() {
                    a + slot::MORE
                } else {
                    a + slot::END
                };
                (reading, slot::WORK)
            }
            Region::Answer => {
                let reading = match self.work_symbols.get(self.since_open) {
                    Some(&t) => self.value_slot(t),
                    None => a + slot::END,
                };
                (reading, slot::ANSWER)
            }
            Region::Done => (a + slot::IDLE, slot::DONE),
        };
        vec![reading, a + region]
    }

    pub fn context(&self) -> StepContext {
        let k = self.spec.context_order;
        let window = (0..k)
            .map(|lag| {
                let n = self.history.len();
                if lag < n {
                    self.history[n - 1 - lag]
                } else {
                    Vocab::PAD
                }
            })
            .collect();
        StepContext {
            query_bucket: self.bucket,
            window,
            head: self.head(),
        }
    }
}
