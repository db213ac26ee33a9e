//! Synthetic verifiable sequence tasks, the reward verifier, and the teacher
//! oracle that writes off-policy hint trajectories.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

pub type TokenId = u32;

/// Token inventory. Reserved ids occupy `0..6`; the payload alphabet follows
/// immediately; any remaining ids up to `size` are inert filler vocabulary the
/// policy can still emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    size: usize,
    alphabet: usize,
}

impl Vocab {
    pub const PAD: TokenId = 0;
    pub const BOS: TokenId = 1;
    pub const EOS: TokenId = 2;
    pub const ANS_OPEN: TokenId = 3;
    pub const ANS_CLOSE: TokenId = 4;
    pub const FILLER: TokenId = 5;
    pub const RESERVED: usize = 6;

    pub fn new(size: usize, alphabet: usize) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::Config(format!("alphabet must hold at least 2 symbols, got {alphabet}")));
        }
        if Self::RESERVED + alphabet > size {
            return Err(Error::Config(format!(
                "vocab size {size} cannot hold {} reserved ids plus {alphabet} symbols",
                Self::RESERVED
            )));
        }
        Ok(Self { size, alphabet })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Token id of payload symbol `index`.
    pub fn symbol(&self, index: usize) -> TokenId {
        debug_assert!(index < self.alphabet);
        (Self::RESERVED + index) as TokenId
    }

    /// Payload index of `token`, if it is a payload symbol.
    pub fn symbol_index(&self, token: TokenId) -> Option<usize> {
        let t = token as usize;
        (Self::RESERVED..Self::RESERVED + self.alphabet)
            .contains(&t)
            .then(|| t - Self::RESERVED)
    }

    pub fn contains(&self, token: TokenId) -> bool {
        (token as usize) < self.size
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Self { size: 32, alphabet: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Reverse,
    CyclicShift,
    ModSum,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Reverse, Family::CyclicShift, Family::ModSum];

    pub fn index(self) -> usize {
        match self {
            Family::Reverse => 0,
            Family::CyclicShift => 1,
            Family::ModSum => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Reverse => "reverse",
            Family::CyclicShift => "cyclic_shift",
            Family::ModSum => "mod_sum",
        }
    }

    /// The family's answer for `query`, which must consist of payload symbols.
    pub fn derive_answer(self, vocab: &Vocab, query: &[TokenId]) -> Vec<TokenId> {
        match self {
            Family::Reverse => query.iter().rev().copied().collect(),
            Family::CyclicShift => {
                if query.is_empty() {
                    return Vec::new();
                }
                query[1..].iter().chain(&query[..1]).copied().collect()
            }
            Family::ModSum => {
                let mut acc = 0usize;
                query
                    .iter()
                    .map(|&t| {
                        let i = vocab.symbol_index(t).expect("query holds payload symbols");
                        acc = (acc + i) % vocab.alphabet();
                        vocab.symbol(acc)
                    })
                    .collect()
            }
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Heldout,
}

impl Split {
    /// Deterministic partition of the task space: a payload belongs to the
    /// heldout split iff its hash lands in one fifth of the range.
    pub fn of(family: Family, query: &[TokenId]) -> Split {
        // FNV-1a over (family, tokens)
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in std::iter::once(family.index() as u32).chain(query.iter().copied()) {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        if h.is_multiple_of(5) {
            Split::Heldout
        } else {
            Split::Train
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub family: Family,
    pub query: Vec<TokenId>,
    pub answer: Vec<TokenId>,
    pub split: Split,
}

impl TaskInstance {
    /// Builds a task from a query, deriving its answer and split.
    pub fn new(vocab: &Vocab, family: Family, query: Vec<TokenId>) -> Result<Self> {
        if query.len() < 2 {
            return Err(Error::Contract(format!("task length must be at least 2, got {}", query.len())));
        }
        if let Some(t) = query.iter().find(|&&t| vocab.symbol_index(t).is_none()) {
            return Err(Error::Contract(format!("query token {t} is not a payload symbol")));
        }
        let answer = family.derive_answer(vocab, &query);
        let split = Split::of(family, &query);
        Ok(Self {
            family,
            query,
            answer,
            split,
        })
    }

    /// Payload symbol count.
    pub fn length(&self) -> usize {
        self.query.len()
    }

    /// Whether the stored answer and split agree with the family definition.
    pub fn is_consistent(&self, vocab: &Vocab) -> bool {
        self.query.len() >= 2
            && self.query.iter().all(|&t| vocab.symbol_index(t).is_some())
            && self.family.derive_answer(vocab, &self.query) == self.answer
            && Split::of(self.family, &self.query) == self.split
    }
}

/// Task generator bounded by a maximum payload length.
#[derive(Debug, Clone, Copy)]
pub struct TaskSpace {
    pub vocab: Vocab,
    pub max_length: usize,
}

impl TaskSpace {
    pub fn new(vocab: Vocab, max_length: usize) -> Result<Self> {
        if max_length < 2 {
            return Err(Error::Config(format!("max task length must be at least 2, got {max_length}")));
        }
        Ok(Self { vocab, max_length })
    }

    fn check_range(&self, (lo, hi): (usize, usize)) -> Result<()> {
        if lo < 2 || hi < lo || hi > self.max_length {
            return Err(Error::Config(format!(
                "length range [{lo}, {hi}] must lie within [2, {}] with lo <= hi",
                self.max_length
            )));
        }
        Ok(())
    }

    /// `count` tasks of one family drawn from `split`'s partition, lengths
    /// uniform over `lengths` (inclusive). Pure in its arguments.
    pub fn generate(
        &self,
        family: Family,
        count: usize,
        lengths: (usize, usize),
        seed: u64,
        split: Split,
    ) -> Result<Vec<TaskInstance>> {
        self.check_range(lengths)?;
        let split_tag = match split {
            Split::Train => 0,
            Split::Heldout => 1,
        };
        let mut rng = rng::stream(seed, Purpose::TaskGen, family.index() as u64, split_tag, 0);
        let mut out = Vec::with_capacity(count);
        let mut rejected = 0usize;
        while out.len() < count {
            let len = rng.gen_range(lengths.0..=lengths.1);
            let query: Vec<TokenId> = (0..len)
                .map(|_| self.vocab.symbol(rng.gen_range(0..self.vocab.alphabet())))
                .collect();
            if Split::of(family, &query) != split {
                rejected += 1;
                if rejected > 1_000_000 {
                    return Err(Error::Config("task partition is too sparse for the requested range".into()));
                }
                continue;
            }
            out.push(TaskInstance::new(&self.vocab, family, query)?);
        }
        Ok(out)
    }

    /// A mixed-family task list: `count` tasks with families drawn round-robin
    /// from `families` and generated from per-family sub-streams.
    pub fn generate_mix(
        &self,
        families: &[Family],
        count: usize,
        lengths: (usize, usize),
        seed: u64,
        split: Split,
    ) -> Result<Vec<TaskInstance>> {
        if families.is_empty() {
            return Err(Error::Config("at least one task family is required".into()));
        }
        let per: Vec<usize> = (0..families.len())
            .map(|i| count / families.len() + usize::from(i < count % families.len()))
            .collect();
        let mut pools = families
            .iter()
            .zip(&per)
            .map(|(&f, &c)| self.generate(f, c, lengths, seed, split).map(|v| v.into_iter()))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let pool = &mut pools[i % families.len()];
            out.extend(pool.next());
        }
        Ok(out)
    }
}

/// Scalar reward with its components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub answer_correct: u8,
    pub format_ok: u8,
    pub total: f64,
}

impl RewardBreakdown {
    pub const ANSWER_WEIGHT: f64 = 0.9;
    pub const FORMAT_WEIGHT: f64 = 0.1;

    pub fn new(answer_correct: bool, format_ok: bool) -> Self {
        debug_assert!(!answer_correct || format_ok);
        let total = Self::ANSWER_WEIGHT * f64::from(u8::from(answer_correct))
            + Self::FORMAT_WEIGHT * f64::from(u8::from(format_ok));
        Self {
            answer_correct: answer_correct.into(),
            format_ok: format_ok.into(),
            total,
        }
    }

    pub fn zero() -> Self {
        Self::new(false, false)
    }
}

/// Scores a response. Tokens after the first EOS are ignored. The response is
/// well formatted iff it holds exactly one `ANS_OPEN` and exactly one
/// `ANS_CLOSE`, in that order; it is correct iff additionally the bracketed
/// span equals the task answer.
pub fn verify(task: &TaskInstance, response: &[TokenId]) -> RewardBreakdown {
    let end = response.iter().position(|&t| t == Vocab::EOS).unwrap_or(response.len());
    let body = &response[..end];
    let opens: Vec<usize> = marker_positions(body, Vocab::ANS_OPEN);
    let closes: Vec<usize> = marker_positions(body, Vocab::ANS_CLOSE);
    match (opens.as_slice(), closes.as_slice()) {
        ([o], [c]) if o < c => {
            let span = &body[o + 1..*c];
            RewardBreakdown::new(span == task.answer.as_slice(), true)
        }
        _ => RewardBreakdown::zero(),
    }
}

fn marker_positions(body: &[TokenId], marker: TokenId) -> Vec<usize> {
    body.iter()
        .enumerate()
        .filter_map(|(i, &t)| (t == marker).then_some(i))
        .collect()
}

/// A task paired with the teacher's full off-policy trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintCorpusEntry {
    pub task: TaskInstance,
    pub teacher_trajectory: Vec<TokenId>,
}

impl HintCorpusEntry {
    pub fn teacher_len(&self) -> usize {
        self.teacher_trajectory.len()
    }
}

/// The teacher oracle. Writes one work step per payload position
/// (`FILLER`, intermediate symbol), then the bracketed answer and `EOS`.
/// Every family's intermediate value at step `i` is its answer symbol `i`,
/// so a length-`l` task yields `3l + 3` tokens.
pub fn teacher_trajectory(task: &TaskInstance) -> HintCorpusEntry {
    let mut traj = Vec::with_capacity(3 * task.length() + 3);
    for &s in &task.answer {
        traj.push(Vocab::FILLER);
        traj.push(s);
    }
    traj.push(Vocab::ANS_OPEN);
    traj.extend_from_slice(&task.answer);
    traj.push(Vocab::ANS_CLOSE);
    traj.push(Vocab::EOS);
    HintCorpusEntry {
        task: task.clone(),
        teacher_trajectory: traj,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        Vocab::default()
    }

    fn syms(v: &Vocab, idx: &[usize]) -> Vec<TokenId> {
        idx.iter().map(|&i| v.symbol(i)).collect()
    }

    #[test]
    fn vocab_layout() {
        let v = vocab();
        let reserved = [Vocab::PAD, Vocab::BOS, Vocab::EOS, Vocab::ANS_OPEN, Vocab::ANS_CLOSE, Vocab::FILLER];
        for (i, a) in reserved.iter().enumerate() {
            assert!((*a as usize) < v.size());
            assert!(v.symbol_index(*a).is_none());
            for b in &reserved[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert_eq!(v.symbol_index(v.symbol(7)), Some(7));
        assert!(Vocab::new(10, 8).is_err());
        assert!(Vocab::new(14, 8).is_ok());
    }

    #[test]
    fn family_answers() {
        let v = vocab();
        let abc = syms(&v, &[0, 1, 2]);
        assert_eq!(Family::Reverse.derive_answer(&v, &abc), syms(&v, &[2, 1, 0]));
        assert_eq!(Family::CyclicShift.derive_answer(&v, &abc), syms(&v, &[1, 2, 0]));
        let v5 = Vocab::new(32, 5).unwrap();
        let q = syms(&v5, &[2, 3, 4]);
        assert_eq!(Family::ModSum.derive_answer(&v5, &q), syms(&v5, &[2, 0, 4]));
    }

    #[test]
    fn verify_cases() {
        let v = vocab();
        let task = TaskInstance::new(&v, Family::Reverse, syms(&v, &[0, 1, 2])).unwrap();
        let mut good = vec![Vocab::FILLER, Vocab::ANS_OPEN];
        good.extend(syms(&v, &[2, 1, 0]));
        good.extend([Vocab::ANS_CLOSE, Vocab::EOS]);
        assert_eq!(verify(&task, &good).total, 1.0);

        let mut wrong = vec![Vocab::ANS_OPEN];
        wrong.extend(syms(&v, &[0, 1, 2]));
        wrong.push(Vocab::ANS_CLOSE);
        let r = verify(&task, &wrong);
        assert_eq!((r.answer_correct, r.format_ok), (0, 1));
        assert!((r.total - 0.1).abs() < 1e-15);

        assert_eq!(verify(&task, &syms(&v, &[2, 1, 0])).total, 0.0);
        assert_eq!(verify(&task, &[]).total, 0.0);
        // close before open, doubled markers, markers after EOS
        assert_eq!(verify(&task, &[Vocab::ANS_CLOSE, Vocab::ANS_OPEN]).total, 0.0);
        assert_eq!(verify(&task, &[Vocab::ANS_OPEN, Vocab::ANS_OPEN, Vocab::ANS_CLOSE]).total, 0.0);
        assert_eq!(verify(&task, &[Vocab::EOS, Vocab::ANS_OPEN, Vocab::ANS_CLOSE]).total, 0.0);
    }

    #[test]
    fn teacher_reverse_two() {
        let v = vocab();
        let (a, b) = (v.symbol(0), v.symbol(1));
        let task = TaskInstance::new(&v, Family::Reverse, vec![a, b]).unwrap();
        let e = teacher_trajectory(&task);
        assert_eq!(
            e.teacher_trajectory,
            vec![Vocab::FILLER, b, Vocab::FILLER, a, Vocab::ANS_OPEN, b, a, Vocab::ANS_CLOSE, Vocab::EOS]
        );
        assert_eq!(e.teacher_len(), 9);
    }

    #[test]
    fn teacher_always_verifies() {
        let space = TaskSpace::new(vocab(), 8).unwrap();
        for f in Family::ALL {
            for split in [Split::Train, Split::Heldout] {
                for t in space.generate(f, 50, (2, 8), 3, split).unwrap() {
                    let e = teacher_trajectory(&t);
                    assert_eq!(verify(&t, &e.teacher_trajectory).total, 1.0);
                    assert_eq!(e.teacher_len(), 3 * t.length() + 3);
                    assert_eq!(t.split, split);
                    assert!(t.is_consistent(&space.vocab));
                }
            }
        }
    }

    #[test]
    fn generation_is_pure_and_validated() {
        let space = TaskSpace::new(vocab(), 8).unwrap();
        let a = space.generate(Family::ModSum, 20, (2, 5), 11, Split::Train).unwrap();
        let b = space.generate(Family::ModSum, 20, (2, 5), 11, Split::Train).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|t| (2..=5).contains(&t.length())));
        assert!(space.generate(Family::ModSum, 1, (1, 5), 0, Split::Train).is_err());
        assert!(space.generate(Family::ModSum, 1, (3, 9), 0, Split::Train).is_err());
        assert!(space.generate(Family::ModSum, 1, (5, 3), 0, Split::Train).is_err());
    }

    #[test]
    fn mixed_generation_round_robins() {
        let space = TaskSpace::new(vocab(), 6).unwrap();
        let tasks = space.generate_mix(&Family::ALL, 7, (2, 6), 1, Split::Heldout).unwrap();
        let fams: Vec<Family> = tasks.iter().map(|t| t.family).collect();
        assert_eq!(fams[..4], [Family::Reverse, Family::CyclicShift, Family::ModSum, Family::Reverse]);
        assert_eq!(tasks.len(), 7);
    }
}
