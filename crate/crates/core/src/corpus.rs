//! Line-delimited hint corpus files.
//!
//! One JSON object per line:
//! `{"v":"v1","family":"reverse","split":"train","query":[..],"answer":[..],"trajectory":[..]}`.
//! Blank lines are skipped. Every record is checked on read: the answer must
//! re-derive from the query and the trajectory must verify with full reward.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{verify, Family, HintCorpusEntry, Split, TaskInstance, TokenId, Vocab};

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    v: String,
    family: Family,
    split: Split,
    query: Vec<TokenId>,
    answer: Vec<TokenId>,
    trajectory: Vec<TokenId>,
}

pub fn to_line(entry: &HintCorpusEntry) -> String {
    let rec = Record {
        v: SCHEMA_VERSION.to_string(),
        family: entry.task.family,
        split: entry.task.split,
        query: entry.task.query.clone(),
        answer: entry.task.answer.clone(),
        trajectory: entry.teacher_trajectory.clone(),
    };
    serde_json::to_string(&rec).expect("corpus record serializes")
}

fn from_line(vocab: &Vocab, line: &str) -> std::result::Result<HintCorpusEntry, String> {
    let rec: Record = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if rec.v != SCHEMA_VERSION {
        return Err(format!("unsupported schema version `{}`", rec.v));
    }
    let task = TaskInstance {
        family: rec.family,
        query: rec.query,
        answer: rec.answer,
        split: rec.split,
    };
    if !task.is_consistent(vocab) {
        return Err("answer or split does not match the task definition".into());
    }
    if verify(&task, &rec.trajectory).total != 1.0 {
        return Err("trajectory does not verify".into());
    }
    Ok(HintCorpusEntry {
        task,
        teacher_trajectory: rec.trajectory,
    })
}

pub fn write_corpus(path: &Path, entries: &[HintCorpusEntry]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in entries {
        writeln!(w, "{}", to_line(e)).map_err(|err| Error::io(path, err))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: &Path, vocab: &Vocab) -> Result<Vec<HintCorpusEntry>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(from_line(vocab, &line).map_err(|msg| Error::parse(path, i + 1, msg))?);
    }
    Ok(out)
}
