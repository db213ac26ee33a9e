use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use adhint::report::parse_group_dump;

fn adhint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adhint")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = adhint(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: &[&str] = &[
    "-o", "task.vocab_size=10", "-o", "task.alphabet=4", "-o", "task.train_count=120", "-o", "task.heldout_count=40",
    "-o", "task.train_lengths=[3,6]", "-o", "task.heldout_lengths=[3,6]", "-o", "hint.w_max=0.9",
];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(SMALL).chain(extra).copied().collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_data_is_deterministic_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&with(&["gen-data", "--out", p(&a)], &[]));
    ok(&with(&["gen-data", "--out", p(&b)], &[]));
    for f in ["train.jsonl", "heldout.jsonl", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    assert_eq!(fs::read_to_string(a.join("train.jsonl")).unwrap().lines().count(), 120);

    let again = adhint(&with(&["gen-data", "--out", p(&a)], &[]));
    assert_eq!(again.status.code(), Some(2));
    ok(&with(&["gen-data", "--out", p(&a), "--force", "--seed", "7"], &[]));
    assert_ne!(fs::read(a.join("train.jsonl")).unwrap(), fs::read(b.join("train.jsonl")).unwrap());
}

#[test]
fn bad_config_and_missing_files_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = adhint(&["gen-data", "--out", p(dir.path()), "-o", "train.nonsense=1"]);
    assert_eq!(unknown.status.code(), Some(2));
    let missing = adhint(&["eval", "--checkpoint", p(&dir.path().join("nope.ckpt")), "--data", p(dir.path())]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.ckpt"));
}

#[test]
fn train_eval_inspect_export_round() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run, csv) = (dir.path().join("data"), dir.path().join("run"), dir.path().join("csv"));
    ok(&with(&["gen-data", "--out", p(&data)], &[]));
    let steps = ["-o", "train.steps=30", "-o", "train.batch_size=4", "-o", "train.checkpoint_every=10"];
    ok(&with(&["train", "--data", p(&data), "--out", p(&run)], &steps));
    for f in ["metrics.jsonl", "timing.jsonl", "config.toml", "step_000000.ckpt", "step_000030.ckpt", "final.ckpt"] {
        assert!(run.join(f).exists(), "missing {f}");
    }

    let ckpt = run.join("final.ckpt");
    let out = ok(&with(&["eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--metric", "avg@2"], &[]));
    let record: serde_json::Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
    assert_eq!(record["metric"], "avg@2");
    assert_eq!(record["tasks"], 40);
    let acc = record["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let dump = ok(&with(&["inspect", "--checkpoint", p(&ckpt), "--data", p(&data), "--index", "3"], &[]));
    let (header, records) = parse_group_dump(&dump).unwrap();
    assert_eq!(header.entry, 3);
    assert!(!header.warmup);
    assert_eq!(records.len(), 16);
    for r in records.iter().filter(|r| r.kind == "naive") {
        assert_eq!(r.hint_len, 0);
        assert!(r.factors.iter().all(|&k| k == 1.0));
    }
    for r in records.iter().filter(|r| r.kind == "hint" && r.a_hat <= 0.0) {
        assert!(r.factors[..r.hint_len].iter().all(|&k| k == 0.0));
    }

    let out = ok(&["export-csv", "--metrics", p(&run.join("metrics.jsonl")), "--out", p(&csv)]);
    assert!(out.contains("6 panels"));
    let reward = fs::read_to_string(csv.join("reward.csv")).unwrap();
    assert_eq!(reward.lines().next(), Some("step,overall,naive,hint"));
    assert_eq!(reward.lines().count(), 31);
}

#[test]
fn resume_continues_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = (dir.path().join("data"), dir.path().join("run"));
    ok(&with(&["gen-data", "--out", p(&data)], &[]));
    let common = ["-o", "train.batch_size=4", "-o", "train.checkpoint_every=5"];
    ok(&with(&["train", "--data", p(&data), "--out", p(&run), "-o", "train.steps=10"], &common));
    let ckpt = run.join("step_000010.ckpt");
    ok(&with(&["train", "--data", p(&data), "--out", p(&run), "-o", "train.steps=15", "--resume", p(&ckpt)], &common));
    let log = fs::read_to_string(run.join("metrics.jsonl")).unwrap();
    let steps: Vec<u64> = log.lines().map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["step"].as_u64().unwrap()).collect();
    assert_eq!(steps, (1..=15).collect::<Vec<_>>());
}
