//! A short ADHint training run: builds a corpus, trains, evaluates on the
//! heldout split and exports the dynamics panels as CSV.
//!
//! `cargo run --release --example train_run -- [out_dir]`

use std::path::PathBuf;

use adhint::commands::build_corpora;
use adhint::config::Config;
use adhint::dynamics::HARD_CURRICULUM;
use adhint::report::export_csv;
use adhint::trainer::{evaluate, run_training, EvalMode};

fn main() -> adhint::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("adhint-train-run"), PathBuf::from);
    let cfg = Config::from_toml_str(HARD_CURRICULUM, &["train.steps=150".into(), "train.checkpoint_every=50".into()])?;
    let (train, heldout) = build_corpora(&cfg)?;
    let vocab = cfg.vocab()?;
    let summary = run_training(&cfg.train_config(), &vocab, &cfg.feature_spec()?, &train, &out, None)?;

    for m in summary.metrics.iter().step_by(15) {
        println!(
            "step {:>3}{} naive {:.3} hint {} entropy {:.3} |grad| {:.4}",
            m.step,
            if m.warmup { " (warmup)" } else { "         " },
            m.reward_naive,
            m.reward_hint.map_or("  -  ".into(), |r| format!("{r:.3}")),
            m.entropy_mean,
            m.grad_norm
        );
    }
    let tasks: Vec<_> = heldout.into_iter().map(|e| e.task).collect();
    let max_len = cfg.rollout.max_len;
    let pass1 = evaluate(&summary.params, &vocab, &tasks, EvalMode::Pass1, 1, max_len, cfg.seed)?;
    let avg8 = evaluate(&summary.params, &vocab, &tasks, EvalMode::AvgK, 8, max_len, cfg.seed)?;
    println!("heldout pass@1 {pass1:.3}, avg@8 {avg8:.3}");
    for p in export_csv(&summary.metrics, &out.join("csv"))? {
        println!("wrote {}", p.display());
    }
    println!("checkpoints and logs in {}", out.display());
    Ok(())
}
