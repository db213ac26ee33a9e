//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed:
//! `cargo test --release --test acceptance`.

use std::fs;
use std::time::{Duration, Instant};

use adhint::advantage::{estimate, pooled_advantages, AdvantageMode};
use adhint::commands::build_corpora;
use adhint::config::Config;
use adhint::dynamics::{hard_curriculum, run_variant, Variant};
use adhint::features::{ContextTracker, FeatureSpec, ReadHead};
use adhint::hint::{difficulty_prior, hint_ratio, hint_ratio_with_noise, HintSchedule};
use adhint::modulation::g_schedule;
use adhint::policy::{logprob_grad, next_distribution, Gradient, PolicyParams};
use adhint::rng::{self, Purpose};
use adhint::rollout::{Rollout, RolloutKey, RolloutKind};
use adhint::task::{Family, Split, TaskInstance, TaskSpace, Vocab};
use adhint::trainer::{accumulate_rollout, process_query, run_training};
use rand::Rng;

type Item = (TaskInstance, Rollout, Vec<f64>, f64, usize);

struct Verdict {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { id, pass, detail }
}

/// Criteria that are known not to hold in this lab. They are still run and
/// reported; see the notes in the README.
const KNOWN_RED: &[&str] = &["8"];

fn gradient_correctness() -> Verdict {
    let vocab = Vocab::new(10, 4).unwrap();
    let spec = FeatureSpec::new(&vocab, 3, 8, ReadHead::Scratchpad);
    let space = TaskSpace::new(vocab, 8).unwrap();
    let tasks = space.generate_mix(&Family::ALL, 30, (2, 8), 4, Split::Train).unwrap();
    let mut r = rng::stream(1, Purpose::Test, 1, 0, 0);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let cases = 150;
    for case in 0..cases {
        let scale = [0.1, 1.0, 3.0][case % 3];
        let weights = (0..spec.vocab_size * spec.dim()).map(|_| r.gen_range(-scale..scale)).collect();
        let mut params = PolicyParams::from_weights(spec, weights).unwrap();
        let task = &tasks[case % tasks.len()];
        let mut tracker = ContextTracker::new(&spec, &vocab, task);
        for _ in 0..r.gen_range(0..12) {
            tracker.push(r.gen_range(0..vocab.size() as u32));
        }
        let ctx = tracker.context();
        let y = r.gen_range(0..vocab.size() as u32);
        let g = logprob_grad(&params, &ctx, y).unwrap();
        let (mut diff, mut norm) = (0.0, 0.0);
        for &j in &g.features {
            for row in 0..spec.vocab_size {
                let w0 = params.weight(row, j);
                *params.weight_mut(row, j) = w0 + eps;
                let up = next_distribution(&params, &ctx).unwrap().logprobs[y as usize];
                *params.weight_mut(row, j) = w0 - eps;
                let down = next_distribution(&params, &ctx).unwrap().logprobs[y as usize];
                *params.weight_mut(row, j) = w0;
                let fd = (up - down) / (2.0 * eps);
                let an = g.row_coeffs[row];
                diff += (fd - an) * (fd - an);
                norm += an * an;
            }
        }
        worst = worst.max(diff.sqrt() / norm.sqrt().max(1e-12));
    }
    verdict("1", worst < 1e-4, format!("{cases} cases, worst relative error {worst:.2e} (< 1e-4)"))
}

#[allow(clippy::approx_constant)] // hand-derived value, compared at 1e-5
fn g_suite() -> Verdict {
    let mut ok = true;
    let mut worst_jump: f64 = 0.0;
    for alpha in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let hi = 1.0 / alpha;
        ok &= g_schedule(1.0, alpha) == 1.0;
        ok &= g_schedule(alpha, alpha) == 0.0 && g_schedule(hi, alpha) == 0.0;
        for x in [0.0, alpha * 0.5, alpha - 1e-9, hi + 1e-9, hi * 2.0, 1e6, f64::INFINITY] {
            ok &= g_schedule(x, alpha) == 0.0;
        }
        for b in [alpha, 1.0, hi] {
            let jump = (g_schedule(b + 1e-12, alpha) - g_schedule(b - 1e-12, alpha)).abs();
            worst_jump = worst_jump.max(jump);
        }
    }
    let lo = g_schedule(0.75, 0.5);
    let up = g_schedule(1.5, 0.5);
    let branch = (lo - 0.70711).abs() <= 1e-5 && (up - 0.70711).abs() <= 1e-5 && (lo - up).abs() < 1e-12;
    let root_half = std::f64::consts::FRAC_1_SQRT_2;
    let exact = (lo - root_half).abs() <= 1e-6 && (up - root_half).abs() <= 1e-6;
    verdict(
        "2",
        ok && worst_jump <= 1e-9 && branch && exact,
        format!("g(0.75; 0.5) = {lo:.6}, g(1.5; 0.5) = {up:.6}, largest jump at a branch point {worst_jump:.1e}"),
    )
}

fn pooled_suite() -> Verdict {
    let mut r = rng::stream(2, Purpose::Test, 3, 0, 0);
    let (mut worst_mean, mut worst_std) = (0.0f64, 0.0f64);
    let mut degenerate_ok = true;
    for i in 0..2000 {
        let len = r.gen_range(2..20);
        let rewards: Vec<f64> = if i % 10 == 0 {
            vec![[0.0, 0.1, 1.0][i % 3]; len]
        } else {
            (0..len).map(|_| [0.0, 0.1, 1.0, r.gen::<f64>()][r.gen_range(0..4)]).collect()
        };
        let p = pooled_advantages(&rewards).unwrap();
        if p.degenerate {
            degenerate_ok &= p.a_hat.iter().all(|&a| a == 0.0);
            continue;
        }
        let n = len as f64;
        let mean = p.a_hat.iter().sum::<f64>() / n;
        let std = (p.a_hat.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        worst_mean = worst_mean.max(mean.abs());
        worst_std = worst_std.max((std - 1.0).abs());
    }
    verdict(
        "3",
        worst_mean <= 1e-9 && worst_std <= 1e-9 && degenerate_ok,
        format!("max |mean| {worst_mean:.1e}, max |std - 1| {worst_std:.1e}, degenerate groups zero: {degenerate_ok}"),
    )
}

/// Direct per-rollout evaluation of the rescaled advantage.
fn rescaled_oracle(naive: &[f64], hint: &[f64]) -> Vec<f64> {
    let all: Vec<f64> = naive.iter().chain(hint).copied().collect();
    let n = all.len() as f64;
    let m = all.iter().sum::<f64>() / n;
    let sd = (all.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / n).sqrt();
    if sd < 1e-12 {
        return vec![0.0; all.len()];
    }
    let g_naive = naive.iter().sum::<f64>() / naive.len() as f64;
    let g_hint = hint.iter().sum::<f64>() / hint.len() as f64;
    all.iter()
        .enumerate()
        .map(|(i, &r)| {
            let a = (r - m) / sd;
            let g = if i < naive.len() { g_naive } else { g_hint };
            if a > 0.0 {
                a * m / g.max(1e-4)
            } else {
                a * g / m
            }
        })
        .collect()
}

fn ae_rdp_oracle() -> Verdict {
    let worked = estimate(&[1.0, 0.0], &[1.0, 1.0], AdvantageMode::AeRdp).unwrap().a_tilde;
    let hand = [0.86603, -1.15470, 0.43301, 0.43301];
    let worked_ok = worked.iter().zip(hand).all(|(a, b)| (a - b).abs() <= 1e-5);
    let mut r = rng::stream(3, Purpose::Test, 4, 0, 0);
    let (mut worst, mut signs_ok) = (0.0f64, true);
    for _ in 0..1000 {
        let n = r.gen_range(1..10);
        let m = r.gen_range(1..10);
        let mut draw = |k| -> Vec<f64> {
            (0..k)
                .map(|_| match r.gen_range(0..4) {
                    0 => 0.0,
                    1 => 0.1,
                    2 => 1.0,
                    _ => r.gen::<f64>(),
                })
                .collect()
        };
        let (naive, hint) = (draw(n), draw(m));
        let got = estimate(&naive, &hint, AdvantageMode::AeRdp).unwrap();
        let want = rescaled_oracle(&naive, &hint);
        for ((a, b), a_hat) in got.a_tilde.iter().zip(&want).zip(&got.a_hat) {
            worst = worst.max((a - b).abs());
            signs_ok &= a.signum() == a_hat.signum() || (*a == 0.0 && *a_hat == 0.0);
        }
    }
    verdict(
        "4",
        worked_ok && worst <= 1e-12 && signs_ok,
        format!("worked group {worked:.5?}; 1000 random groups, max deviation {worst:.1e}, signs kept: {signs_ok}"),
    )
}

fn scheduling_suite() -> Verdict {
    let exact = HintSchedule {
        noise_radius: 0.0,
        ..HintSchedule::default()
    };
    let prior_at = |d: f64| difficulty_prior(&[1.0 - d]).unwrap();
    let mapped: Vec<f64> = [0.0, 0.5, 1.0].iter().map(|&d| hint_ratio_with_noise(&prior_at(d), &exact, 0.0)).collect();
    let exact_ok = mapped == [0.0, 0.1, 0.2];
    let grid: Vec<f64> = (0..=1000).map(|i| hint_ratio_with_noise(&prior_at(i as f64 / 1000.0), &exact, 0.0)).collect();
    let monotone = grid.windows(2).all(|w| w[0] <= w[1]);
    let noisy = HintSchedule::default();
    let mut clamped = true;
    for i in 0..=1000u64 {
        let mut r = rng::stream(5, Purpose::HintNoise, i, 0, 0);
        let w = hint_ratio(&prior_at(i as f64 / 1000.0), &noisy, &mut r);
        clamped &= (0.0..=1.0).contains(&w);
    }
    verdict(
        "5",
        exact_ok && monotone && clamped,
        format!("Diff_N 0, 0.5, 1 -> {mapped:?}; monotone {monotone}; clamped under noise {clamped}"),
    )
}

fn masking_independence() -> Verdict {
    let cfg = hard_curriculum(1, Variant::Adhint, &["train.steps=150".into()]).unwrap();
    let vocab = cfg.vocab().unwrap();
    let spec = cfg.feature_spec().unwrap();
    let (train, _) = build_corpora(&cfg).unwrap();
    let tc = cfg.train_config();
    let dir = tempfile::tempdir().unwrap();
    let params = run_training(&tc, &vocab, &spec, &train, dir.path(), None).unwrap().params;

    // The lag-2 PAD column is live only at the first position of a rollout,
    // which is a hint token whenever h >= 1.
    let column = spec.vocab_size + Vocab::PAD as usize;
    let mut masked: Vec<Item> = Vec::new();
    let mut control: Vec<Item> = Vec::new();
    for (i, entry) in train.iter().enumerate().take(64) {
        let key = RolloutKey { seed: tc.seed, step: 151, task: i as u64 };
        let out = process_query(&params, &vocab, &tc, entry, 151, key).unwrap();
        for ((ro, plan), &adv) in out.group.iter().zip(&out.factors).zip(&out.advantages.a_tilde) {
            if adv == 0.0 || ro.tokens.contains(&Vocab::PAD) {
                continue;
            }
            let item = (entry.task.clone(), ro.clone(), plan.factors.clone(), adv, out.group.size());
            if ro.kind == RolloutKind::Hint && ro.hint_len > 0 && plan.factors[..ro.hint_len].iter().all(|&k| k == 0.0) {
                masked.push(item);
            } else if ro.kind == RolloutKind::Naive {
                control.push(item);
            }
        }
    }
    let assemble = |p: &PolicyParams, batch: &[Item]| {
        let mut g = Gradient::zeros(&spec);
        for (task, ro, k, adv, size) in batch {
            accumulate_rollout(&mut g, p, None, &vocab, task, ro, k, *adv, *size, tc.clip_eps, 0.0).unwrap();
        }
        g
    };
    let mut perturbed = params.clone();
    let mut r = rng::stream(6, Purpose::Test, 0, 0, 0);
    for row in 0..spec.vocab_size {
        *perturbed.weight_mut(row, column) += r.gen_range(-2.0..2.0);
    }
    let before = assemble(&params, &masked);
    let after = assemble(&perturbed, &masked);
    let unchanged = before.data == after.data;
    let live = before.norm() > 0.0;
    let moved = assemble(&params, &control).data != assemble(&perturbed, &control).data;
    verdict(
        "6",
        !masked.is_empty() && unchanged && live && moved,
        format!(
            "{} masked hint rollouts: gradient change exactly 0 = {unchanged}; control on {} naive rollouts moves = {moved}",
            masked.len(),
            control.len()
        ),
    )
}

fn determinism() -> Verdict {
    let cfg = Config::default();
    let (train, _) = build_corpora(&cfg).unwrap();
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let t0 = Instant::now();
        run_training(&cfg.train_config(), &cfg.vocab().unwrap(), &cfg.feature_spec().unwrap(), &train, dir.path(), None)
            .unwrap();
        let elapsed = t0.elapsed();
        let metrics = fs::read(dir.path().join("metrics.jsonl")).unwrap();
        let ckpt = fs::read(dir.path().join("final.ckpt")).unwrap();
        (metrics, ckpt, elapsed)
    };
    let (m1, c1, t1) = run();
    let (m2, c2, t2) = run();
    let slowest = t1.max(t2);
    let identical = m1 == m2 && c1 == c2;
    verdict(
        "7",
        identical && slowest < Duration::from_secs(600),
        format!(
            "{} steps twice: metrics and checkpoint bit-identical = {identical}; slowest run {:.1}s (< 600s)",
            cfg.train.steps,
            slowest.as_secs_f64()
        ),
    )
}

struct Dynamics {
    verdict: Verdict,
    a: bool,
    b: bool,
}

fn dynamics() -> Dynamics {
    let (mut a, mut b, mut c, mut hard) = (true, true, true, true);
    let mut lines = Vec::new();
    for seed in 1..=3 {
        let mut runs = Vec::new();
        for variant in Variant::ALL {
            let cfg = hard_curriculum(seed, variant, &[]).unwrap();
            let dir = tempfile::tempdir().unwrap();
            runs.push(run_variant(&cfg, variant, dir.path()).unwrap());
        }
        let (adh, grpo, pooled) = (&runs[0], &runs[1], &runs[2]);
        let in_band = adh.hint_in_band(0.3, 0.9);
        let (gap_adh, gap_pool) = (adh.final_quarter_gap(), pooled.final_quarter_gap());
        hard &= adh.initial_naive_reward() < 0.1;
        a &= in_band >= 0.7;
        b &= adh.heldout_pass1 - grpo.heldout_pass1 >= 0.05;
        c &= gap_pool >= 0.2 && gap_adh < 0.2;
        lines.push(format!(
            "seed {seed}: naive@1 {:.3}, in band {in_band:.3}, pass@1 {:.3} vs {:.3}, final gap pooled {gap_pool:.3} / adhint {gap_adh:.3}",
            adh.initial_naive_reward(),
            adh.heldout_pass1,
            grpo.heldout_pass1
        ));
    }
    let detail = format!("(a) {} (b) {} (c) {}\n        {}", ok(a), ok(b), ok(c), lines.join("\n        "));
    Dynamics {
        verdict: verdict("8", hard && a && b && c, detail),
        a: hard && a,
        b,
    }
}

fn warmup_equivalence() -> Verdict {
    let base = Config::from_toml_str("", &["train.steps=5".into(), "train.checkpoint_every=1".into()]).unwrap();
    let grpo = Config::from_toml_str("", &["train.steps=5".into(), "train.checkpoint_every=1".into(), "train.grpo_only=true".into()]).unwrap();
    let (train, _) = build_corpora(&base).unwrap();
    let run = |cfg: &Config| {
        let dir = tempfile::tempdir().unwrap();
        run_training(&cfg.train_config(), &cfg.vocab().unwrap(), &cfg.feature_spec().unwrap(), &train, dir.path(), None)
            .unwrap();
        let files: Vec<Vec<u8>> = std::iter::once(dir.path().join("metrics.jsonl"))
            .chain((1..=5).map(|s| dir.path().join(format!("step_{s:06}.ckpt"))))
            .map(|p| fs::read(p).unwrap())
            .collect();
        files
    };
    let (x, y) = (run(&base), run(&grpo));
    let same = x == y;
    verdict("9", same, format!("metrics log and 5 per-step checkpoints byte-equal = {same}"))
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "miss"
    }
}

fn main() {
    let mut verdicts = vec![
        gradient_correctness(),
        g_suite(),
        pooled_suite(),
        ae_rdp_oracle(),
        scheduling_suite(),
        masking_independence(),
        determinism(),
    ];
    let dyn_result = dynamics();
    verdicts.push(dyn_result.verdict);
    verdicts.push(warmup_equivalence());

    for v in &verdicts {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        let note = if !v.pass && KNOWN_RED.contains(&v.id) { " [known red]" } else { "" };
        println!("{tag} criterion {}{note}: {}", v.id, v.detail);
    }
    let mut unexpected: Vec<_> = verdicts.iter().filter(|v| !v.pass && !KNOWN_RED.contains(&v.id)).map(|v| v.id).collect();
    // the parts of the dynamics criterion that do hold must keep holding
    if !dyn_result.a {
        unexpected.push("8a");
    }
    if !dyn_result.b {
        unexpected.push("8b");
    }
    if !unexpected.is_empty() {
        eprintln!("acceptance: unexpected failures {unexpected:?}");
        std::process::exit(1);
    }
}
