//! The cosine entropy-consistency schedule and the per-token factors it
//! produces for positive and negative hint rollouts.

use adhint::modulation::{g_schedule, token_factors, FactorMode};
use adhint::rollout::{Rollout, RolloutKind};
use adhint::task::RewardBreakdown;

fn main() {
    let alpha = 0.5;
    println!("g(x; {alpha}):");
    for x in [0.25, 0.5, 0.625, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 3.0] {
        println!("  x = {x:<5} g = {:.4}", g_schedule(x, alpha));
    }

    let entropy = vec![0.05, 0.9, 1.1, 1.9, 0.6, 1.0, 0.8, 1.2];
    let rollout = Rollout {
        kind: RolloutKind::Hint,
        tokens: vec![5, 7, 5, 8, 3, 7, 4, 2],
        hint_len: 4,
        logprob_new: vec![-1.0; 8],
        logprob_old: vec![0.0; 8],
        entropy,
        truncated: false,
        reward: RewardBreakdown::zero(),
    };
    println!("\nhint rollout, 4 hint tokens, entropies {:?}", rollout.entropy);
    for (mode, adv) in [
        (FactorMode::Full, 0.8),
        (FactorMode::Full, -0.8),
        (FactorMode::NoCgm, 0.8),
        (FactorMode::NoMasking, -0.8),
        (FactorMode::None, -0.8),
    ] {
        let plan = token_factors(&rollout, adv, alpha, mode);
        let k: Vec<String> = plan.factors.iter().map(|k| format!("{k:.3}")).collect();
        println!("  {mode:?} with advantage {adv:+}: k = [{}]", k.join(", "));
    }
}
