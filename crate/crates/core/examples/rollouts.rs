//! Samples naive and hint rollouts for one query from the uniform initial
//! policy and prints their tokens, rewards and per-token entropies.

use adhint::features::{FeatureSpec, ReadHead};
use adhint::hint::hint_length;
use adhint::policy::{Decoding, PolicyParams};
use adhint::rollout::{roll_hint, roll_naive, RolloutKey, RolloutSettings};
use adhint::task::{teacher_trajectory, Family, Split, TaskSpace, Vocab};

fn main() -> adhint::Result<()> {
    let vocab = Vocab::new(10, 4)?;
    let spec = FeatureSpec::new(&vocab, 3, 8, ReadHead::Scratchpad);
    let params = PolicyParams::zeros(spec);
    let settings = RolloutSettings {
        vocab,
        max_len: 40,
        decoding: Decoding::Temperature(1.0),
    };
    let task = TaskSpace::new(vocab, 8)?.generate(Family::ModSum, 1, (4, 4), 11, Split::Train)?.remove(0);
    let entry = teacher_trajectory(&task);
    let key = RolloutKey { seed: 0, step: 1, task: 0 };

    let h = hint_length(0.5, entry.teacher_len(), settings.max_len);
    println!("teacher: {:?}", entry.teacher_trajectory);
    println!("hint prefix (w = 0.5): {:?}\n", &entry.teacher_trajectory[..h]);
    let naive = roll_naive(&params, &settings, &task, 4, key)?;
    let hint = roll_hint(&params, &settings, &entry, 4, h, key)?;
    for r in naive.iter().chain(&hint) {
        let mean_h = r.entropy.iter().sum::<f64>() / r.len() as f64;
        println!(
            "{:?}: len {:>2} (hint {}), reward {:.1}, truncated {}, mean entropy {:.3}",
            r.kind,
            r.len(),
            r.hint_len,
            r.reward.total,
            r.truncated,
            mean_h
        );
        println!("    {:?}", r.tokens);
    }
    Ok(())
}
