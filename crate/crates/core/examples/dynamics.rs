//! Trains full ADHint, GRPO-only and the pooled-advantage ablation on the
//! hard curriculum and compares their reward dynamics.
//!
//! `cargo run --release --example dynamics -- [seed]`

use adhint::dynamics::{hard_curriculum, run_variant, Variant};

fn main() -> adhint::Result<()> {
    let seed = std::env::args().nth(1).map_or(Ok(1), |s| s.parse()).expect("seed must be an integer");
    println!("{:<10} {:>9} {:>8} {:>10} {:>8}", "variant", "naive@1", "in band", "final gap", "pass@1");
    for variant in Variant::ALL {
        let dir = std::env::temp_dir().join(format!("adhint-dynamics-{seed}-{}", variant.name()));
        let run = run_variant(&hard_curriculum(seed, variant, &[])?, variant, &dir)?;
        println!(
            "{:<10} {:>9.4} {:>8.3} {:>10.3} {:>8.3}",
            variant.name(),
            run.initial_naive_reward(),
            run.hint_in_band(0.3, 0.9),
            run.final_quarter_gap(),
            run.heldout_pass1
        );
        let marks: Vec<String> = run
            .metrics
            .iter()
            .step_by(50)
            .map(|m| format!("{}:{:.2}/{}", m.step, m.reward_naive, m.reward_hint.map_or("-".into(), |r| format!("{r:.2}"))))
            .collect();
        println!("           naive/hint reward {}", marks.join(" "));
    }
    Ok(())
}
