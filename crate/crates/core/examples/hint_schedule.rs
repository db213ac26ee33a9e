//! Tabulates hint ratios and prefix lengths across naive difficulty, and the
//! time-annealed ratio used by the ablation.

use adhint::hint::{annealing_ratio, difficulty_prior, hint_length, hint_ratio, linear_ratio, HintSchedule};
use adhint::rng::{self, Purpose};

fn main() -> adhint::Result<()> {
    let schedule = HintSchedule::default();
    let teacher_len = 21;
    println!("w_max {}, w_min {}, noise radius {}", schedule.w_max, schedule.w_min, schedule.noise_radius);
    println!("{:>8} {:>8} {:>10} {:>4}", "correct", "Diff_N", "w", "h");
    for correct in 0..=8 {
        let rewards: Vec<f64> = (0..8).map(|i| if i < correct { 1.0 } else { 0.1 }).collect();
        let prior = difficulty_prior(&rewards)?;
        let mut noise = rng::stream(0, Purpose::HintNoise, 0, correct as u64, 0);
        let w = hint_ratio(&prior, &schedule, &mut noise);
        println!(
            "{correct:>8} {:>8.3} {w:>10.5} {:>4}   (noise-free {:.4})",
            prior.diff_n,
            hint_length(w, teacher_len, 40),
            linear_ratio(prior.diff_n, &schedule)
        );
    }
    println!("\nannealed ratio over a 300-step run:");
    for step in [0, 75, 150, 225, 300] {
        println!("  step {step:>3}: w = {:.3}", annealing_ratio(step, 300, &schedule));
    }
    Ok(())
}
