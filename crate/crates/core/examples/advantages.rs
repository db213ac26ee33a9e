//! Pooled group-relative advantages for a mixed naive/hint group and their
//! difficulty-rescaled counterparts.

use adhint::advantage::{estimate, AdvantageMode};

fn main() -> adhint::Result<()> {
    let naive = [1.0, 0.1, 0.1, 0.0, 0.1, 0.1, 1.0, 0.1];
    let hint = [1.0, 1.0, 1.0, 0.1, 1.0, 1.0, 0.1, 1.0];
    let pooled = estimate(&naive, &hint, AdvantageMode::Pooled)?;
    let rescaled = estimate(&naive, &hint, AdvantageMode::AeRdp)?;
    println!(
        "pooled mean {:.4}, std {:.4}, Diff_N {:.4}, Diff_H {:.4}",
        pooled.pooled_mean,
        pooled.pooled_std,
        pooled.diff_n,
        pooled.diff_h.unwrap_or(f64::NAN)
    );
    println!("{:>3} {:>5} {:>7} {:>9} {:>9}", "i", "kind", "reward", "pooled", "rescaled");
    for i in 0..pooled.rewards.len() {
        let kind = if i < naive.len() { "naive" } else { "hint" };
        println!(
            "{i:>3} {kind:>5} {:>7.2} {:>9.4} {:>9.4}",
            pooled.rewards[i], pooled.a_hat[i], rescaled.a_tilde[i]
        );
    }
    let sum = |xs: &[f64]| xs.iter().sum::<f64>();
    let (n, h) = rescaled.a_tilde.split_at(naive.len());
    println!("\nnaive advantage mass: pooled {:.4}, rescaled {:.4}", sum(&pooled.a_hat[..naive.len()]), sum(n));
    println!("hint advantage mass:  pooled {:.4}, rescaled {:.4}", sum(&pooled.a_hat[naive.len()..]), sum(h));

    let solved = estimate(&[1.0; 4], &[1.0; 4], AdvantageMode::AeRdp)?;
    println!("\nall-correct group: degenerate = {}, advantages {:?}", solved.degenerate, solved.a_tilde);
    Ok(())
}
