//! Compares the analytic log-probability gradient of the log-linear policy
//! with central finite differences at a random point.

use adhint::features::{ContextTracker, FeatureSpec, ReadHead};
use adhint::policy::{logprob_grad, next_distribution, PolicyParams};
use adhint::rng::{self, Purpose};
use adhint::task::{teacher_trajectory, Family, Split, TaskSpace, Vocab};
use rand::Rng;

fn main() -> adhint::Result<()> {
    let vocab = Vocab::new(10, 4)?;
    let spec = FeatureSpec::new(&vocab, 3, 8, ReadHead::Scratchpad);
    let mut r = rng::stream(3, Purpose::Test, 0, 0, 0);
    let weights = (0..spec.vocab_size * spec.dim()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut params = PolicyParams::from_weights(spec, weights)?;
    println!("policy: V = {}, feature dim = {}", spec.vocab_size, spec.dim());

    let task = TaskSpace::new(vocab, 8)?.generate(Family::CyclicShift, 1, (4, 4), 5, Split::Train)?.remove(0);
    let traj = teacher_trajectory(&task).teacher_trajectory;
    let mut tracker = ContextTracker::new(&spec, &vocab, &task);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for &y in &traj {
        let ctx = tracker.context();
        let g = logprob_grad(&params, &ctx, y)?;
        for &j in &g.features {
            for row in 0..spec.vocab_size {
                let w0 = params.weight(row, j);
                *params.weight_mut(row, j) = w0 + eps;
                let up = next_distribution(&params, &ctx)?.logprobs[y as usize];
                *params.weight_mut(row, j) = w0 - eps;
                let down = next_distribution(&params, &ctx)?.logprobs[y as usize];
                *params.weight_mut(row, j) = w0;
                let fd = (up - down) / (2.0 * eps);
                let analytic = g.row_coeffs[row];
                worst = worst.max((fd - analytic).abs() / analytic.abs().max(1e-8));
            }
        }
        tracker.push(y);
    }
    println!("checked {} steps of a teacher trajectory", traj.len());
    println!("largest relative error: {worst:.2e}");
    Ok(())
}
