//! Hint-ratio scheduling from the naive-rollout difficulty prior.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintSchedule {
    pub w_max: f64,
    pub w_min: f64,
    /// Half-width `R` of the uniform noise added to the ratio.
    pub noise_radius: f64,
}

impl Default for HintSchedule {
    fn default() -> Self {
        Self {
            w_max: 0.2,
            w_min: 0.0,
            noise_radius: 0.01,
        }
    }
}

impl HintSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.w_min
            && self.w_min <= self.w_max
            && self.w_max <= 1.0
            && self.noise_radius >= 0.0
            && self.noise_radius <= self.w_min + 1.0;
        if !ok {
            return Err(Error::Config(format!(
                "hint schedule needs 0 <= w_min <= w_max <= 1 and 0 <= R <= w_min + 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyPrior {
    pub diff_n: f64,
    pub mean_naive_reward: f64,
}

/// `Diff_N = 1 - mean(r_1..r_n)`.
pub fn difficulty_prior(naive_rewards: &[f64]) -> Result<DifficultyPrior> {
    ensure!(!naive_rewards.is_empty(), "difficulty prior needs at least one naive reward");
    let mean = naive_rewards.iter().sum::<f64>() / naive_rewards.len() as f64;
    Ok(DifficultyPrior {
        diff_n: 1.0 - mean,
        mean_naive_reward: mean,
    })
}

/// The linear ratio before noise and clamping.
pub fn linear_ratio(diff_n: f64, schedule: &HintSchedule) -> f64 {
    (schedule.w_max - schedule.w_min) * diff_n + schedule.w_min
}

/// `w = clamp01(linear_ratio + sigma)` with `sigma` drawn from `noise`, a
/// uniform sample in `[-R, R)`.
pub fn hint_ratio_with_noise(prior: &DifficultyPrior, schedule: &HintSchedule, sigma: f64) -> f64 {
    (linear_ratio(prior.diff_n, schedule) + sigma).clamp(0.0, 1.0)
}

pub fn hint_ratio<R: Rng + ?Sized>(prior: &DifficultyPrior, schedule: &HintSchedule, rng: &mut R) -> f64 {
    let sigma = if schedule.noise_radius > 0.0 {
        rng.gen_range(-schedule.noise_radius..schedule.noise_radius)
    } else {
        0.0
    };
    hint_ratio_with_noise(prior, schedule, sigma)
}

/// `h = min(floor(w * teacher_len), max_len - 1)`.
pub fn hint_length(w: f64, teacher_len: usize, max_len: usize) -> usize {
    debug_assert!((0.0..=1.0).contains(&w));
    let h = (w * teacher_len as f64).floor() as usize;
    h.min(max_len.saturating_sub(1))
}

/// Time-annealed ratio used by the ablation: `w_max * (1 - step / total)`.
pub fn annealing_ratio(step: usize, total_steps: usize, schedule: &HintSchedule) -> f64 {
    if total_steps == 0 {
        return 0.0;
    }
    let frac = step.min(total_steps) as f64 / total_steps as f64;
    schedule.w_max * (1.0 - frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};

    fn prior(d: f64) -> DifficultyPrior {
        DifficultyPrior { diff_n: d, mean_naive_reward: 1.0 - d }
    }

    #[test]
    fn prior_cases() {
        assert_eq!(difficulty_prior(&[1.0; 8]).unwrap().diff_n, 0.0);
        assert_eq!(difficulty_prior(&[0.0; 8]).unwrap().diff_n, 1.0);
        let r = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        assert_eq!(difficulty_prior(&r).unwrap().diff_n, 0.5);
        assert!(difficulty_prior(&[]).is_err());
    }

    #[test]
    fn noiseless_ratio_boundaries() {
        let s = HintSchedule::default();
        assert_eq!(hint_ratio_with_noise(&prior(0.0), &s, 0.0), 0.0);
        assert_eq!(hint_ratio_with_noise(&prior(1.0), &s, 0.0), 0.2);
        assert_eq!(hint_ratio_with_noise(&prior(0.5), &s, 0.0), 0.1);
    }

    #[test]
    fn noisy_ratio_is_clamped_and_replayable() {
        let s = HintSchedule::default();
        let mut a = rng::stream(1, Purpose::HintNoise, 3, 4, 0);
        let mut b = rng::stream(1, Purpose::HintNoise, 3, 4, 0);
        for d in [0.0, 0.3, 1.0] {
            let w = hint_ratio(&prior(d), &s, &mut a);
            assert_eq!(w, hint_ratio(&prior(d), &s, &mut b));
            assert!((0.0..=1.0).contains(&w));
            assert!((w - linear_ratio(d, &s)).abs() <= s.noise_radius);
        }
    }

    #[test]
    fn hint_lengths() {
        assert_eq!(hint_length(0.2, 10, 64), 2);
        assert_eq!(hint_length(0.0, 10, 64), 0);
        assert_eq!(hint_length(0.19, 10, 64), 1);
        assert_eq!(hint_length(1.0, 30, 8), 7);
    }

    #[test]
    fn annealing() {
        let s = HintSchedule::default();
        assert_eq!(annealing_ratio(0, 100, &s), 0.2);
        assert_eq!(annealing_ratio(100, 100, &s), 0.0);
        assert!((annealing_ratio(50, 100, &s) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn schedule_validation() {
        assert!(HintSchedule::default().validate().is_ok());
        assert!(HintSchedule { w_min: 0.3, ..Default::default() }.validate().is_err());
        assert!(HintSchedule { w_max: 1.5, ..Default::default() }.validate().is_err());
        assert!(HintSchedule { noise_radius: -0.1, ..Default::default() }.validate().is_err());
    }
}
