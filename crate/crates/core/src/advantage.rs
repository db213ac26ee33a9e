//! Group-relative advantages and their rescaling by the rollout difficulty
//! posterior.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Standard deviations below this mark a zero-variance group.
pub const DEGENERATE_STD: f64 = 1e-12;
/// Floor on a group mean used as a divisor when the advantage is positive.
pub const GROUP_MEAN_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledAdvantages {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub a_hat: Vec<f64>,
    pub degenerate: bool,
}

pub fn pooled_advantages(rewards: &[f64]) -> Result<PooledAdvantages> {
    ensure!(rewards.len() >= 2, "group advantages need at least 2 rollouts, got {}", rewards.len());
    let g = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / g;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g).sqrt();
    let degenerate = std < DEGENERATE_STD;
    let a_hat = if degenerate {
        vec![0.0; rewards.len()]
    } else {
        rewards.iter().map(|r| (r - mean) / std).collect()
    };
    Ok(PooledAdvantages {
        mean,
        std,
        a_hat,
        degenerate,
    })
}

/// `+1` iff `a_hat > 0`.
pub fn sign_indicator(a_hat: f64) -> i8 {
    if a_hat > 0.0 {
        1
    } else {
        -1
    }
}

/// `(M / g)^s`, where `g = 1 - Diff` is the mean reward of the rollout's own
/// group and `M` the pooled mean. Positive advantages divide by `g` floored
/// at [`GROUP_MEAN_FLOOR`]; negative ones use `g / M` as written, so an
/// all-zero group gives factor 0.
pub fn rdp_factor(pooled_mean: f64, group_mean: f64, sign: i8) -> f64 {
    if sign > 0 {
        pooled_mean / group_mean.max(GROUP_MEAN_FLOOR)
    } else if pooled_mean > 0.0 {
        group_mean / pooled_mean
    } else {
        // M = 0 means every reward is 0 and the group is degenerate
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageMode {
    AeRdp,
    Pooled,
}

/// Per-query advantage record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    pub rewards: Vec<f64>,
    pub pooled_mean: f64,
    pub pooled_std: f64,
    pub diff_n: f64,
    pub diff_h: Option<f64>,
    pub a_hat: Vec<f64>,
    pub signs: Vec<i8>,
    pub a_tilde: Vec<f64>,
    pub degenerate: bool,
}

/// Rescales pooled advantages: rollouts `0..n` are naive (group mean
/// `1 - diff_n`), the rest are hint rollouts (group mean `1 - diff_h`).
pub fn ae_rdp(a_hat: &[f64], pooled_mean: f64, diff_n: f64, diff_h: f64, n: usize) -> Vec<f64> {
    a_hat
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let group_mean = 1.0 - if i < n { diff_n } else { diff_h };
            rdp_factor(pooled_mean, group_mean, sign_indicator(a)) * a
        })
        .collect()
}

/// Ablation: the pooled advantages pass through unchanged.
pub fn pooled_only(a_hat: &[f64]) -> Vec<f64> {
    a_hat.to_vec()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Full advantage computation for one query with `naive` and `hint` rewards.
/// An empty `hint` slice gives plain group-relative advantages over the naive
/// rollouts.
pub fn estimate(naive: &[f64], hint: &[f64], mode: AdvantageMode) -> Result<AdvantageReport> {
    ensure!(!naive.is_empty(), "advantage estimation needs naive rollouts");
    let rewards: Vec<f64> = naive.iter().chain(hint).copied().collect();
    let pooled = pooled_advantages(&rewards)?;
    let diff_n = 1.0 - mean(naive);
    let diff_h = (!hint.is_empty()).then(|| 1.0 - mean(hint));
    let a_tilde = match (mode, diff_h) {
        (AdvantageMode::AeRdp, Some(dh)) if !pooled.degenerate => {
            ae_rdp(&pooled.a_hat, pooled.mean, diff_n, dh, naive.len())
        }
        _ => pooled_only(&pooled.a_hat),
    };
    Ok(AdvantageReport {
        signs: pooled.a_hat.iter().map(|&a| sign_indicator(a)).collect(),
        rewards,
        pooled_mean: pooled.mean,
        pooled_std: pooled.std,
        diff_n,
        diff_h,
        a_hat: pooled.a_hat,
        a_tilde,
        degenerate: pooled.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn worked_pooled_example() {
        let p = pooled_advantages(&[1.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.mean, 0.75);
        assert!(close(p.std, 0.43301, 1e-5));
        let expect = [0.57735, -1.73205, 0.57735, 0.57735];
        assert!(p.a_hat.iter().zip(expect).all(|(a, e)| close(*a, e, 1e-5)));
    }

    #[test]
    fn two_point_group() {
        assert_eq!(pooled_advantages(&[1.0, 0.0]).unwrap().a_hat, vec![1.0, -1.0]);
    }

    #[test]
    fn degenerate_and_too_small() {
        let p = pooled_advantages(&[0.1; 6]).unwrap();
        assert!(p.degenerate);
        assert!(p.a_hat.iter().all(|a| *a == 0.0));
        assert!(pooled_advantages(&[1.0]).is_err());
    }

    #[test]
    fn signs() {
        assert_eq!(sign_indicator(0.5), 1);
        assert_eq!(sign_indicator(-0.2), -1);
        assert_eq!(sign_indicator(0.0), -1);
    }

    #[test]
    fn worked_ae_rdp() {
        let r = estimate(&[1.0, 0.0], &[1.0, 1.0], AdvantageMode::AeRdp).unwrap();
        assert_eq!(r.diff_n, 0.5);
        assert_eq!(r.diff_h, Some(0.0));
        let expect = [0.86603, -1.15470, 0.43301, 0.43301];
        assert!(r.a_tilde.iter().zip(expect).all(|(a, e)| close(*a, e, 1e-5)), "{:?}", r.a_tilde);
        assert!(close(rdp_factor(0.75, 0.5, 1), 1.5, 1e-15));
        assert!(close(rdp_factor(0.75, 0.5, -1), 2.0 / 3.0, 1e-15));
    }

    #[test]
    fn identity_when_group_mean_equals_pooled() {
        assert_eq!(rdp_factor(0.6, 0.6, 1), 1.0);
        assert_eq!(rdp_factor(0.6, 0.6, -1), 1.0);
    }

    #[test]
    fn all_zero_group_gets_zero_negative_advantage() {
        let r = estimate(&[0.0; 4], &[1.0, 0.0, 1.0, 1.0], AdvantageMode::AeRdp).unwrap();
        assert!(r.a_tilde[..4].iter().all(|a| *a == 0.0));
        assert!(r.a_hat[..4].iter().all(|a| *a < 0.0));
    }

    #[test]
    fn pooled_mode_passes_through() {
        let r = estimate(&[1.0, 0.0], &[1.0, 1.0], AdvantageMode::Pooled).unwrap();
        assert_eq!(r.a_tilde, r.a_hat);
        let d = estimate(&[0.1, 0.1], &[0.1, 0.1], AdvantageMode::AeRdp).unwrap();
        assert!(d.degenerate && d.a_tilde.iter().all(|a| *a == 0.0));
    }
}
