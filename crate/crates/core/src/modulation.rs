//! Per-token gradient factors for hint tokens: entropy-consistency modulation
//! and selective masking.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rollout::{Rollout, RolloutKind};

/// Entropies (and their mean) below this count as zero.
pub const ZERO_ENTROPY: f64 = 1e-9;

/// Cosine bump on `[alpha, 1/alpha]` peaking at `g(1) = 1`.
pub fn g_schedule(x: f64, alpha: f64) -> f64 {
    debug_assert!(alpha > 0.0 && alpha <= 1.0);
    if alpha >= 1.0 {
        return if x == 1.0 { 1.0 } else { 0.0 };
    }
    let upper = 1.0 / alpha;
    if x < alpha || x >= upper || x.is_nan() {
        0.0
    } else if x <= 1.0 {
        (FRAC_PI_2 * (x - alpha) / (1.0 - alpha)).sin()
    } else {
        (FRAC_PI_2 * (x - 1.0) / (upper - 1.0)).cos()
    }
}

/// Mean entropy over the policy-generated continuation `t >= hint_len`.
pub fn continuation_entropy(rollout: &Rollout) -> Result<f64> {
    let cont = &rollout.entropy[rollout.hint_len..];
    if cont.is_empty() {
        return Err(Error::Contract("rollout has no generated continuation".into()));
    }
    Ok(cont.iter().sum::<f64>() / cont.len() as f64)
}

/// Which factor rules apply to hint tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorMode {
    /// Mask hint tokens of non-positive rollouts, modulate the rest.
    Full,
    /// Masking only; positive hint tokens keep factor 1.
    NoCgm,
    /// Modulation on every hint token regardless of sign.
    NoMasking,
    /// Every factor is 1.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenFactorPlan {
    pub factors: Vec<f64>,
    pub hint_len: usize,
    pub alpha: f64,
    /// Mean continuation entropy, absent when the continuation is empty.
    pub h_bar: Option<f64>,
    /// The hint filled the whole rollout, so nothing anchors the modulation.
    pub empty_continuation: bool,
}

fn modulated(entropy: f64, h_bar: f64, alpha: f64) -> f64 {
    let x = if h_bar < ZERO_ENTROPY {
        if entropy < ZERO_ENTROPY {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        entropy / h_bar
    };
    g_schedule(x, alpha)
}

pub fn token_factors(rollout: &Rollout, a_hat: f64, alpha: f64, mode: FactorMode) -> TokenFactorPlan {
    let len = rollout.len();
    let h = if rollout.kind == RolloutKind::Naive { 0 } else { rollout.hint_len };
    let h_bar = continuation_entropy(rollout).ok().filter(|_| h > 0);
    let empty_continuation = h > 0 && h == len;
    let positive = a_hat > 0.0;
    let uses_g = match mode {
        FactorMode::Full => positive,
        FactorMode::NoMasking => true,
        FactorMode::NoCgm | FactorMode::None => false,
    };
    let masked = matches!(mode, FactorMode::Full | FactorMode::NoCgm) && !positive;
    let factors = (0..len)
        .map(|t| {
            if t >= h {
                1.0
            } else if masked {
                0.0
            } else if uses_g {
                h_bar.map_or(0.0, |hb| modulated(rollout.entropy[t], hb, alpha))
            } else {
                1.0
            }
        })
        .collect();
    TokenFactorPlan {
        factors,
        hint_len: h,
        alpha,
        h_bar,
        empty_continuation,
    }
}
