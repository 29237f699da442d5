//! Closed-form regret bounds and lemma caps, natural logarithms throughout.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    Thm1,
    Thm2,
    Thm3,
    Thm4,
}

impl Theorem {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Theorem::Thm1),
            2 => Ok(Theorem::Thm2),
            3 => Ok(Theorem::Thm3),
            4 => Ok(Theorem::Thm4),
            _ => invalid(format!("no theorem {n}")),
        }
    }
}

/// Problem size. For the general-sum bound, `actions_max` is the joint
/// action count and `actions_min` is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundDims {
    pub states: usize,
    pub actions_max: usize,
    pub actions_min: usize,
    pub horizon: usize,
    pub episodes: usize,
    #[serde(default = "one")]
    pub players: usize,
}

fn one() -> usize {
    1
}

/// Information budget and distortion for the compressed bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionExtra {
    pub information: f64,
    pub epsilon: f64,
}

fn ln_skh(d: &BoundDims) -> f64 {
    ((d.states * d.episodes * d.horizon) as f64).ln().max(0.0)
}

pub fn theoretical_bounds(d: &BoundDims, which: Theorem, extra: Option<CompressionExtra>) -> Result<f64> {
    if d.states == 0 || d.actions_max == 0 || d.horizon == 0 || d.episodes == 0 {
        return invalid("bound dimensions must be positive");
    }
    let (s, a, b, h, k) = (d.states as f64, d.actions_max as f64, d.actions_min as f64, d.horizon as f64, d.episodes as f64);
    match which {
        Theorem::Thm1 | Theorem::Thm2 => {
            if d.actions_min == 0 {
                return invalid("bound dimensions must be positive");
            }
            Ok(8.0 * s.powf(1.5) * a * b * h * h * (k * ln_skh(d)).sqrt())
        }
        Theorem::Thm3 => {
            let Some(x) = extra else {
                return invalid("the compressed bound needs information and epsilon");
            };
            if !(x.information >= 0.0) || !(x.epsilon >= 0.0) {
                return invalid("information and epsilon must be nonnegative");
            }
            Ok(4.0 * (k * h.powi(3) * s * a * b * x.information).sqrt() + 4.0 * k * x.epsilon)
        }
        Theorem::Thm4 => {
            if d.players == 0 {
                return invalid("at least one player");
            }
            Ok(3.0 * d.players as f64 * s.powf(1.5) * a * h * h * (k * ln_skh(d)).sqrt())
        }
    }
}

/// Information-ratio cap for posterior-sampling proxies, `4H³SAB`.
pub fn ts_ratio_cap(horizon: usize, states: usize, actions_max: usize, actions_min: usize) -> f64 {
    4.0 * (horizon as f64).powi(3) * (states * actions_max * actions_min) as f64
}

/// Cumulative information cap, `2S²ABH ln(SKH)`.
pub fn mi_cap(d: &BoundDims) -> f64 {
    let s = d.states as f64;
    2.0 * s * s * (d.actions_max * d.actions_min * d.horizon) as f64 * ln_skh(d)
}
