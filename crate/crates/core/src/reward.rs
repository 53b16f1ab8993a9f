//! Per-guard rewards: the threat-only reward and the composite reward that
//! adds a standoff-band penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::threat::ThreatSample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardParams {
    pub alpha: f64,
    pub beta: f64,
    /// Minimum guard–VIP distance.
    pub m: f64,
    /// Maximum guard–VIP distance (the threat safe distance).
    pub d: f64,
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::Config("reward: alpha and beta must be non-negative".into()));
        }
        if !(0.0 < self.m && self.m < self.d) {
            return Err(Error::Config("reward: need 0 < m < d".into()));
        }
        Ok(())
    }
}

/// `−1 + Π(1 − rt_i)`; the same value goes to every guard.
pub fn threat_only_reward(sample: &ThreatSample) -> f64 {
    -1.0 + sample.survival()
}

/// 0 inside the closed band `m ≤ |guard − vip| ≤ d`, −1 outside.
pub fn distance_band_penalty(vip: Vec2, guard: Vec2, p: &RewardParams) -> f64 {
    let r = guard.distance(vip);
    if p.m <= r && r <= p.d {
        0.0
    } else {
        -1.0
    }
}

pub fn composite_reward(sample: &ThreatSample, vip: Vec2, guard: Vec2, p: &RewardParams) -> f64 {
    p.alpha * threat_only_reward(sample) + p.beta * distance_band_penalty(vip, guard, p)
}
