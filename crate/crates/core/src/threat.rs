//! Residual threat to the VIP.
//!
//! Each bystander contributes a threat that decays exponentially with its
//! distance to the VIP, reaching exactly 1 at contact and exactly 0 at the
//! safe distance. A bystander whose line of approach is covered by a guard
//! contributes nothing. Per-bystander threats combine as `1 − Π(1 − rt_i)`
//! and the cumulative residual threat is the time integral of that value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::sim::{EntityState, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThreatParams {
    /// Distance at and beyond which a bystander poses no threat.
    pub d_safe: f64,
    /// Exponential decay rate.
    pub kappa: f64,
    /// Half-width of the corridor a guard covers along the VIP–bystander segment.
    pub block_width: f64,
}

impl Default for ThreatParams {
    fn default() -> Self {
        Self {
            d_safe: 0.6,
            kappa: 5.0,
            block_width: 0.1,
        }
    }
}

impl ThreatParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_safe > 0.0 && self.d_safe.is_finite()) {
            return Err(Error::Config("threat: d_safe must be positive".into()));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config("threat: kappa must be positive".into()));
        }
        if !(self.block_width >= 0.0) {
            return Err(Error::Config("threat: block_width must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThreatSample {
    pub per_bystander_rt: Vec<f64>,
    pub combined: f64,
}

impl ThreatSample {
    /// Combines per-bystander values into `1 − Π(1 − rt)`.
    pub fn from_residuals(per_bystander_rt: Vec<f64>) -> Self {
        let combined = 1.0 - survival(&per_bystander_rt);
        Self {
            per_bystander_rt,
            combined,
        }
    }

    /// `Π(1 − rt_i)`: probability that no bystander reaches the VIP.
    pub fn survival(&self) -> f64 {
        survival(&self.per_bystander_rt)
    }
}

fn survival(rts: &[f64]) -> f64 {
    rts.iter().fold(1.0, |acc, rt| acc * (1.0 - rt))
}

/// Normalised exponential decay: 1 at distance 0, 0 at and beyond `d_safe`.
pub fn base_threat(distance: f64, p: &ThreatParams) -> f64 {
    if !(distance < p.d_safe) {
        return 0.0;
    }
    let floor = (-p.kappa * p.d_safe).exp();
    let v = ((-p.kappa * distance.max(0.0)).exp() - floor) / (1.0 - floor);
    v.clamp(0.0, 1.0)
}

/// True when some guard lies within `block_width` of the open segment
/// VIP → bystander (projection parameter strictly inside `(0, 1)`).
pub fn is_blocked(vip: Vec2, bystander: Vec2, guards: &[Vec2], p: &ThreatParams) -> bool {
    let seg = bystander - vip;
    let len_sq = seg.norm_sq();
    if len_sq == 0.0 {
        return false;
    }
    guards.iter().any(|&g| {
        let s = (g - vip).dot(seg) / len_sq;
        if s <= 0.0 || s >= 1.0 {
            return false;
        }
        let foot = vip + seg * s;
        (g - foot).norm() <= p.block_width
    })
}

pub fn residual_threat(vip: &EntityState, bystander: &EntityState, guards: &[Vec2], p: &ThreatParams) -> f64 {
    if is_blocked(vip.pos, bystander.pos, guards, p) {
        0.0
    } else {
        base_threat(vip.pos.distance(bystander.pos), p)
    }
}

pub fn instantaneous_threat(w: &WorldState, p: &ThreatParams) -> ThreatSample {
    let guards = w.guard_positions();
    let rts = w
        .bystanders
        .iter()
        .map(|b| residual_threat(&w.vip, b, &guards, p))
        .collect();
    ThreatSample::from_residuals(rts)
}

/// One left-Riemann step of the cumulative residual threat integral.
pub fn accumulate_crt(crt: f64, sample: &ThreatSample, dt: f64) -> f64 {
    crt + sample.combined * dt
}
