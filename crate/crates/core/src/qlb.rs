//! Quadrant load balancing: a hand-engineered formation controller.
//!
//! The plane around the VIP is split into four quadrants aligned with the
//! VIP's path heading; quadrant `k` spans `[heading + k·90°, heading + (k+1)·90°)`.
//! Each bystander adds its (unblocked) base threat to the load of its
//! quadrant. Guard `k` owns quadrant `k` and stands on a ring of radius
//! `ring_radius` around the VIP, at the threat-weighted mean bystander
//! direction of its quadrant, or on the quadrant bisector when the quadrant
//! is empty.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{wrap_angle_positive, Vec2};
use crate::sim::{EntityClass, SimConfig, WorldState, N_GUARDS};
use crate::threat::{base_threat, ThreatParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QlbParams {
    /// Guard standoff from the VIP.
    pub ring_radius: f64,
    /// Proportional pursuit gain.
    pub gain: f64,
    /// Gain on the velocity mismatch between the VIP and the guard.
    pub velocity_gain: f64,
    /// Add the force that keeps pace with the VIP's current velocity.
    pub feedforward: bool,
}

impl Default for QlbParams {
    fn default() -> Self {
        Self {
            ring_radius: 0.3,
            gain: 4.0,
            velocity_gain: 1.0,
            feedforward: true,
        }
    }
}

impl QlbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ring_radius > 0.0 && self.gain > 0.0) {
            return Err(Error::Config("qlb: ring_radius and gain must be positive".into()));
        }
        if !(self.velocity_gain >= 0.0) {
            return Err(Error::Config("qlb: velocity_gain must be non-negative".into()));
        }
        Ok(())
    }
}

/// Quadrant index of `pos` around the VIP.
pub fn quadrant_of(w: &WorldState, pos: Vec2) -> usize {
    let phi = wrap_angle_positive((pos - w.vip.pos).angle() - w.vip_heading);
    ((phi / FRAC_PI_2) as usize).min(3)
}

/// Angle of the bisector of quadrant `k`, absolute.
pub fn bisector(w: &WorldState, k: usize) -> f64 {
    w.vip_heading + FRAC_PI_4 + FRAC_PI_2 * k as f64
}

pub fn qlb_quadrant_loads(w: &WorldState, p: &ThreatParams) -> [f64; N_GUARDS] {
    let mut loads = [0.0; N_GUARDS];
    for b in &w.bystanders {
        let threat = base_threat(b.pos.distance(w.vip.pos), p);
        if threat > 0.0 {
            loads[quadrant_of(w, b.pos)] += threat;
        }
    }
    loads
}

pub fn qlb_target_positions(w: &WorldState, threat: &ThreatParams, p: &QlbParams) -> [Vec2; N_GUARDS] {
    let mut sums = [Vec2::ZERO; N_GUARDS];
    let mut loads = [0.0; N_GUARDS];
    for b in &w.bystanders {
        let rel = b.pos - w.vip.pos;
        let weight = base_threat(rel.norm(), threat);
        if weight > 0.0 {
            let k = quadrant_of(w, b.pos);
            sums[k] += rel.normalized_or_zero() * weight;
            loads[k] += weight;
        }
    }
    let mut targets = [Vec2::ZERO; N_GUARDS];
    for k in 0..N_GUARDS {
        let theta = if loads[k] > 0.0 && sums[k].norm_sq() > 0.0 {
            sums[k].angle()
        } else {
            bisector(w, k)
        };
        targets[k] = w.vip.pos + Vec2::from_angle(theta) * p.ring_radius;
    }
    targets
}

/// Force for guard `i`: `gain·(target − pos) + velocity_gain·(v_vip − v_guard)`
/// plus, optionally, the force that sustains the VIP's velocity, clipped to
/// `[-1, 1]` per component.
pub fn qlb_action(w: &WorldState, guard_index: usize, threat: &ThreatParams, p: &QlbParams, sim: &SimConfig) -> Vec2 {
    let targets = qlb_target_positions(w, threat, p);
    guard_force(w, guard_index, targets[guard_index], p, sim)
}

fn guard_force(w: &WorldState, i: usize, target: Vec2, p: &QlbParams, sim: &SimConfig) -> Vec2 {
    let g = &w.guards[i];
    let mut f = (target - g.pos) * p.gain + (w.vip.vel - g.vel) * p.velocity_gain;
    if p.feedforward {
        f += w.vip.vel * (sim.damping / (sim.accel.get(EntityClass::Guard) * sim.dt));
    }
    f.clamp_components(-1.0, 1.0)
}

/// Flat `N × action_dim` joint action for the whole team, utterances zero.
pub fn qlb_joint_action(w: &WorldState, threat: &ThreatParams, p: &QlbParams, sim: &SimConfig) -> Vec<f64> {
    let targets = qlb_target_positions(w, threat, p);
    let ad = sim.action_dim();
    let mut out = vec![0.0; N_GUARDS * ad];
    for i in 0..N_GUARDS {
        let f = guard_force(w, i, targets[i], p, sim);
        out[i * ad] = f.x;
        out[i * ad + 1] = f.y;
    }
    out
}
