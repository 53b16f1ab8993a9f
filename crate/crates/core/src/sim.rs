//! Deterministic 2D particle world: entities, damped double-integrator
//! physics and per-guard observation vectors.

use serde::{Deserialize, Serialize};

use crate::error::{dim, Error, Result};
use crate::geom::Vec2;
use crate::scenario::ScenarioId;

/// Number of bodyguards in every world.
pub const N_GUARDS: usize = 4;
/// Number of bystander slots in each observation.
pub const OBSERVED_BYSTANDERS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EntityClass {
    Vip,
    Guard,
    Bystander,
}

/// A value per entity class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub vip: f64,
    pub guard: f64,
    pub bystander: f64,
}

impl PerClass {
    pub fn get(&self, cls: EntityClass) -> f64 {
        match cls {
            EntityClass::Vip => self.vip,
            EntityClass::Guard => self.guard,
            EntityClass::Bystander => self.bystander,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Seconds per step.
    pub dt: f64,
    /// Fraction of velocity lost per step, in `[0, 1)`.
    pub damping: f64,
    /// The arena is the square `[-arena_half, arena_half]²`.
    pub arena_half: f64,
    pub max_speed: PerClass,
    /// Force sensitivity: a unit force changes velocity by `accel * dt` per step.
    pub accel: PerClass,
    /// Steps per episode.
    pub horizon: usize,
    pub bystanders: usize,
    /// Utterance channel width per guard.
    pub comm_dim: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            damping: 0.25,
            arena_half: 1.2,
            max_speed: PerClass {
                vip: 0.8,
                guard: 1.3,
                bystander: 1.0,
            },
            accel: PerClass {
                vip: 1.0,
                guard: 4.0,
                bystander: 3.0,
            },
            horizon: 100,
            bystanders: 10,
            comm_dim: 4,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("sim: {m}")));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(0.0..1.0).contains(&self.damping) {
            return bad("damping must lie in [0, 1)");
        }
        if !(self.arena_half > 0.0) {
            return bad("arena_half must be positive");
        }
        if self.horizon < 1 {
            return bad("horizon must be at least 1");
        }
        for v in [self.max_speed.vip, self.max_speed.guard, self.max_speed.bystander] {
            if !(v > 0.0) {
                return bad("max speeds must be positive");
            }
        }
        for v in [self.accel.vip, self.accel.guard, self.accel.bystander] {
            if !(v > 0.0) {
                return bad("accel must be positive");
            }
        }
        Ok(())
    }

    /// Guard action width: 2 movement components plus the utterance.
    pub fn action_dim(&self) -> usize {
        2 + self.comm_dim
    }

    /// Observation width: self vel/pos, VIP rel pos/vel, teammate rel pos,
    /// closest bystanders (rel pos + rel vel) and teammate utterances.
    pub fn obs_dim(&self) -> usize {
        2 + 2 + 2 + 2 + 2 * (N_GUARDS - 1) + 4 * OBSERVED_BYSTANDERS + (N_GUARDS - 1) * self.comm_dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntityState {
    pub pos: Vec2,
    pub vel: Vec2,
    /// Last emitted utterance; empty for entities that do not speak.
    pub utterance: Vec<f64>,
}

impl EntityState {
    pub fn at(pos: Vec2) -> Self {
        Self {
            pos,
            vel: Vec2::ZERO,
            utterance: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub vip: EntityState,
    pub guards: Vec<EntityState>,
    pub bystanders: Vec<EntityState>,
    pub landmarks: Vec<Vec2>,
    /// Where the VIP is walking to.
    pub vip_destination: Vec2,
    /// Direction of the VIP's path (start → destination), radians.
    pub vip_heading: f64,
    pub t: usize,
    pub scenario: ScenarioId,
}

/// Advances one entity by one step.
///
/// `vel' = vel·(1−damping) + accel·force·dt`, speed-clamped to the class
/// maximum, then `pos' = pos + vel'·dt` clamped to the arena. Force
/// components are clipped to `[-1, 1]`.
pub fn integrate_entity(state: &EntityState, force: Vec2, cls: EntityClass, cfg: &SimConfig) -> Result<EntityState> {
    if !force.is_finite() {
        return Err(Error::NonFinite("entity force"));
    }
    let force = force.clamp_components(-1.0, 1.0);
    let vel =
        (state.vel * (1.0 - cfg.damping) + force * (cfg.accel.get(cls) * cfg.dt)).clamp_norm(cfg.max_speed.get(cls));
    let a = cfg.arena_half;
    let pos = (state.pos + vel * cfg.dt).clamp_components(-a, a);
    Ok(EntityState {
        pos,
        vel,
        utterance: state.utterance.clone(),
    })
}

impl WorldState {
    /// Advances every entity one step. `guard_utterances` is a flat
    /// `N_GUARDS × comm_dim` array stored verbatim for the next observation.
    pub fn step(
        &mut self,
        guard_forces: &[Vec2],
        guard_utterances: &[f64],
        bystander_forces: &[Vec2],
        vip_force: Vec2,
        cfg: &SimConfig,
    ) -> Result<()> {
        dim("guard forces", self.guards.len(), guard_forces.len())?;
        dim(
            "guard utterances",
            self.guards.len() * cfg.comm_dim,
            guard_utterances.len(),
        )?;
        dim("bystander forces", self.bystanders.len(), bystander_forces.len())?;
        if guard_utterances.iter().any(|u| !u.is_finite()) {
            return Err(Error::NonFinite("guard utterance"));
        }
        if self.t >= cfg.horizon {
            return Err(Error::Config(format!("episode already finished at t = {}", self.t)));
        }

        // Commit only once every entity has integrated.
        let vip = integrate_entity(&self.vip, vip_force, EntityClass::Vip, cfg)?;
        let mut guards = Vec::with_capacity(self.guards.len());
        for (i, (g, f)) in self.guards.iter().zip(guard_forces).enumerate() {
            let mut next = integrate_entity(g, *f, EntityClass::Guard, cfg)?;
            next.utterance.clear();
            next.utterance
                .extend_from_slice(&guard_utterances[i * cfg.comm_dim..(i + 1) * cfg.comm_dim]);
            guards.push(next);
        }
        let mut bystanders = Vec::with_capacity(self.bystanders.len());
        for (b, f) in self.bystanders.iter().zip(bystander_forces) {
            bystanders.push(integrate_entity(b, *f, EntityClass::Bystander, cfg)?);
        }
        self.vip = vip;
        self.guards = guards;
        self.bystanders = bystanders;
        self.t += 1;
        Ok(())
    }

    /// Guard positions, index order.
    pub fn guard_positions(&self) -> Vec<Vec2> {
        self.guards.iter().map(|g| g.pos).collect()
    }
}

/// Value-returning form of [`WorldState::step`].
pub fn step_world(
    w: &WorldState,
    guard_forces: &[Vec2],
    guard_utterances: &[f64],
    bystander_forces: &[Vec2],
    vip_force: Vec2,
    cfg: &SimConfig,
) -> Result<WorldState> {
    let mut next = w.clone();
    next.step(guard_forces, guard_utterances, bystander_forces, vip_force, cfg)?;
    Ok(next)
}

/// Indices of the `k` bystanders nearest to `from`, nearest first; ties go
/// to the lower index.
pub fn closest_k_bystanders(w: &WorldState, from: Vec2, k: usize) -> Vec<usize> {
    let mut idx: Vec<(f64, usize)> = w
        .bystanders
        .iter()
        .enumerate()
        .map(|(i, b)| ((b.pos - from).norm_sq(), i))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    idx.truncate(k);
    idx.into_iter().map(|(_, i)| i).collect()
}

/// Writes guard `i`'s observation into `out` (length [`SimConfig::obs_dim`]).
///
/// Layout: self vel, self pos, VIP rel pos, VIP rel vel, the other three
/// guards' rel pos (index order), the five closest bystanders' rel pos and
/// rel vel (nearest first, zero padded), the other guards' utterances.
pub fn observe_into(w: &WorldState, i: usize, comm_dim: usize, out: &mut [f64]) {
    let me = &w.guards[i];
    let mut k = 0;
    let mut put = |out: &mut [f64], v: Vec2| {
        out[k] = v.x;
        out[k + 1] = v.y;
        k += 2;
    };
    put(out, me.vel);
    put(out, me.pos);
    put(out, w.vip.pos - me.pos);
    put(out, w.vip.vel - me.vel);
    for (j, g) in w.guards.iter().enumerate() {
        if j != i {
            put(out, g.pos - me.pos);
        }
    }
    let near = closest_k_bystanders(w, me.pos, OBSERVED_BYSTANDERS);
    for slot in 0..OBSERVED_BYSTANDERS {
        match near.get(slot) {
            Some(&b) => {
                let b = &w.bystanders[b];
                put(out, b.pos - me.pos);
                put(out, b.vel - me.vel);
            }
            None => {
                put(out, Vec2::ZERO);
                put(out, Vec2::ZERO);
            }
        }
    }
    for (j, g) in w.guards.iter().enumerate() {
        if j != i {
            let dst = &mut out[k..k + comm_dim];
            if g.utterance.len() == comm_dim {
                dst.copy_from_slice(&g.utterance);
            } else {
                dst.fill(0.0);
            }
            k += comm_dim;
        }
    }
    debug_assert_eq!(k, out.len());
}

pub fn observe(w: &WorldState, i: usize, cfg: &SimConfig) -> Vec<f64> {
    let mut out = vec![0.0; cfg.obs_dim()];
    observe_into(w, i, cfg.comm_dim, &mut out);
    out
}
