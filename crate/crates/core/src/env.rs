//! Episode driver: scripted crowd and VIP, guard actions in, threat and
//! per-guard rewards out.

use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::error::{dim, Result};
use crate::geom::Vec2;
use crate::reward::{composite_reward, threat_only_reward};
use crate::rng::{ids, stream};
use crate::scenario::{
    bystander_forces, make_scenario, respawn_street_walkers, vip_policy, BystanderIntent, ScenarioId, ScenarioSpec,
};
use crate::sim::{observe_into, WorldState, N_GUARDS};
use crate::threat::{accumulate_crt, instantaneous_threat, ThreatSample};

/// What one call to [`Env::step`] produced.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    /// Threat of the state the step started from.
    pub threat: ThreatSample,
    /// One reward per guard, scored on the state the step arrived at.
    pub rewards: Vec<f64>,
    pub done: bool,
}

pub struct Env<'a> {
    cfg: &'a Config,
    spec: ScenarioSpec,
    intents: Vec<BystanderIntent>,
    world: WorldState,
    rng: ChaCha8Rng,
    threat: ThreatSample,
    crt: f64,
    threat_sum: f64,
    forces: Vec<Vec2>,
    utterances: Vec<f64>,
}

impl<'a> Env<'a> {
    pub fn new(id: ScenarioId, seed: u64, cfg: &'a Config) -> Result<Self> {
        let (spec, intents, world) = make_scenario(id, seed, cfg)?;
        let threat = instantaneous_threat(&world, &cfg.threat);
        Ok(Self {
            cfg,
            spec,
            intents,
            world,
            rng: stream(seed, ids::DYNAMICS),
            threat,
            crt: 0.0,
            threat_sum: 0.0,
            forces: Vec::with_capacity(N_GUARDS),
            utterances: Vec::with_capacity(N_GUARDS * cfg.sim.comm_dim),
        })
    }

    pub fn config(&self) -> &Config {
        self.cfg
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn scenario(&self) -> ScenarioId {
        self.spec.id
    }

    /// Threat of the current state.
    pub fn threat(&self) -> &ThreatSample {
        &self.threat
    }

    pub fn done(&self) -> bool {
        self.world.t >= self.cfg.sim.horizon
    }

    /// Cumulative residual threat so far.
    pub fn crt(&self) -> f64 {
        self.crt
    }

    /// Mean combined threat over the steps taken so far.
    pub fn avg_residual_threat(&self) -> f64 {
        if self.world.t == 0 {
            0.0
        } else {
            self.threat_sum / self.world.t as f64
        }
    }

    /// Joint observation, `N_GUARDS × obs_dim`.
    pub fn observe_all(&self, out: &mut [f64]) -> Result<()> {
        let od = self.cfg.sim.obs_dim();
        dim("joint observation", N_GUARDS * od, out.len())?;
        for (i, o) in out.chunks_exact_mut(od).enumerate() {
            observe_into(&self.world, i, self.cfg.sim.comm_dim, o);
        }
        Ok(())
    }

    /// Advances one step under the flat joint action `N_GUARDS × (2 + C)`.
    pub fn step(&mut self, joint_action: &[f64]) -> Result<StepOutcome> {
        let sim = &self.cfg.sim;
        let ad = sim.action_dim();
        dim("joint action", N_GUARDS * ad, joint_action.len())?;
        self.forces.clear();
        self.utterances.clear();
        for a in joint_action.chunks_exact(ad) {
            self.forces.push(Vec2::new(a[0], a[1]));
            self.utterances.extend_from_slice(&a[2..]);
        }
        let crowd = bystander_forces(
            &self.world,
            &self.spec,
            &mut self.intents,
            &self.cfg.scenario,
            sim,
            &mut self.rng,
        );
        let vip = vip_policy(&self.world, &self.cfg.scenario.vip, sim.dt);
        self.world.step(&self.forces, &self.utterances, &crowd, vip, sim)?;
        respawn_street_walkers(
            &mut self.world,
            &mut self.intents,
            &self.cfg.scenario.street,
            sim.arena_half,
            &mut self.rng,
        );

        let next = instantaneous_threat(&self.world, &self.cfg.threat);
        let before = std::mem::replace(&mut self.threat, next);
        self.crt = accumulate_crt(self.crt, &before, sim.dt);
        self.threat_sum += before.combined;
        let rewards = if self.cfg.train.threat_only {
            vec![threat_only_reward(&self.threat); N_GUARDS]
        } else {
            self.world
                .guards
                .iter()
                .map(|g| composite_reward(&self.threat, self.world.vip.pos, g.pos, &self.spec.reward))
                .collect()
        };
        Ok(StepOutcome {
            threat: before,
            rewards,
            done: self.done(),
        })
    }
}
