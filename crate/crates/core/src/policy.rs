//! Team controllers that can drive an [`Env`].

use crate::env::Env;
use crate::error::{Error, Result};
use crate::marl::{Algo, Checkpoint};
use crate::nn::{ForwardCache, Mlp};
use crate::qlb::qlb_joint_action;
use crate::scenario::{scenario_one_hot, ScenarioId};
use crate::sim::N_GUARDS;

pub trait TeamPolicy {
    fn name(&self) -> String;

    /// Called before every episode.
    fn begin_episode(&mut self, _scenario: ScenarioId) {}

    /// Writes the flat joint action for the current state into `out`.
    fn act(&mut self, env: &Env<'_>, out: &mut Vec<f64>) -> Result<()>;
}

/// Guards apply no force and stay silent.
pub struct NoopPolicy;

impl TeamPolicy for NoopPolicy {
    fn name(&self) -> String {
        "noop".into()
    }

    fn act(&mut self, env: &Env<'_>, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        out.resize(N_GUARDS * env.config().sim.action_dim(), 0.0);
        Ok(())
    }
}

pub struct QlbPolicy;

impl TeamPolicy for QlbPolicy {
    fn name(&self) -> String {
        "qlb".into()
    }

    fn act(&mut self, env: &Env<'_>, out: &mut Vec<f64>) -> Result<()> {
        let cfg = env.config();
        *out = qlb_joint_action(env.world(), &cfg.threat, &cfg.qlb, &cfg.sim);
        Ok(())
    }
}

/// Deterministic learned actors (no exploration noise).
pub struct ActorPolicy {
    label: String,
    actors: Vec<Mlp>,
    scenario_dim: usize,
    code: Vec<f64>,
    obs: Vec<f64>,
    input: Vec<f64>,
    cache: ForwardCache,
}

impl ActorPolicy {
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.agents.len() != N_GUARDS {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} agents, expected {N_GUARDS}",
                ckpt.agents.len()
            )));
        }
        if ckpt.algo == Algo::QlbEval {
            return Err(Error::Checkpoint("checkpoint carries no learned policy".into()));
        }
        let tag: String = ckpt.scenarios.iter().map(|s| s.letter()).collect();
        Ok(Self {
            label: format!("{}[{tag}]", ckpt.algo),
            actors: ckpt.agents.iter().map(|a| a.actor.clone()).collect(),
            scenario_dim: ckpt.algo.scenario_dim(),
            code: Vec::new(),
            obs: Vec::new(),
            input: Vec::new(),
            cache: ForwardCache::default(),
        })
    }
}

impl TeamPolicy for ActorPolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn begin_episode(&mut self, scenario: ScenarioId) {
        self.code = scenario_one_hot(scenario)[..self.scenario_dim].to_vec();
    }

    fn act(&mut self, env: &Env<'_>, out: &mut Vec<f64>) -> Result<()> {
        let od = env.config().sim.obs_dim();
        let ad = env.config().sim.action_dim();
        if self.code.len() != self.scenario_dim {
            self.begin_episode(env.scenario());
        }
        self.obs.resize(N_GUARDS * od, 0.0);
        env.observe_all(&mut self.obs)?;
        out.clear();
        for (actor, o) in self.actors.iter().zip(self.obs.chunks_exact(od)) {
            self.input.clear();
            self.input.extend_from_slice(o);
            self.input.extend_from_slice(&self.code);
            let before = out.len();
            actor.forward(&self.input, 1, &mut self.cache)?;
            out.extend_from_slice(self.cache.output());
            if out.len() - before != ad {
                return Err(Error::Checkpoint(format!(
                    "actor emits {} values, the environment expects {ad}",
                    out.len() - before
                )));
            }
        }
        Ok(())
    }
}
