//! Centralized-critic actor-critic training for the guard team, with and
//! without scenario conditioning.

mod agent;
mod checkpoint;
mod replay;
mod train;

pub use agent::{actor_update, critic_target, critic_update, select_action, update_round, AgentNets, UpdateScratch};
pub use checkpoint::{checkpoint_file_name, Checkpoint};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use train::{noise_sigma, train_run, training_seed, EpisodeMetrics, ScenarioSampler, Trainer, METRICS_HEADER};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::N_SCENARIOS;
use crate::sim::{SimConfig, N_GUARDS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algo {
    /// One fixed scenario, no scenario code in any network input.
    Maddpg,
    /// Actors and critics see the scenario one-hot.
    Maupg,
    /// Scripted formation controller; episodes are run for metrics only.
    QlbEval,
}

impl Algo {
    pub fn tag(self) -> u8 {
        match self {
            Algo::Maddpg => 0,
            Algo::Maupg => 1,
            Algo::QlbEval => 2,
        }
    }

    pub fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(Algo::Maddpg),
            1 => Ok(Algo::Maupg),
            2 => Ok(Algo::QlbEval),
            _ => Err(Error::Checkpoint(format!("unknown algorithm tag {t}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algo::Maddpg => "maddpg",
            Algo::Maupg => "maupg",
            Algo::QlbEval => "qlb",
        }
    }

    /// Width of the scenario code fed to the networks.
    pub fn scenario_dim(self) -> usize {
        match self {
            Algo::Maupg => N_SCENARIOS,
            _ => 0,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "maddpg" => Ok(Algo::Maddpg),
            "maupg" => Ok(Algo::Maupg),
            "qlb" | "qlb-eval" => Ok(Algo::QlbEval),
            _ => Err(Error::Config(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Widths of the joint observation/action vectors and network inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JointLayout {
    pub n_agents: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub scenario_dim: usize,
}

impl JointLayout {
    pub fn new(sim: &SimConfig, algo: Algo) -> Self {
        Self {
            n_agents: N_GUARDS,
            obs_dim: sim.obs_dim(),
            act_dim: sim.action_dim(),
            scenario_dim: algo.scenario_dim(),
        }
    }

    pub fn actor_input(&self) -> usize {
        self.obs_dim + self.scenario_dim
    }

    pub fn critic_input(&self) -> usize {
        self.n_agents * (self.obs_dim + self.act_dim) + self.scenario_dim
    }

    /// Column range of agent `i`'s action inside a critic input row.
    pub fn action_columns(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.n_agents * self.obs_dim + i * self.act_dim;
        start..start + self.act_dim
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub sigma_start: f64,
    pub sigma_end: f64,
    /// Fraction of the run over which σ decays linearly.
    pub sigma_decay_fraction: f64,
    /// Update rounds per update event.
    pub updates_per_step: usize,
    /// Environment steps between update events.
    pub update_every: usize,
    pub warmup_episodes: usize,
    pub episodes: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Global gradient-norm cap per network; 0 disables.
    pub grad_clip: f64,
    /// Episodes between checkpoints; 0 saves only the final one.
    pub checkpoint_every: usize,
    /// Drop the distance band term from the reward.
    pub threat_only: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            tau: 0.01,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            batch_size: 256,
            buffer_capacity: 500_000,
            sigma_start: 0.3,
            sigma_end: 0.05,
            sigma_decay_fraction: 0.5,
            updates_per_step: 1,
            update_every: 4,
            warmup_episodes: 25,
            episodes: 8000,
            seed: 0,
            hidden: vec![64, 64],
            grad_clip: 0.5,
            checkpoint_every: 1000,
            threat_only: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("need 0 < batch_size <= buffer_capacity");
        }
        if !(self.sigma_start >= 0.0 && self.sigma_end >= 0.0) {
            return bad("noise scales must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.sigma_decay_fraction) {
            return bad("sigma_decay_fraction must lie in [0, 1]");
        }
        if self.update_every == 0 {
            return bad("update_every must be at least 1");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be non-empty and positive");
        }
        if !(self.grad_clip >= 0.0) {
            return bad("grad_clip must be non-negative");
        }
        Ok(())
    }
}
