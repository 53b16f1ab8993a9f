//! Episode loop, exploration schedule, metrics and checkpoint emission.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::env::Env;
use crate::error::{Error, Result};
use crate::nn::ForwardCache;
use crate::qlb::qlb_joint_action;
use crate::rng::{ids, stream};
use crate::scenario::{scenario_one_hot, ScenarioId};
use crate::sim::N_GUARDS;

use super::{
    checkpoint_file_name, select_action, update_round, AgentNets, Algo, Batch, Checkpoint, JointLayout, ReplayBuffer,
    TrainConfig, Transition, UpdateScratch,
};

pub const METRICS_HEADER: &str =
    "episode,scenario,crt,avg_residual_threat,actor_loss_mean,critic_loss_mean,noise_sigma,wall_ms";

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub scenario: ScenarioId,
    pub crt: f64,
    pub avg_residual_threat: f64,
    /// Mean of `−Q` over the episode's actor steps; NaN without updates.
    pub actor_loss_mean: f64,
    pub critic_loss_mean: f64,
    pub noise_sigma: f64,
    pub wall_ms: f64,
}

impl EpisodeMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.3}",
            self.episode,
            self.scenario.letter(),
            crate::report::fmt_real(self.crt),
            crate::report::fmt_real(self.avg_residual_threat),
            crate::report::fmt_real(self.actor_loss_mean),
            crate::report::fmt_real(self.critic_loss_mean),
            crate::report::fmt_real(self.noise_sigma),
            self.wall_ms
        )
    }
}

/// Linear decay from `sigma_start` to `sigma_end` over the first
/// `sigma_decay_fraction` of the run, constant afterwards.
pub fn noise_sigma(episode: usize, total: usize, cfg: &TrainConfig) -> f64 {
    let span = cfg.sigma_decay_fraction * total as f64;
    let frac = if span <= 0.0 {
        1.0
    } else {
        (episode as f64 / span).min(1.0)
    };
    cfg.sigma_start + (cfg.sigma_end - cfg.sigma_start) * frac
}

/// Environment seed of training episode `episode`. The top bit keeps these
/// apart from the small seeds used for evaluation.
pub fn training_seed(run_seed: u64, episode: usize) -> u64 {
    (1 << 63) | run_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(24) ^ episode as u64
}

/// Uniform per-episode draw from the training scenario set.
#[derive(Clone, Debug)]
pub struct ScenarioSampler {
    set: Vec<ScenarioId>,
    rng: ChaCha8Rng,
}

impl ScenarioSampler {
    pub fn new(set: Vec<ScenarioId>, seed: u64) -> Self {
        Self {
            set,
            rng: stream(seed, ids::SCENARIO_DRAW),
        }
    }

    pub fn next_scenario(&mut self) -> ScenarioId {
        self.set[self.rng.gen_range(0..self.set.len())]
    }
}

pub struct Trainer {
    algo: Algo,
    scenarios: Vec<ScenarioId>,
    cfg: Config,
    layout: JointLayout,
    agents: Vec<AgentNets>,
    buffer: ReplayBuffer,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    sampler: ScenarioSampler,
    scratch: UpdateScratch,
    batch: Batch,
    episode: usize,
    env_steps: u64,
}

impl Trainer {
    pub fn new(algo: Algo, scenarios: &[ScenarioId], cfg: Config) -> Result<Self> {
        cfg.validate()?;
        let mut set = scenarios.to_vec();
        set.sort_by_key(|s| s.index());
        set.dedup();
        if set.len() != scenarios.len() {
            return Err(Error::Config("duplicate scenario in training set".into()));
        }
        match algo {
            Algo::Maddpg if set.len() != 1 => {
                return Err(Error::Config(format!(
                    "maddpg trains on exactly one scenario, got {}",
                    set.len()
                )))
            }
            _ if set.is_empty() => return Err(Error::Config("empty scenario set".into())),
            _ => {}
        }
        let tc = &cfg.train;
        let layout = JointLayout::new(&cfg.sim, algo);
        let mut init = stream(tc.seed, ids::INIT);
        let agents = if algo == Algo::QlbEval {
            Vec::new()
        } else {
            (0..N_GUARDS)
                .map(|_| AgentNets::new(&layout, &tc.hidden, tc.actor_lr, tc.critic_lr, &mut init))
                .collect::<Result<_>>()?
        };
        Ok(Self {
            algo,
            buffer: ReplayBuffer::new(&layout, tc.buffer_capacity),
            explore_rng: stream(tc.seed, ids::EXPLORATION),
            replay_rng: stream(tc.seed, ids::REPLAY),
            sampler: ScenarioSampler::new(set.clone(), tc.seed),
            scenarios: set,
            layout,
            agents,
            scratch: UpdateScratch::default(),
            batch: Batch::default(),
            episode: 0,
            env_steps: 0,
            cfg,
        })
    }

    pub fn algo(&self) -> Algo {
        self.algo
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn agents(&self) -> &[AgentNets] {
        &self.agents
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            algo: self.algo,
            scenarios: self.scenarios.clone(),
            episode: self.episode as u64,
            agents: self.agents.clone(),
        }
    }

    /// Runs one full episode, learning from it when past warmup.
    pub fn run_episode(&mut self) -> Result<EpisodeMetrics> {
        let started = Instant::now();
        let episode = self.episode;
        let scenario = self.sampler.next_scenario();
        let seed = training_seed(self.cfg.train.seed, episode);
        let out = self.play(scenario, seed).map_err(|e| match e {
            Error::Divergence(m) => {
                Error::Divergence(format!("episode {episode}, scenario {}: {m}", scenario.letter()))
            }
            Error::NonFinite(what) => Error::Divergence(format!(
                "episode {episode}, scenario {}: non-finite value in {what}",
                scenario.letter()
            )),
            other => other,
        })?;
        self.episode += 1;
        Ok(EpisodeMetrics {
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            ..out
        })
    }

    fn play(&mut self, scenario: ScenarioId, seed: u64) -> Result<EpisodeMetrics> {
        let Trainer {
            algo,
            cfg,
            layout,
            agents,
            buffer,
            explore_rng,
            replay_rng,
            scratch,
            batch,
            episode,
            env_steps,
            ..
        } = self;
        let tc = &cfg.train;
        let sigma = noise_sigma(*episode, tc.episodes, tc);
        let learning = *algo != Algo::QlbEval && *episode >= tc.warmup_episodes;
        let code = scenario_one_hot(scenario);
        let g = &code[..layout.scenario_dim];
        let od = layout.obs_dim;

        let mut env = Env::new(scenario, seed, cfg)?;
        let mut obs = vec![0.0; N_GUARDS * od];
        let mut next_obs = obs.clone();
        let mut action = Vec::with_capacity(N_GUARDS * layout.act_dim);
        let mut cache = ForwardCache::default();
        let (mut actor_sum, mut critic_sum, mut rounds) = (0.0, 0.0, 0usize);

        env.observe_all(&mut obs)?;
        while !env.done() {
            if *algo == Algo::QlbEval {
                action = qlb_joint_action(env.world(), &cfg.threat, &cfg.qlb, &cfg.sim);
                env.step(&action)?;
                continue;
            }
            action.clear();
            for (agent, o) in agents.iter().zip(obs.chunks_exact(od)) {
                action.extend(select_action(&agent.actor, o, g, sigma, explore_rng, &mut cache)?);
            }
            let step = env.step(&action)?;
            env.observe_all(&mut next_obs)?;
            buffer.push(&Transition {
                obs: obs.clone(),
                actions: action.clone(),
                rewards: step.rewards,
                next_obs: next_obs.clone(),
                scenario: code,
                done: step.done,
            })?;
            std::mem::swap(&mut obs, &mut next_obs);
            *env_steps += 1;
            if learning && *env_steps % tc.update_every as u64 == 0 && buffer.len() >= tc.batch_size {
                for _ in 0..tc.updates_per_step {
                    let idx = buffer.sample_indices(tc.batch_size, replay_rng)?;
                    buffer.gather(&idx, batch);
                    let (obj, loss) = update_round(agents, batch, layout, tc, scratch)?;
                    actor_sum -= obj;
                    critic_sum += loss;
                    rounds += 1;
                }
            }
        }
        let mean = |s: f64| if rounds == 0 { f64::NAN } else { s / rounds as f64 };
        Ok(EpisodeMetrics {
            episode: *episode,
            scenario,
            crt: env.crt(),
            avg_residual_threat: env.avg_residual_threat(),
            actor_loss_mean: mean(actor_sum),
            critic_loss_mean: mean(critic_sum),
            noise_sigma: if *algo == Algo::QlbEval { 0.0 } else { sigma },
            wall_ms: 0.0,
        })
    }
}

/// Trains for `cfg.train.episodes` episodes, streaming one CSV row per
/// episode to `metrics` and writing checkpoints into `out_dir` when given.
/// Returns the trainer and the paths of the checkpoints written.
pub fn train_run(
    algo: Algo,
    scenarios: &[ScenarioId],
    cfg: &Config,
    out_dir: Option<&Path>,
    metrics: &mut dyn Write,
) -> Result<(Trainer, Vec<PathBuf>)> {
    let mut trainer = Trainer::new(algo, scenarios, cfg.clone())?;
    let total = cfg.train.episodes;
    let every = cfg.train.checkpoint_every;
    let mut saved = Vec::new();
    writeln!(metrics, "{METRICS_HEADER}")?;
    for _ in 0..total {
        let m = trainer.run_episode()?;
        writeln!(metrics, "{}", m.csv_row())?;
        let done = trainer.episode();
        if done % 100 == 0 || done == total {
            log::info!(
                "{algo} episode {done}/{total}: scenario {} avg threat {:.4}, critic loss {:.4}",
                m.scenario.letter(),
                m.avg_residual_threat,
                m.critic_loss_mean
            );
        }
        let due = (every > 0 && done % every == 0) || done == total;
        if let (Some(dir), true, false) = (out_dir, due, algo == Algo::QlbEval) {
            let path = dir.join(checkpoint_file_name(algo, done as u64));
            trainer.checkpoint().save(&path)?;
            saved.push(path);
        }
    }
    metrics.flush()?;
    Ok((trainer, saved))
}
