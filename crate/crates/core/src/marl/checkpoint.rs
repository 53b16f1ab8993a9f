//! `.gmrl` checkpoint files.
//!
//! Little-endian layout: magic `GMRL`, format version (u32), algorithm tag
//! (u8), bit mask of training scenarios (u8), episode (u64), agent count
//! (u32); then per agent the actor, critic, target actor and target critic
//! (activation tag, widths, parameters) followed by the actor and critic
//! Adam states.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{AdamState, BinReader, BinWriter, Mlp};
use crate::scenario::ScenarioId;

use super::{AgentNets, Algo};

const MAGIC: &[u8; 4] = b"GMRL";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub algo: Algo,
    pub scenarios: Vec<ScenarioId>,
    pub episode: u64,
    pub agents: Vec<AgentNets>,
}

pub fn checkpoint_file_name(algo: Algo, episode: u64) -> String {
    format!("ckpt_{}_{episode}.gmrl", algo.name())
}

impl Checkpoint {
    pub fn scenario_mask(&self) -> u8 {
        self.scenarios.iter().fold(0, |m, s| m | (1 << s.index()))
    }

    pub fn trained_on(&self, id: ScenarioId) -> bool {
        self.scenarios.contains(&id)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BinWriter::new();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u8(self.algo.tag());
        w.u8(self.scenario_mask());
        w.u64(self.episode);
        w.u32(self.agents.len() as u32);
        for a in &self.agents {
            for net in [&a.actor, &a.critic, &a.target_actor, &a.target_critic] {
                net.write(&mut w);
            }
            a.actor_opt.write(&mut w);
            a.critic_opt.write(&mut w);
        }
        w.into_bytes()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = BinReader::new(data);
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let algo = Algo::from_tag(r.u8()?)?;
        let mask = r.u8()?;
        if mask == 0 || mask >> ScenarioId::ALL.len() != 0 {
            return Err(Error::Checkpoint(format!("bad scenario mask {mask:#x}")));
        }
        let scenarios = ScenarioId::ALL
            .into_iter()
            .filter(|s| mask & (1 << s.index()) != 0)
            .collect();
        let episode = r.u64()?;
        let n = r.u32()? as usize;
        if n > 64 {
            return Err(Error::Checkpoint(format!("implausible agent count {n}")));
        }
        let mut agents = Vec::with_capacity(n);
        for _ in 0..n {
            let actor = Mlp::read(&mut r)?;
            let critic = Mlp::read(&mut r)?;
            let target_actor = Mlp::read(&mut r)?;
            let target_critic = Mlp::read(&mut r)?;
            let actor_opt = AdamState::read(&mut r)?;
            let critic_opt = AdamState::read(&mut r)?;
            if actor_opt.m.len() != actor.params.len()
                || critic_opt.m.len() != critic.params.len()
                || target_actor.spec() != actor.spec()
                || target_critic.spec() != critic.spec()
            {
                return Err(Error::Checkpoint("inconsistent agent shapes".into()));
            }
            agents.push(AgentNets {
                actor,
                critic,
                target_actor,
                target_critic,
                actor_opt,
                critic_opt,
            });
        }
        if !r.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self {
            algo,
            scenarios,
            episode,
            agents,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read(path)?;
        Self::from_bytes(&data).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
