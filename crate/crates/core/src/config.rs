//! Run configuration: one TOML document with `[sim]`, `[threat]`, `[qlb]`,
//! `[reward.<id>]`, `[scenario.<id>]` and `[train]` sections.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::marl::TrainConfig;
use crate::qlb::QlbParams;
use crate::reward::RewardParams;
use crate::scenario::{ScenarioId, ScenarioParams};
use crate::sim::SimConfig;
use crate::threat::ThreatParams;

/// One value per scenario, serialized under the keys `A`..`D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerScenario<T> {
    #[serde(rename = "A")]
    pub a: T,
    #[serde(rename = "B")]
    pub b: T,
    #[serde(rename = "C")]
    pub c: T,
    #[serde(rename = "D")]
    pub d: T,
}

impl<T> PerScenario<T> {
    pub fn get(&self, id: ScenarioId) -> &T {
        match id {
            ScenarioId::RandomLandmark => &self.a,
            ScenarioId::ShoppingMall => &self.b,
            ScenarioId::Street => &self.c,
            ScenarioId::PieInTheFace => &self.d,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub sim: SimConfig,
    pub threat: ThreatParams,
    pub qlb: QlbParams,
    pub reward: PerScenario<RewardParams>,
    pub scenario: ScenarioParams,
    pub train: TrainConfig,
}

impl Default for PerScenario<RewardParams> {
    fn default() -> Self {
        let r = |beta, m| RewardParams {
            alpha: 1.0,
            beta,
            m,
            d: 0.6,
        };
        Self {
            a: r(0.5, 0.15),
            b: r(0.5, 0.15),
            c: r(0.3, 0.15),
            d: r(0.7, 0.1),
        }
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.threat.validate()?;
        for id in ScenarioId::ALL {
            self.reward.get(id).validate()?;
        }
        self.qlb.validate()?;
        self.scenario.validate()?;
        self.train.validate()?;
        Ok(())
    }
}
