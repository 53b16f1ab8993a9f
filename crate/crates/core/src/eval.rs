//! Evaluation protocol: noise-free episodes on consecutive seeds, the
//! cross-scenario matrix and the method comparison table.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::env::Env;
use crate::error::{Error, Result};
use crate::marl::Checkpoint;
use crate::policy::{ActorPolicy, NoopPolicy, QlbPolicy, TeamPolicy};
use crate::report::{csv_rows, fmt_real, parse_real};
use crate::scenario::{ScenarioId, N_SCENARIOS};
use crate::traj::record_line;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scenario: ScenarioId,
    pub seed: u64,
    pub crt: f64,
    pub avg_residual_threat: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub policy: String,
    pub scenario: ScenarioId,
    pub episodes: usize,
    pub seed: u64,
    pub mean_avg_residual_threat: f64,
    pub std_avg_residual_threat: f64,
    pub mean_crt: f64,
    pub std_crt: f64,
    pub results: Vec<EpisodeResult>,
}

pub const EVAL_HEADER: &str = "policy,scenario,seed,crt,avg_residual_threat,steps";

impl EvalSummary {
    /// One row per episode.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{EVAL_HEADER}\n");
        for r in &self.results {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.policy,
                r.scenario,
                r.seed,
                fmt_real(r.crt),
                fmt_real(r.avg_residual_threat),
                r.steps
            ));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses the per-episode CSV written by [`EvalSummary::to_csv`].
pub fn parse_eval_csv(text: &str) -> Result<Vec<EpisodeResult>> {
    csv_rows(text, EVAL_HEADER)?
        .into_iter()
        .map(|f| {
            Ok(EpisodeResult {
                scenario: f[1].parse()?,
                seed: f[2].parse().map_err(|_| Error::Log(format!("bad seed `{}`", f[2])))?,
                crt: parse_real(f[3])?,
                avg_residual_threat: parse_real(f[4])?,
                steps: f[5].parse().map_err(|_| Error::Log(format!("bad steps `{}`", f[5])))?,
            })
        })
        .collect()
}

/// Where an evaluated team comes from.
#[derive(Clone, Debug)]
pub enum PolicySource {
    Checkpoint(Box<Checkpoint>),
    Qlb,
    Noop,
}

impl PolicySource {
    pub fn build(&self) -> Result<Box<dyn TeamPolicy>> {
        Ok(match self {
            PolicySource::Checkpoint(c) => Box::new(ActorPolicy::from_checkpoint(c)?),
            PolicySource::Qlb => Box::new(QlbPolicy),
            PolicySource::Noop => Box::new(NoopPolicy),
        })
    }
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Plays one full episode; with `log`, one JSON line per step is written.
pub fn run_episode(
    policy: &mut dyn TeamPolicy,
    scenario: ScenarioId,
    seed: u64,
    cfg: &Config,
    log: Option<&mut dyn Write>,
) -> Result<EpisodeResult> {
    let mut log = log;
    let mut env = Env::new(scenario, seed, cfg)?;
    policy.begin_episode(scenario);
    let mut action = Vec::new();
    while !env.done() {
        policy.act(&env, &mut action)?;
        if let Some(w) = log.as_mut() {
            writeln!(w, "{}", record_line(&env, seed, &action))?;
        }
        env.step(&action)?;
    }
    Ok(EpisodeResult {
        scenario,
        seed,
        crt: env.crt(),
        avg_residual_threat: env.avg_residual_threat(),
        steps: env.world().t,
    })
}

/// `episodes` noise-free episodes on seeds `seed, seed + 1, …`.
pub fn evaluate(
    source: &PolicySource,
    scenario: ScenarioId,
    episodes: usize,
    seed: u64,
    cfg: &Config,
    mut log: Option<&mut dyn Write>,
) -> Result<EvalSummary> {
    if episodes == 0 {
        return Err(Error::Config("episodes must be at least 1".into()));
    }
    if let PolicySource::Checkpoint(c) = source {
        if !c.trained_on(scenario) {
            log::warn!(
                "evaluating a {} checkpoint trained on {:?} on scenario {scenario}",
                c.algo,
                c.scenarios
            );
        }
    }
    let mut policy = source.build()?;
    let mut results = Vec::with_capacity(episodes);
    for k in 0..episodes as u64 {
        let sink: Option<&mut dyn Write> = match log.as_mut() {
            Some(w) => Some(&mut **w),
            None => None,
        };
        results.push(run_episode(policy.as_mut(), scenario, seed + k, cfg, sink)?);
    }
    let (mean_a, std_a) = mean_std(&results.iter().map(|r| r.avg_residual_threat).collect::<Vec<_>>());
    let (mean_c, std_c) = mean_std(&results.iter().map(|r| r.crt).collect::<Vec<_>>());
    Ok(EvalSummary {
        policy: policy.name(),
        scenario,
        episodes,
        seed,
        mean_avg_residual_threat: mean_a,
        std_avg_residual_threat: std_a,
        mean_crt: mean_c,
        std_crt: std_c,
        results,
    })
}

/// Rows are training scenarios, columns test scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMatrix {
    pub mean: [[f64; N_SCENARIOS]; N_SCENARIOS],
    pub std: [[f64; N_SCENARIOS]; N_SCENARIOS],
    pub episodes: usize,
}

pub const MATRIX_HEADER: &str = "train,test,episodes,mean_avg_residual_threat,std_avg_residual_threat";

impl EvalMatrix {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{MATRIX_HEADER}\n");
        for r in ScenarioId::ALL {
            for c in ScenarioId::ALL {
                s.push_str(&format!(
                    "{r},{c},{},{},{}\n",
                    self.episodes,
                    fmt_real(self.mean[r.index()][c.index()]),
                    fmt_real(self.std[r.index()][c.index()])
                ));
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = csv_rows(text, MATRIX_HEADER)?;
        if rows.len() != N_SCENARIOS * N_SCENARIOS {
            return Err(Error::Log(format!("matrix CSV has {} rows", rows.len())));
        }
        let mut m = EvalMatrix {
            mean: [[f64::NAN; N_SCENARIOS]; N_SCENARIOS],
            std: [[f64::NAN; N_SCENARIOS]; N_SCENARIOS],
            episodes: 0,
        };
        for f in rows {
            let r: ScenarioId = f[0].parse()?;
            let c: ScenarioId = f[1].parse()?;
            m.episodes = f[2].parse().map_err(|_| Error::Log(format!("bad count `{}`", f[2])))?;
            m.mean[r.index()][c.index()] = parse_real(f[3])?;
            m.std[r.index()][c.index()] = parse_real(f[4])?;
        }
        Ok(m)
    }

    /// Rows whose diagonal cell is the strict row minimum.
    pub fn diagonal_minimum_rows(&self) -> usize {
        (0..N_SCENARIOS)
            .filter(|&r| (0..N_SCENARIOS).all(|c| c == r || self.mean[r][r] < self.mean[r][c]))
            .count()
    }
}

/// Evaluates each of the four per-scenario policies on all four scenarios.
pub fn confusion_matrix(
    sources: &[PolicySource; N_SCENARIOS],
    episodes: usize,
    seed: u64,
    cfg: &Config,
) -> Result<EvalMatrix> {
    let mut m = EvalMatrix {
        mean: [[0.0; N_SCENARIOS]; N_SCENARIOS],
        std: [[0.0; N_SCENARIOS]; N_SCENARIOS],
        episodes,
    };
    for (r, src) in sources.iter().enumerate() {
        for c in ScenarioId::ALL {
            let s = evaluate(src, c, episodes, seed, cfg, None)?;
            m.mean[r][c.index()] = s.mean_avg_residual_threat;
            m.std[r][c.index()] = s.std_avg_residual_threat;
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub scenario: ScenarioId,
    pub method: String,
    pub mean: f64,
    pub std: f64,
    pub episodes: usize,
}

pub const COMPARE_HEADER: &str = "scenario,method,episodes,mean_avg_residual_threat,std_avg_residual_threat";

pub fn compare_to_csv(rows: &[CompareRow]) -> String {
    let mut s = format!("{COMPARE_HEADER}\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scenario,
            r.method,
            r.episodes,
            fmt_real(r.mean),
            fmt_real(r.std)
        ));
    }
    s
}

pub fn parse_compare_csv(text: &str) -> Result<Vec<CompareRow>> {
    csv_rows(text, COMPARE_HEADER)?
        .into_iter()
        .map(|f| {
            Ok(CompareRow {
                scenario: f[0].parse()?,
                method: f[1].to_string(),
                episodes: f[2].parse().map_err(|_| Error::Log(format!("bad count `{}`", f[2])))?,
                mean: parse_real(f[3])?,
                std: parse_real(f[4])?,
            })
        })
        .collect()
}

/// Per scenario: the scenario-conditioned policy, the policy trained on that
/// scenario alone, and the formation controller.
pub fn compare(
    maupg: &PolicySource,
    maddpg: &[PolicySource; N_SCENARIOS],
    episodes: usize,
    seed: u64,
    cfg: &Config,
) -> Result<Vec<CompareRow>> {
    let mut rows = Vec::with_capacity(3 * N_SCENARIOS);
    for s in ScenarioId::ALL {
        for (method, src) in [
            ("maupg", maupg),
            ("maddpg", &maddpg[s.index()]),
            ("qlb", &PolicySource::Qlb),
        ] {
            let e = evaluate(src, s, episodes, seed, cfg, None)?;
            rows.push(CompareRow {
                scenario: s,
                method: method.into(),
                mean: e.mean_avg_residual_threat,
                std: e.std_avg_residual_threat,
                episodes,
            });
        }
    }
    Ok(rows)
}
