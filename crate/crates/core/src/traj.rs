//! JSON-lines trajectory logs: one object per step, fields in a fixed order.

use std::fmt::Write as _;
use std::io::BufRead;

use serde::Deserialize;

use crate::env::Env;
use crate::error::{Error, Result};
use crate::report::fmt_real;
use crate::scenario::ScenarioId;
use crate::sim::EntityState;

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct EntityRecord {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
}

/// State at the start of step `t`, the joint action applied and the threat
/// of that state.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub scenario: ScenarioId,
    pub seed: u64,
    pub vip: EntityRecord,
    pub guards: Vec<EntityRecord>,
    pub bystanders: Vec<EntityRecord>,
    pub actions: Vec<Vec<f64>>,
    pub per_bystander_rt: Vec<f64>,
    pub instantaneous_threat: f64,
}

fn push_array(out: &mut String, xs: &[f64]) {
    out.push('[');
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_real(*x));
    }
    out.push(']');
}

fn push_entity(out: &mut String, e: &EntityState) {
    out.push_str("{\"pos\":");
    push_array(out, &e.pos.to_array());
    out.push_str(",\"vel\":");
    push_array(out, &e.vel.to_array());
    out.push('}');
}

fn push_entities(out: &mut String, es: &[EntityState]) {
    out.push('[');
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_entity(out, e);
    }
    out.push(']');
}

/// One log line (without the newline) for the env's current state.
pub fn record_line(env: &Env<'_>, seed: u64, joint_action: &[f64]) -> String {
    let w = env.world();
    let ad = env.config().sim.action_dim();
    let mut s = String::with_capacity(4096);
    let _ = write!(
        s,
        "{{\"t\":{},\"scenario\":\"{}\",\"seed\":{},\"vip\":",
        w.t, w.scenario, seed
    );
    push_entity(&mut s, &w.vip);
    s.push_str(",\"guards\":");
    push_entities(&mut s, &w.guards);
    s.push_str(",\"bystanders\":");
    push_entities(&mut s, &w.bystanders);
    s.push_str(",\"actions\":[");
    for (i, a) in joint_action.chunks(ad).enumerate() {
        if i > 0 {
            s.push(',');
        }
        push_array(&mut s, a);
    }
    s.push_str("],\"per_bystander_rt\":");
    push_array(&mut s, &env.threat().per_bystander_rt);
    s.push_str(",\"instantaneous_threat\":");
    s.push_str(&fmt_real(env.threat().combined));
    s.push('}');
    s
}

pub fn read_log<R: BufRead>(reader: R) -> Result<Vec<TrajectoryRecord>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrajectoryRecord =
            serde_json::from_str(&line).map_err(|e| Error::Log(format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// One logged episode recovered from a log.
#[derive(Clone, Debug, PartialEq)]
pub struct LoggedEpisode {
    pub scenario: ScenarioId,
    pub seed: u64,
    pub steps: usize,
    pub crt: f64,
}

/// Splits records into episodes (a new one starts at `t = 0`) and integrates
/// the combined threat over each, left-Riemann with step `dt`.
pub fn episodes_from_log(records: &[TrajectoryRecord], dt: f64) -> Result<Vec<LoggedEpisode>> {
    let mut out: Vec<LoggedEpisode> = Vec::new();
    for r in records {
        let fresh = r.t == 0;
        match out.last_mut() {
            Some(ep) if !fresh => {
                if ep.seed != r.seed || ep.scenario != r.scenario || r.t != ep.steps {
                    return Err(Error::Log(format!(
                        "record t = {} does not continue episode seed {}",
                        r.t, ep.seed
                    )));
                }
                ep.crt += r.instantaneous_threat * dt;
                ep.steps += 1;
            }
            _ if fresh => out.push(LoggedEpisode {
                scenario: r.scenario,
                seed: r.seed,
                steps: 1,
                crt: r.instantaneous_threat * dt,
            }),
            _ => return Err(Error::Log(format!("log starts mid-episode at t = {}", r.t))),
        }
    }
    Ok(out)
}
