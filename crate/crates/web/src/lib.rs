//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The page plays one episode of a scenario under the formation controller
//! or an idle team, shades the threat field around the VIP at any frame, and
//! redraws the threat decay curve while its parameters are dragged.

use guardian_core::env::Env;
use guardian_core::geom::Vec2;
use guardian_core::policy::{NoopPolicy, QlbPolicy, TeamPolicy};
use guardian_core::sim::{EntityState, WorldState};
use guardian_core::threat::{base_threat, instantaneous_threat, residual_threat, ThreatParams};
use guardian_core::{Config, ScenarioId};
use wasm_bindgen::prelude::*;

/// One simulated episode, kept frame by frame for playback.
#[wasm_bindgen]
pub struct Episode {
    frames: Vec<WorldState>,
    threat: Vec<f64>,
    params: ThreatParams,
    arena_half: f64,
    crt: f64,
    avg: f64,
}

/// Runs a whole episode natively; `policy` is `qlb` or `noop`.
pub fn simulate(
    scenario: &str,
    policy: &str,
    seed: u64,
    kappa: f64,
    d_safe: f64,
    bystanders: usize,
) -> Result<Episode, String> {
    let id: ScenarioId = scenario.parse().map_err(|e| format!("{e}"))?;
    let mut team: Box<dyn TeamPolicy> = match policy {
        "qlb" => Box::new(QlbPolicy),
        "noop" => Box::new(NoopPolicy),
        other => return Err(format!("unknown policy `{other}`")),
    };
    let mut cfg = Config::default();
    cfg.threat.kappa = kappa;
    cfg.threat.d_safe = d_safe;
    cfg.sim.bystanders = bystanders;
    cfg.validate().map_err(|e| e.to_string())?;

    let mut env = Env::new(id, seed, &cfg).map_err(|e| e.to_string())?;
    team.begin_episode(id);
    let mut frames = vec![env.world().clone()];
    let mut action = Vec::new();
    while !env.done() {
        team.act(&env, &mut action).map_err(|e| e.to_string())?;
        env.step(&action).map_err(|e| e.to_string())?;
        frames.push(env.world().clone());
    }
    let threat = frames
        .iter()
        .map(|w| instantaneous_threat(w, &cfg.threat).combined)
        .collect();
    Ok(Episode {
        frames,
        threat,
        params: cfg.threat,
        arena_half: cfg.sim.arena_half,
        crt: env.crt(),
        avg: env.avg_residual_threat(),
    })
}

/// Plays an episode for the page.
#[wasm_bindgen]
pub fn play(
    scenario: &str,
    policy: &str,
    seed: u32,
    kappa: f64,
    d_safe: f64,
    bystanders: usize,
) -> Result<Episode, JsError> {
    simulate(scenario, policy, seed.into(), kappa, d_safe, bystanders).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
impl Episode {
    /// Number of frames, the initial state included.
    pub fn frames(&self) -> usize {
        self.frames.len()
    }

    pub fn guards(&self) -> usize {
        self.frames[0].guards.len()
    }

    pub fn bystanders(&self) -> usize {
        self.frames[0].bystanders.len()
    }

    pub fn arena_half(&self) -> f64 {
        self.arena_half
    }

    pub fn crt(&self) -> f64 {
        self.crt
    }

    pub fn avg_residual_threat(&self) -> f64 {
        self.avg
    }

    /// Flat `x, y` pairs: VIP, then guards, then bystanders.
    pub fn positions(&self, frame: usize) -> Vec<f64> {
        let w = self.frame(frame);
        std::iter::once(&w.vip)
            .chain(&w.guards)
            .chain(&w.bystanders)
            .flat_map(|e| [e.pos.x, e.pos.y])
            .collect()
    }

    /// Residual threat of each bystander at `frame`.
    pub fn residuals(&self, frame: usize) -> Vec<f64> {
        instantaneous_threat(self.frame(frame), &self.params).per_bystander_rt
    }

    /// Combined threat of every frame.
    pub fn threat_trace(&self) -> Vec<f64> {
        self.threat.clone()
    }

    /// Threat a bystander standing at each cell of a `resolution²` grid
    /// would pose, given the guards at `frame`. Row 0 is the top edge.
    pub fn threat_field(&self, frame: usize, resolution: usize) -> Vec<f64> {
        let w = self.frame(frame);
        let guards = w.guard_positions();
        let h = self.arena_half;
        let cell = 2.0 * h / resolution as f64;
        let mut out = Vec::with_capacity(resolution * resolution);
        for row in 0..resolution {
            let y = h - (row as f64 + 0.5) * cell;
            for col in 0..resolution {
                let x = -h + (col as f64 + 0.5) * cell;
                let probe = EntityState::at(Vec2::new(x, y));
                out.push(residual_threat(&w.vip, &probe, &guards, &self.params));
            }
        }
        out
    }
}

impl Episode {
    fn frame(&self, frame: usize) -> &WorldState {
        &self.frames[frame.min(self.frames.len() - 1)]
    }
}

/// Base threat sampled at `samples` evenly spaced distances in `[0, max_distance]`.
#[wasm_bindgen]
pub fn decay_curve(kappa: f64, d_safe: f64, samples: usize, max_distance: f64) -> Vec<f64> {
    let p = ThreatParams {
        kappa,
        d_safe,
        ..ThreatParams::default()
    };
    let last = samples.saturating_sub(1).max(1) as f64;
    (0..samples)
        .map(|k| base_threat(max_distance * k as f64 / last, &p))
        .collect()
}
