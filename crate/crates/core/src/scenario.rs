//! The four protection scenarios: landmark layouts, scripted bystander
//! behaviours, the VIP controller and the scenario one-hot code.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::reward::RewardParams;
use crate::rng::{ids, stream};
use crate::sim::{EntityClass, EntityState, SimConfig, WorldState, N_GUARDS};

pub const N_SCENARIOS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    #[serde(rename = "A", alias = "random_landmark")]
    RandomLandmark,
    #[serde(rename = "B", alias = "shopping_mall")]
    ShoppingMall,
    #[serde(rename = "C", alias = "street")]
    Street,
    #[serde(rename = "D", alias = "pie_in_the_face")]
    PieInTheFace,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; N_SCENARIOS] = [
        ScenarioId::RandomLandmark,
        ScenarioId::ShoppingMall,
        ScenarioId::Street,
        ScenarioId::PieInTheFace,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::RandomLandmark => "random_landmark",
            ScenarioId::ShoppingMall => "shopping_mall",
            ScenarioId::Street => "street",
            ScenarioId::PieInTheFace => "pie_in_the_face",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    /// Accepts the letter (`A`–`D`, any case) or the snake/kebab-case name.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace('-', "_");
        ScenarioId::ALL
            .into_iter()
            .find(|id| t == id.name() || t == id.letter().to_ascii_lowercase().to_string())
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Parses a comma-separated scenario list such as `A,B,C,D`.
pub fn parse_scenario_list(s: &str) -> Result<Vec<ScenarioId>> {
    let mut out: Vec<ScenarioId> = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let id: ScenarioId = part.parse()?;
        if out.contains(&id) {
            return Err(Error::Config(format!("scenario {id} listed twice")));
        }
        out.push(id);
    }
    if out.is_empty() {
        return Err(Error::Config("empty scenario list".into()));
    }
    Ok(out)
}

/// Fixed order A, B, C, D.
pub fn scenario_one_hot(id: ScenarioId) -> [f64; N_SCENARIOS] {
    let mut g = [0.0; N_SCENARIOS];
    g[id.index()] = 1.0;
    g
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomLandmarkParams {
    pub landmarks: usize,
    /// Landmarks are drawn uniformly in `[-spread·a, spread·a]²`.
    pub spread: f64,
    pub arrival_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShoppingMallParams {
    pub shops: usize,
    pub dwell_steps: u32,
    pub arrival_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreetParams {
    /// Alignment radius.
    pub neighbor_radius: f64,
    /// Heading noise amplitude η: uniform in `[-η/2, η/2]` radians.
    pub noise: f64,
    pub speed: f64,
    pub waypoint_weight: f64,
    /// Bystanders walk inside `|y| ≤ half_width`.
    pub half_width: f64,
    /// How far outside the arena exit waypoints sit.
    pub waypoint_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieInTheFaceParams {
    pub rope_y: f64,
    /// Line-holders stand between `rope_y + 0.05` and `rope_y + 0.05 + line_depth`.
    pub line_depth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VipParams {
    pub personal_space: f64,
    /// Look-ahead point is `pos + vel·dt·look_ahead`.
    pub look_ahead: f64,
    pub arrival_radius: f64,
    /// Inside this distance of the destination the pull shrinks linearly.
    pub slow_radius: f64,
    /// Straight-line paths run from `-path_fraction·a` to `+path_fraction·a`.
    pub path_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    #[serde(rename = "A")]
    pub random_landmark: RandomLandmarkParams,
    #[serde(rename = "B")]
    pub shopping_mall: ShoppingMallParams,
    #[serde(rename = "C")]
    pub street: StreetParams,
    #[serde(rename = "D")]
    pub pie_in_the_face: PieInTheFaceParams,
    pub vip: VipParams,
    /// Radius of the starting guard ring around the VIP.
    pub guard_ring: f64,
    /// Bystanders never start closer than this to the VIP.
    pub start_clearance: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            random_landmark: RandomLandmarkParams {
                landmarks: 8,
                spread: 0.7,
                arrival_radius: 0.05,
            },
            shopping_mall: ShoppingMallParams {
                shops: 8,
                dwell_steps: 15,
                arrival_radius: 0.05,
            },
            street: StreetParams {
                neighbor_radius: 0.4,
                noise: 0.4,
                speed: 1.0,
                waypoint_weight: 0.3,
                half_width: 0.8,
                waypoint_offset: 1.0,
            },
            pie_in_the_face: PieInTheFaceParams {
                rope_y: 0.3,
                line_depth: 0.2,
            },
            vip: VipParams {
                personal_space: 0.2,
                look_ahead: 3.0,
                arrival_radius: 0.05,
                slow_radius: 0.5,
                path_fraction: 0.7,
            },
            guard_ring: 0.3,
            start_clearance: 0.3,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("scenario: {m}")));
        if self.random_landmark.landmarks < 2 {
            return bad("A needs at least two landmarks");
        }
        if self.shopping_mall.shops < 2 {
            return bad("B needs at least two shops");
        }
        if !(0.0..=1.0).contains(&self.street.waypoint_weight) {
            return bad("C waypoint_weight must lie in [0, 1]");
        }
        if self.street.waypoint_offset <= 0.0 {
            return bad("C waypoints must lie outside the arena");
        }
        if self.vip.personal_space < 0.0 || self.vip.arrival_radius <= 0.0 || self.vip.slow_radius < 0.0 {
            return bad("VIP radii must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Waypoint,
    Shopper,
    Street,
    Unruly,
    LineHolder,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BystanderIntent {
    pub behavior: Behavior,
    /// Current target: landmark, shop, exit point or line anchor.
    pub waypoint: Vec2,
    /// Index of the current shop (shoppers only).
    pub shop: usize,
    /// Remaining dwell steps (shoppers only).
    pub dwell: u32,
    /// Walking direction, radians (street walkers only).
    pub heading: f64,
}

impl BystanderIntent {
    fn new(behavior: Behavior, waypoint: Vec2) -> Self {
        Self {
            behavior,
            waypoint,
            shop: 0,
            dwell: 0,
            heading: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub landmarks: Vec<Vec2>,
    pub behaviors: Vec<Behavior>,
    pub vip_start: Vec2,
    pub vip_destination: Vec2,
    pub reward: RewardParams,
}

impl ScenarioSpec {
    pub fn count(&self, b: Behavior) -> usize {
        self.behaviors.iter().filter(|&&x| x == b).count()
    }
}

/// Random-waypoint walker: head for the current landmark; on arrival pick a
/// new one uniformly.
pub fn bystander_waypoint_policy(
    b: &EntityState,
    intent: &BystanderIntent,
    landmarks: &[Vec2],
    arrival_radius: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec2, BystanderIntent) {
    let mut next = intent.clone();
    if b.pos.distance(next.waypoint) <= arrival_radius && !landmarks.is_empty() {
        next.waypoint = landmarks[rng.gen_range(0..landmarks.len())];
    }
    ((next.waypoint - b.pos).normalized_or_zero(), next)
}

/// Shopper: walk to the current shop, dwell there, then move on to a
/// different shop.
pub fn bystander_shopping_policy(
    b: &EntityState,
    intent: &BystanderIntent,
    shops: &[Vec2],
    p: &ShoppingMallParams,
    rng: &mut ChaCha8Rng,
) -> (Vec2, BystanderIntent) {
    let mut next = intent.clone();
    if next.dwell > 0 {
        next.dwell -= 1;
        if next.dwell == 0 {
            pick_other_shop(&mut next, shops, rng);
        }
        return (Vec2::ZERO, next);
    }
    if b.pos.distance(next.waypoint) <= p.arrival_radius {
        if p.dwell_steps > 0 {
            next.dwell = p.dwell_steps;
            return (Vec2::ZERO, next);
        }
        pick_other_shop(&mut next, shops, rng);
    }
    ((next.waypoint - b.pos).normalized_or_zero(), next)
}

fn pick_other_shop(intent: &mut BystanderIntent, shops: &[Vec2], rng: &mut ChaCha8Rng) {
    if shops.len() < 2 {
        return;
    }
    // Uniform over the other shops.
    let mut k = rng.gen_range(0..shops.len() - 1);
    if k >= intent.shop {
        k += 1;
    }
    intent.shop = k;
    intent.waypoint = shops[k];
}

/// Street walker with Vicsek-style alignment.
///
/// The new heading is the direction of the summed unit headings of the
/// walker and its neighbours plus uniform noise, blended with a pull toward
/// the exit waypoint. Without neighbours the walker heads straight for the
/// waypoint. The returned force realises speed `p.speed` along that heading
/// as far as the force bound allows.
pub fn bystander_vicsek_policy(
    b: &EntityState,
    neighbor_headings: &[f64],
    intent: &BystanderIntent,
    p: &StreetParams,
    sim: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec2, BystanderIntent) {
    let half = 0.5 * p.noise.max(0.0);
    let noise = rng.gen_range(-half..=half);
    let to_wp = (intent.waypoint - b.pos).normalized_or_zero();
    let dir = if neighbor_headings.is_empty() {
        Vec2::from_angle(to_wp.angle() + noise)
    } else {
        let mut sum = Vec2::from_angle(intent.heading);
        for &h in neighbor_headings {
            sum += Vec2::from_angle(h);
        }
        let aligned = Vec2::from_angle(sum.angle() + noise);
        let blended = aligned * (1.0 - p.waypoint_weight) + to_wp * p.waypoint_weight;
        if blended.norm_sq() > 0.0 {
            blended.normalized_or_zero()
        } else {
            aligned
        }
    };
    let mut next = intent.clone();
    next.heading = dir.angle();
    let desired = dir * p.speed;
    let gain = sim.accel.get(EntityClass::Bystander) * sim.dt;
    let force = ((desired - b.vel * (1.0 - sim.damping)) * (1.0 / gain)).clamp_components(-1.0, 1.0);
    (force, next)
}

/// Full-strength pursuit of the VIP.
pub fn bystander_unruly_policy(b: &EntityState, vip: Vec2) -> Vec2 {
    (vip - b.pos).normalized_or_zero()
}

/// Line-holders keep their place behind the rope.
pub fn line_holder_policy(b: &EntityState, intent: &BystanderIntent) -> Vec2 {
    ((intent.waypoint - b.pos) * 4.0 - b.vel).clamp_components(-1.0, 1.0)
}

/// VIP path following with the halting rule: zero force when any bystander
/// is inside the personal space around the look-ahead point, or when the
/// destination is reached. The VIP eases in over the last `slow_radius`.
pub fn vip_policy(w: &WorldState, p: &VipParams, dt: f64) -> Vec2 {
    let to_dest = w.vip_destination - w.vip.pos;
    if to_dest.norm() <= p.arrival_radius {
        return Vec2::ZERO;
    }
    let look = w.vip.pos + w.vip.vel * (dt * p.look_ahead);
    if w.bystanders.iter().any(|b| b.pos.distance(look) <= p.personal_space) {
        return Vec2::ZERO;
    }
    let ease = if p.slow_radius > 0.0 {
        (to_dest.norm() / p.slow_radius).min(1.0)
    } else {
        1.0
    };
    to_dest.normalized_or_zero() * ease
}

/// Computes every bystander's force for this step and advances its intent.
pub fn bystander_forces(
    w: &WorldState,
    spec: &ScenarioSpec,
    intents: &mut [BystanderIntent],
    params: &ScenarioParams,
    sim: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec2> {
    let headings: Vec<f64> = intents.iter().map(|i| i.heading).collect();
    let mut forces = Vec::with_capacity(w.bystanders.len());
    let mut neighbors = Vec::new();
    for (i, b) in w.bystanders.iter().enumerate() {
        let intent = &intents[i];
        let (force, next) = match intent.behavior {
            Behavior::Waypoint => {
                bystander_waypoint_policy(b, intent, &spec.landmarks, params.random_landmark.arrival_radius, rng)
            }
            Behavior::Shopper => bystander_shopping_policy(b, intent, &spec.landmarks, &params.shopping_mall, rng),
            Behavior::Street => {
                neighbors.clear();
                let r = params.street.neighbor_radius;
                for (j, o) in w.bystanders.iter().enumerate() {
                    if j != i && intents[j].behavior == Behavior::Street && o.pos.distance(b.pos) <= r {
                        neighbors.push(headings[j]);
                    }
                }
                bystander_vicsek_policy(b, &neighbors, intent, &params.street, sim, rng)
            }
            Behavior::Unruly => (bystander_unruly_policy(b, w.vip.pos), intent.clone()),
            Behavior::LineHolder => (line_holder_policy(b, intent), intent.clone()),
        };
        intents[i] = next;
        forces.push(force);
    }
    forces
}

/// Street walkers that reach the edge they are heading for re-enter from
/// the opposite edge with a fresh exit waypoint.
pub fn respawn_street_walkers(
    w: &mut WorldState,
    intents: &mut [BystanderIntent],
    p: &StreetParams,
    arena_half: f64,
    rng: &mut ChaCha8Rng,
) {
    for (b, intent) in w.bystanders.iter_mut().zip(intents.iter_mut()) {
        if intent.behavior != Behavior::Street {
            continue;
        }
        let dir = intent.waypoint.x.signum();
        if b.pos.x * dir >= arena_half - 1e-9 {
            let y = rng.gen_range(-p.half_width..=p.half_width);
            b.pos = Vec2::new(-dir * arena_half, y);
            intent.waypoint = street_exit(dir, p, arena_half, rng);
            intent.heading = (intent.waypoint - b.pos).angle();
        }
    }
}

fn street_exit(dir: f64, p: &StreetParams, arena_half: f64, rng: &mut ChaCha8Rng) -> Vec2 {
    Vec2::new(
        dir * (arena_half + p.waypoint_offset),
        rng.gen_range(-p.half_width..=p.half_width),
    )
}

/// Evenly spaced points on the arena boundary, starting at the lower-left
/// corner and walking counter-clockwise.
pub fn periphery_points(n: usize, arena_half: f64) -> Vec<Vec2> {
    let a = arena_half;
    let side = 2.0 * a;
    (0..n)
        .map(|k| {
            let s = 4.0 * side * k as f64 / n as f64;
            let (edge, u) = ((s / side).floor() as usize % 4, s % side);
            match edge {
                0 => Vec2::new(-a + u, -a),
                1 => Vec2::new(a, -a + u),
                2 => Vec2::new(a - u, a),
                _ => Vec2::new(-a, a - u),
            }
        })
        .collect()
}

fn uniform_in_square(rng: &mut ChaCha8Rng, half: f64) -> Vec2 {
    Vec2::new(rng.gen_range(-half..=half), rng.gen_range(-half..=half))
}

/// Uniform point in the arena at least `clearance` from `avoid` (best effort).
fn spawn_point(rng: &mut ChaCha8Rng, half: f64, avoid: Vec2, clearance: f64) -> Vec2 {
    let mut p = uniform_in_square(rng, half);
    for _ in 0..64 {
        if p.distance(avoid) >= clearance {
            break;
        }
        p = uniform_in_square(rng, half);
    }
    p
}

/// Builds the scenario layout, bystander intents and initial world.
/// Fully determined by `(id, seed, cfg)`.
pub fn make_scenario(
    id: ScenarioId,
    seed: u64,
    cfg: &Config,
) -> Result<(ScenarioSpec, Vec<BystanderIntent>, WorldState)> {
    let sim = &cfg.sim;
    let sp = &cfg.scenario;
    let a = sim.arena_half;
    let m = sim.bystanders;
    let mut rng = stream(seed, ids::LAYOUT);
    let path = sp.vip.path_fraction * a;

    let axis_path = |dir: Vec2| (dir * -path, dir * path);
    let sign = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };

    let (landmarks, vip_start, vip_destination, intents, positions) = match id {
        ScenarioId::RandomLandmark => {
            let p = &sp.random_landmark;
            let landmarks: Vec<Vec2> = (0..p.landmarks)
                .map(|_| uniform_in_square(&mut rng, p.spread * a))
                .collect();
            let start = landmarks[0];
            let dest = landmarks[1..]
                .iter()
                .copied()
                .max_by(|x, y| x.distance(start).total_cmp(&y.distance(start)))
                .unwrap_or(start);
            let mut intents = Vec::with_capacity(m);
            let mut pos = Vec::with_capacity(m);
            for _ in 0..m {
                pos.push(spawn_point(&mut rng, a, start, sp.start_clearance));
                let wp = landmarks[rng.gen_range(0..landmarks.len())];
                intents.push(BystanderIntent::new(Behavior::Waypoint, wp));
            }
            (landmarks, start, dest, intents, pos)
        }
        ScenarioId::ShoppingMall => {
            let shops = periphery_points(sp.shopping_mall.shops, a);
            let dir = Vec2::from_angle(FRAC_PI_2 * rng.gen_range(0..4) as f64);
            let (start, dest) = axis_path(dir);
            let mut intents = Vec::with_capacity(m);
            let mut pos = Vec::with_capacity(m);
            for _ in 0..m {
                pos.push(spawn_point(&mut rng, a, start, sp.start_clearance));
                let k = rng.gen_range(0..shops.len());
                let mut intent = BystanderIntent::new(Behavior::Shopper, shops[k]);
                intent.shop = k;
                intents.push(intent);
            }
            (shops, start, dest, intents, pos)
        }
        ScenarioId::Street => {
            let p = &sp.street;
            let (start, dest) = axis_path(Vec2::new(sign(&mut rng), 0.0));
            let mut intents = Vec::with_capacity(m);
            let mut pos = Vec::with_capacity(m);
            for _ in 0..m {
                let mut q = Vec2::new(rng.gen_range(-a..=a), rng.gen_range(-p.half_width..=p.half_width));
                for _ in 0..64 {
                    if q.distance(start) >= sp.start_clearance {
                        break;
                    }
                    q = Vec2::new(rng.gen_range(-a..=a), rng.gen_range(-p.half_width..=p.half_width));
                }
                let dir = sign(&mut rng);
                let wp = street_exit(dir, p, a, &mut rng);
                let mut intent = BystanderIntent::new(Behavior::Street, wp);
                intent.heading = (wp - q).angle();
                intents.push(intent);
                pos.push(q);
            }
            (vec![start, dest], start, dest, intents, pos)
        }
        ScenarioId::PieInTheFace => {
            let p = &sp.pie_in_the_face;
            let (start, dest) = axis_path(Vec2::new(sign(&mut rng), 0.0));
            let unruly = if m > 0 { rng.gen_range(0..m) } else { 0 };
            let span = a - 0.1;
            let mut intents = Vec::with_capacity(m);
            let mut pos = Vec::with_capacity(m);
            for k in 0..m {
                let x = if m == 1 {
                    0.0
                } else {
                    -span + 2.0 * span * k as f64 / (m - 1) as f64
                };
                let anchor = Vec2::new(x, p.rope_y + 0.05 + rng.gen_range(0.0..=p.line_depth));
                let behavior = if k == unruly {
                    Behavior::Unruly
                } else {
                    Behavior::LineHolder
                };
                intents.push(BystanderIntent::new(behavior, anchor));
                pos.push(anchor);
            }
            (vec![start, dest], start, dest, intents, pos)
        }
    };

    let heading = (vip_destination - vip_start).angle();
    let guards = (0..N_GUARDS)
        .map(|k| EntityState {
            pos: (vip_start + Vec2::from_angle(heading + FRAC_PI_4 + FRAC_PI_2 * k as f64) * sp.guard_ring)
                .clamp_components(-a, a),
            vel: Vec2::ZERO,
            utterance: vec![0.0; sim.comm_dim],
        })
        .collect();
    let world = WorldState {
        vip: EntityState::at(vip_start),
        guards,
        bystanders: positions.into_iter().map(EntityState::at).collect(),
        landmarks: landmarks.clone(),
        vip_destination,
        vip_heading: heading,
        t: 0,
        scenario: id,
    };
    let spec = ScenarioSpec {
        id,
        landmarks,
        behaviors: intents.iter().map(|i| i.behavior).collect(),
        vip_start,
        vip_destination,
        reward: cfg.reward.get(id).clone(),
    };
    Ok((spec, intents, world))
}

/// Initial world for `(scenario, seed)`.
pub fn reset_world(id: ScenarioId, seed: u64, cfg: &Config) -> Result<WorldState> {
    make_scenario(id, seed, cfg).map(|(_, _, w)| w)
}
