//! Multi-agent VIP protection: a 2D particle world with a scripted crowd,
//! a residual-threat model, a quadrant load balancing baseline and
//! centralized-critic training of the guard team.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod geom;
pub mod marl;
pub mod nn;
pub mod policy;
pub mod qlb;
pub mod report;
pub mod reward;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod svg;
pub mod threat;
pub mod traj;

pub use config::Config;
pub use error::{Error, Result};
pub use geom::Vec2;
pub use scenario::ScenarioId;
