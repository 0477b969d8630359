//! In-hand reorientation over SO(3) by finger gaiting.
//!
//! * [`so3`]: rotations, distances, Z-X-Z decomposition, step schedules
//! * [`manifold`]: expanded goal manifold with exact nearest queries
//! * [`planner`]: Z-X-Z gait planning and greedy translation steps
//! * [`controller`]: the closed replanning loop with recovery
//! * [`plant`]: stochastic compliant hand-object simulator and tracker
//! * [`scenario`] / [`report`]: seeded experiment runner and outputs

pub mod controller;
pub mod error;
pub mod kdtree;
pub mod manifold;
pub mod par;
pub mod planner;
pub mod plant;
pub mod report;
pub mod scenario;
pub mod so3;

pub use error::{Error, Result};
pub use so3::{Axis, Pose, Rot3, Vec3};

pub const DEG: f64 = std::f64::consts::PI / 180.0;
