//! Z-X-Z gait planning against the goal manifold, and greedy single-step
//! translation planning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifold::{build_goal_manifold, GoalManifoldIndex};
use crate::so3::{candidate_steps, Axis, Rot3, Vec3};

/// Bookkeeping period between consecutive plan steps, in seconds.
pub const STEP_PERIOD: f64 = 0.5;

/// The four motion primitives the hand can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    RotX,
    RotZ,
    TransY,
    TransZ,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::RotX, Mode::RotZ, Mode::TransY, Mode::TransZ];

    pub fn is_rotation(self) -> bool {
        matches!(self, Mode::RotX | Mode::RotZ)
    }

    /// Hand-frame axis the mode acts on.
    pub fn axis(self) -> Axis {
        match self {
            Mode::RotX => Axis::X,
            Mode::RotZ | Mode::TransZ => Axis::Z,
            Mode::TransY => Axis::Y,
        }
    }
}

/// One commanded step: radians for rotation modes, meters for translation modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeAction {
    pub mode: Mode,
    pub magnitude: f64,
    #[serde(skip)]
    pub timestamp: f64,
}

impl ModeAction {
    pub fn new(mode: Mode, magnitude: f64) -> Self {
        Self { mode, magnitude, timestamp: 0.0 }
    }
}

/// Angles of a connection: `R_g ≈ Rz(-phi) · Rx(theta) · Rz(psi) · R_s`,
/// i.e. `Rx(theta) · Rz(psi) · R_s` lies within ρ of `Rz(phi) · R_g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Connection {
    pub psi: f64,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub actions: Vec<ModeAction>,
    pub decomposition: Option<Connection>,
    pub step: f64,
}

impl Plan {
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn first(&self) -> Option<&ModeAction> {
        self.actions.first()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanningFailure {
    #[error("no (psi, theta) pair in the schedule reaches the goal manifold")]
    ScheduleExhausted,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

fn check_step(sigma: f64) -> Result<(), PlanningFailure> {
    if sigma.is_finite() && sigma > 0.0 && sigma <= std::f64::consts::PI {
        Ok(())
    } else {
        Err(PlanningFailure::InvalidInput(format!("rotational step {sigma} outside (0, π]")))
    }
}

/// Plans from `start` to `goal`, building a fresh goal manifold at `sigma`.
pub fn so3_plan(start: Rot3, goal: Rot3, rho: f64, sigma: f64) -> Result<Plan, PlanningFailure> {
    check_step(sigma)?;
    let index = build_goal_manifold(goal, sigma).map_err(|e| PlanningFailure::InvalidInput(e.to_string()))?;
    so3_plan_with_index(start, &index, rho, sigma)
}

/// Plans against a prebuilt goal manifold. `sigma` drives the forward
/// ψ/θ schedule and plan enumeration; the index keeps its own resolution.
pub fn so3_plan_with_index(
    start: Rot3,
    index: &GoalManifoldIndex,
    rho: f64,
    sigma: f64,
) -> Result<Plan, PlanningFailure> {
    let c = connect(start, index, rho, sigma)?;
    Ok(enumerate_path(start, sigma, c.psi, c.theta, c.phi))
}

/// Outward ψ (outer) / θ (inner) search; first connection in schedule order.
pub fn connect(start: Rot3, index: &GoalManifoldIndex, rho: f64, sigma: f64) -> Result<Connection, PlanningFailure> {
    check_step(sigma)?;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(PlanningFailure::InvalidInput(format!("connection threshold {rho} must be positive")));
    }
    let schedule = candidate_steps(sigma).map_err(|e| PlanningFailure::InvalidInput(e.to_string()))?;
    let x_steps: Vec<(f64, Rot3, f64, f64)> = schedule
        .iter()
        .map(|t| {
            let (s, c) = t.sin_cos();
            (t, Rot3::about_axis_unchecked(Axis::X, t), s, c)
        })
        .collect();

    // The hand-z direction in the body frame is shared by every manifold
    // entry, so its angle to the candidate's is a lower bound on the geodesic
    // distance, and geodesic ≤ √3 · dist_r. Candidates beyond it are skipped.
    let tilt_limit = 3f64.sqrt() * rho + 1e-9;
    let min_dot = if tilt_limit < std::f64::consts::PI { tilt_limit.cos() } else { f64::NEG_INFINITY };
    let g = index.tilt_axis();

    for psi in schedule.iter() {
        let m = Rot3::about_axis_unchecked(Axis::Z, psi) * start;
        let mm = m.matrix();
        let a = dot3(&mm[1], &g);
        let b = dot3(&mm[2], &g);
        if (a * a + b * b).sqrt() < min_dot {
            continue;
        }
        for &(theta, rx, s, c) in &x_steps {
            if a * s + b * c < min_dot {
                continue;
            }
            let candidate = rx * m;
            if let Some(hit) = index.query_within(&candidate, rho) {
                return Ok(Connection { psi, theta, phi: hit.phi });
            }
        }
    }
    Err(PlanningFailure::ScheduleExhausted)
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Splits `total` into signed steps of at most `sigma`, remainder last.
fn split_steps(total: f64, sigma: f64) -> Vec<f64> {
    let sign = total.signum();
    let mut left = total.abs();
    let mut out = Vec::new();
    while left > sigma * (1.0 + 1e-9) {
        out.push(sign * sigma);
        left -= sigma;
    }
    if left > 1e-12 {
        out.push(sign * left.min(sigma));
    }
    out
}

/// Emits the RotZ(ψ) block, the RotX(θ) block, then the RotZ(−φ) block that
/// carries the candidate onto the goal.
pub fn enumerate_path(_start: Rot3, sigma: f64, psi: f64, theta: f64, phi: f64) -> Plan {
    let blocks = [(Mode::RotZ, psi), (Mode::RotX, theta), (Mode::RotZ, -phi)];
    let actions = blocks
        .iter()
        .flat_map(|&(mode, total)| split_steps(total, sigma).into_iter().map(move |m| ModeAction::new(mode, m)))
        .enumerate()
        .map(|(i, mut a)| {
            a.timestamp = i as f64 * STEP_PERIOD;
            a
        })
        .collect();
    Plan { actions, decomposition: Some(Connection { psi, theta, phi }), step: sigma }
}

/// Axis of largest |γ|, ties resolved in x, y, z order.
pub fn max_deviation_axis(gamma: Vec3) -> Axis {
    let (ax, ay, az) = (gamma.x.abs(), gamma.y.abs(), gamma.z.abs());
    let top = ax.max(ay).max(az);
    if ax == top {
        Axis::X
    } else if ay == top {
        Axis::Y
    } else {
        Axis::Z
    }
}

/// One greedy step of `sigma_t` toward `goal` along the dominant deviation.
///
/// There is no x-translation mode, so an x-dominant deviation is served by
/// the larger of y and z; when both of those are under half a step the plan
/// is empty.
pub fn translation_plan(start: Vec3, goal: Vec3, sigma_t: f64) -> Result<Plan, PlanningFailure> {
    if !(sigma_t.is_finite() && sigma_t > 0.0) {
        return Err(PlanningFailure::InvalidInput(format!("translational step {sigma_t} must be positive")));
    }
    let gamma = goal - start;
    let axis = match max_deviation_axis(gamma) {
        Axis::X => {
            let axis = if gamma.y.abs() >= gamma.z.abs() { Axis::Y } else { Axis::Z };
            if gamma.get(axis).abs() < 0.5 * sigma_t {
                return Ok(Plan { actions: Vec::new(), decomposition: None, step: sigma_t });
            }
            axis
        }
        a => a,
    };
    let mode = if axis == Axis::Y { Mode::TransY } else { Mode::TransZ };
    let magnitude = gamma.get(axis).signum() * sigma_t;
    Ok(Plan { actions: vec![ModeAction::new(mode, magnitude)], decomposition: None, step: sigma_t })
}

/// Noiseless kinematic replay of rotation actions from `start`.
pub fn replay_rotation(start: Rot3, actions: &[ModeAction]) -> Rot3 {
    actions.iter().fold(start, |r, a| match a.mode {
        Mode::RotX => Rot3::about_axis_unchecked(Axis::X, a.magnitude) * r,
        Mode::RotZ => Rot3::about_axis_unchecked(Axis::Z, a.magnitude) * r,
        _ => r,
    })
}
