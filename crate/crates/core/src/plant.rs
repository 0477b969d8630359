//! Stochastic compliant hand-object simulator and pose-tracker emulator.
//!
//! The plant integrates commanded mode steps with per-object gain noise,
//! cross-coupling onto uncontrolled axes, occasional slip, stuck regions,
//! and a one-dimensional yaw regrasp basin that is exercised whenever the
//! palm joint runs out of range.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::controller::{Plant, Tracker};
use crate::error::{Error, Result};
use crate::planner::{Mode, ModeAction, STEP_PERIOD};
use crate::so3::{dist_t, Axis, Pose, Rot3, Vec3};
use crate::DEG;

/// Half of the palm's 110° rotary range.
pub const PALM_LIMIT: f64 = 55.0 * DEG;
pub const MAX_ROTATION_STEP: f64 = 10.0 * DEG;
pub const MAX_TRANSLATION_STEP: f64 = 0.01;

const HISTORY_LEN: usize = 64;

fn normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    } else {
        0.0
    }
}

/// Response of the hand-object system to one mode.
///
/// Six-component arrays are ordered roll, pitch, yaw (rad) then x, y, z (m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeResponse {
    pub gain_mean: f64,
    #[serde(default)]
    pub gain_std: f64,
    #[serde(default)]
    pub cross_coupling_std: [f64; 6],
    /// Systematic per-action displacement (e.g. sag under gravity).
    #[serde(default)]
    pub bias: [f64; 6],
}

impl ModeResponse {
    pub fn exact() -> Self {
        Self { gain_mean: 1.0, gain_std: 0.0, cross_coupling_std: [0.0; 6], bias: [0.0; 6] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegraspBasin {
    pub center_offset: f64,
    pub pull_strength: f64,
    pub capture_range: f64,
    #[serde(default)]
    pub noise_std: f64,
}

/// Orientation region where finger contacts can catch on the geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StuckRegion {
    pub center: Rot3,
    /// Geodesic radius, rad.
    pub radius: f64,
    /// Per-RotX-action chance of catching while inside the region.
    pub catch_probability: f64,
    /// Per-rotation-action chance of freeing a caught object.
    pub escape_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectModel {
    pub name: String,
    pub rot_x: ModeResponse,
    pub rot_z: ModeResponse,
    pub trans_y: ModeResponse,
    pub trans_z: ModeResponse,
    #[serde(default)]
    pub slip_probability: f64,
    #[serde(default)]
    pub slip_rotation_std: f64,
    #[serde(default)]
    pub slip_translation_std: f64,
    pub regrasp_basin: RegraspBasin,
    #[serde(default)]
    pub stuck_states: Vec<StuckRegion>,
    /// Distance from the workspace center at which the object is lost.
    pub eject_distance: f64,
    /// Fraction of the x offset from the workspace center that the compliant
    /// grasp removes on each action. x has no controlling mode.
    #[serde(default)]
    pub x_restoring: f64,
}

impl ObjectModel {
    pub fn response(&self, mode: Mode) -> &ModeResponse {
        match mode {
            Mode::RotX => &self.rot_x,
            Mode::RotZ => &self.rot_z,
            Mode::TransY => &self.trans_y,
            Mode::TransZ => &self.trans_z,
        }
    }

    /// Exact kinematic integrator: unit gains, no noise, no slip.
    pub fn noiseless() -> Self {
        Self {
            name: "noiseless".into(),
            rot_x: ModeResponse::exact(),
            rot_z: ModeResponse::exact(),
            trans_y: ModeResponse::exact(),
            trans_z: ModeResponse::exact(),
            slip_probability: 0.0,
            slip_rotation_std: 0.0,
            slip_translation_std: 0.0,
            regrasp_basin: RegraspBasin { center_offset: 0.0, pull_strength: 0.5, capture_range: 1.0, noise_std: 0.0 },
            stuck_states: Vec::new(),
            eject_distance: f64::INFINITY,
            x_restoring: 0.0,
        }
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("object {}: {m}", self.name)));
        for mode in Mode::ALL {
            let r = self.response(mode);
            if !(r.gain_mean > 0.0 && r.gain_mean <= 1.5) {
                return bad(format!("{mode:?} gain_mean {} outside (0, 1.5]", r.gain_mean));
            }
            if r.gain_std < 0.0 || r.cross_coupling_std.iter().any(|s| *s < 0.0 || !s.is_finite()) {
                return bad(format!("{mode:?} has a negative or non-finite std"));
            }
            if r.bias.iter().any(|b| !b.is_finite()) {
                return bad(format!("{mode:?} bias is not finite"));
            }
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.slip_probability) || !prob(self.regrasp_basin.pull_strength) || !prob(self.x_restoring) {
            return bad("probability outside [0, 1]".into());
        }
        if self.stuck_states.iter().any(|s| !prob(s.catch_probability) || !prob(s.escape_probability)) {
            return bad("stuck-region probability outside [0, 1]".into());
        }
        if self.slip_rotation_std < 0.0 || self.slip_translation_std < 0.0 || self.regrasp_basin.noise_std < 0.0 {
            return bad("negative slip or basin std".into());
        }
        if !(self.regrasp_basin.capture_range > 0.0) || !(self.eject_distance > 0.0) {
            return bad("capture range and eject distance must be positive".into());
        }
        Ok(())
    }

    /// Named presets. Values are tuned so that the well-behaved objects
    /// (cube, sphere, truck) succeed reliably while the non-convex ones
    /// (bunny catches on its ears, duck slips during x-rotation) do not.
    pub fn preset(name: &str) -> Result<Self> {
        let rot_x = ModeResponse {
            gain_mean: 0.65,
            gain_std: 0.05,
            cross_coupling_std: [0.0, 0.5 * DEG, 0.2 * DEG, 0.8e-3, 0.1e-3, 0.2e-3],
            bias: [0.0, 0.0, 0.0, 0.0, 0.0, -0.35e-3],
        };
        let rot_z = ModeResponse {
            gain_mean: 0.7,
            gain_std: 0.05,
            cross_coupling_std: [0.2 * DEG, 0.2 * DEG, 0.0, 0.2e-3, 0.1e-3, 0.1e-3],
            bias: [0.0; 6],
        };
        let trans = |axis: usize| {
            let mut cc = [0.2 * DEG, 0.2 * DEG, 0.2 * DEG, 0.2e-3, 0.2e-3, 0.2e-3];
            cc[axis] = 0.0;
            ModeResponse { gain_mean: 0.9, gain_std: 0.1, cross_coupling_std: cc, bias: [0.0; 6] }
        };
        let cube = ObjectModel {
            name: "cube".into(),
            rot_x,
            rot_z,
            trans_y: trans(4),
            trans_z: trans(5),
            slip_probability: 0.01,
            slip_rotation_std: 1.0 * DEG,
            slip_translation_std: 1e-3,
            regrasp_basin: RegraspBasin {
                center_offset: 0.0,
                pull_strength: 0.7,
                capture_range: 0.6,
                noise_std: 1.0 * DEG,
            },
            stuck_states: Vec::new(),
            eject_distance: 0.03,
            x_restoring: 0.03,
        };
        let model = match name {
            "cube" => cube,
            "noiseless" => Self::noiseless(),
            "sphere" => {
                let mut m = cube;
                m.name = "sphere".into();
                m.rot_x.gain_std = 0.05;
                m.slip_probability = 0.005;
                m.regrasp_basin.pull_strength = 0.3;
                m.regrasp_basin.capture_range = 0.8;
                m
            }
            "truck" => {
                let mut m = cube;
                m.name = "truck".into();
                m.rot_x.bias[5] = -0.5e-3;
                m.slip_probability = 0.01;
                m
            }
            "bunny" => {
                let mut m = cube;
                m.name = "bunny".into();
                m.rot_x.gain_mean = 0.8;
                m.rot_x.gain_std = 0.2;
                m.slip_probability = 0.03;
                m.stuck_states = vec![StuckRegion {
                    center: Rot3::about_axis_unchecked(Axis::X, 45.0 * DEG),
                    radius: 20.0 * DEG,
                    catch_probability: 0.1,
                    escape_probability: 0.0,
                }];
                m
            }
            "duck" => {
                let mut m = cube;
                m.name = "duck".into();
                m.rot_x.gain_std = 0.25;
                m.rot_x.cross_coupling_std[1] = 0.8 * DEG;
                m.slip_probability = 0.06;
                m.slip_translation_std = 4e-3;
                m.slip_rotation_std = 4.0 * DEG;
                m.eject_distance = 0.010;
                m
            }
            other => return Err(Error::Config(format!("unknown object preset '{other}'"))),
        };
        Ok(model)
    }
}

/// Pose-tracker noise and timing, in degrees and millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerModel {
    pub rot_noise_std: f64,
    pub trans_noise_std: f64,
    pub rate: f64,
    pub latency: usize,
}

impl Default for TrackerModel {
    fn default() -> Self {
        Self { rot_noise_std: 2.0, trans_noise_std: 1.5, rate: 60.0, latency: 0 }
    }
}

impl TrackerModel {
    pub fn perfect() -> Self {
        Self { rot_noise_std: 0.0, trans_noise_std: 0.0, rate: 60.0, latency: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PerturbAxis {
    RotX,
    RotY,
    RotZ,
    TransX,
    TransY,
    TransZ,
}

/// External displacement of the object, applied between control ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub time: f64,
    pub axis: PerturbAxis,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraspPair {
    DifferentialPair,
    IndividualPair,
}

#[derive(Debug, Clone)]
pub struct PlantState {
    pub true_pose: Pose,
    pub palm_joint: f64,
    pub grasp_pair: GraspPair,
    /// Yaw of the object relative to the current grasp's rest configuration.
    pub basin_offset: f64,
    pub clock: f64,
    pub stuck: bool,
    rng: ChaCha8Rng,
}

impl PlantState {
    pub fn new(pose: Pose, seed: u64) -> Self {
        Self {
            true_pose: pose,
            palm_joint: 0.0,
            grasp_pair: GraspPair::DifferentialPair,
            basin_offset: 0.0,
            clock: 0.0,
            stuck: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Counters the harness reads after a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlantEvents {
    pub actions: usize,
    pub regrasps: usize,
    pub slips: usize,
    pub perturbations_applied: usize,
}

/// Simulated hand holding one object.
#[derive(Debug, Clone)]
pub struct SimPlant {
    pub state: PlantState,
    pub model: ObjectModel,
    workspace_center: Vec3,
    schedule: VecDeque<Perturbation>,
    history: VecDeque<Pose>,
    dropped: Option<String>,
    pub events: PlantEvents,
}

impl SimPlant {
    pub fn new(model: ObjectModel, start: Pose, workspace_center: Vec3, seed: u64) -> Self {
        Self {
            state: PlantState::new(start, seed),
            model,
            workspace_center,
            schedule: VecDeque::new(),
            history: VecDeque::new(),
            dropped: None,
            events: PlantEvents::default(),
        }
    }

    /// Queue perturbations; each fires after the first action that brings
    /// the clock to or past its time.
    pub fn schedule_perturbations(&mut self, mut list: Vec<Perturbation>) {
        list.sort_by(|a, b| a.time.total_cmp(&b.time));
        self.schedule.extend(list);
    }

    pub fn pending_perturbations(&self) -> usize {
        self.schedule.len()
    }

    pub fn true_pose(&self) -> Pose {
        self.state.true_pose
    }

    pub fn is_dropped(&self) -> bool {
        self.dropped.is_some()
    }

    /// True pose `ticks` actions ago, saturating at the oldest kept pose.
    pub fn pose_ticks_ago(&self, ticks: usize) -> Pose {
        if ticks == 0 || self.history.is_empty() {
            return self.state.true_pose;
        }
        let i = self.history.len().saturating_sub(ticks);
        self.history[i]
    }

    fn drop_object(&mut self, why: String) -> Error {
        self.dropped = Some(why.clone());
        Error::Dropped(why)
    }

    fn rotate(&mut self, axis: Axis, angle: f64) {
        if angle != 0.0 {
            self.state.true_pose.r = Rot3::about_axis_unchecked(axis, angle) * self.state.true_pose.r;
        }
    }

    fn translate(&mut self, axis: Axis, d: f64) {
        let t = self.state.true_pose.t;
        self.state.true_pose.t = t.with(axis, t.get(axis) + d);
    }

    fn in_stuck_region(&self) -> Option<&StuckRegion> {
        let r = self.state.true_pose.r;
        self.model.stuck_states.iter().find(|s| s.center.angle_to(&r) < s.radius)
    }

    /// Executes one mode step on the true object state.
    pub fn mode_action(&mut self, action: &ModeAction) -> Result<()> {
        if let Some(why) = &self.dropped {
            return Err(Error::Dropped(why.clone()));
        }
        let limit = if action.mode.is_rotation() { MAX_ROTATION_STEP } else { MAX_TRANSLATION_STEP };
        if !action.magnitude.is_finite() || action.magnitude.abs() > limit {
            return Err(Error::InvalidArgument(format!(
                "{:?} step {} exceeds bound {limit}",
                action.mode, action.magnitude
            )));
        }
        self.history.push_back(self.state.true_pose);
        if self.history.len() > HISTORY_LEN {
            self.history.pop_front();
        }

        if action.mode == Mode::RotZ && (self.state.palm_joint + action.magnitude).abs() > PALM_LIMIT {
            self.regrasp()?;
            self.state.palm_joint = 0.0;
        }

        let resp = self.model.response(action.mode).clone();
        let rng = &mut self.state.rng;
        let mut gain = resp.gain_mean + normal(rng, resp.gain_std);
        let mut delta: [f64; 6] = std::array::from_fn(|i| resp.bias[i] + normal(rng, resp.cross_coupling_std[i]));

        // A caught object does not turn in either rotation mode.
        if action.mode.is_rotation() {
            self.update_stuck(action.mode);
            if self.state.stuck {
                gain = 0.0;
                delta[..3].fill(0.0);
            }
        }

        let commanded = match action.mode {
            Mode::RotX => 0,
            Mode::RotZ => 2,
            Mode::TransY => 4,
            Mode::TransZ => 5,
        };
        delta[commanded] = resp.bias[commanded] + gain * action.magnitude;

        let rng = &mut self.state.rng;
        if self.model.slip_probability > 0.0 && rng.random::<f64>() < self.model.slip_probability {
            let axis = rng.random_range(0..6usize);
            let std = if axis < 3 { self.model.slip_rotation_std } else { self.model.slip_translation_std };
            delta[axis] += normal(rng, std);
            self.events.slips += 1;
        }

        // Commanded axis first, then the small uncontrolled rotations.
        let order: [usize; 3] = if commanded == 2 { [2, 0, 1] } else { [0, 1, 2] };
        for i in order {
            self.rotate(Axis::from_index(i), delta[i]);
        }
        for i in 0..3 {
            self.translate(Axis::from_index(i), delta[3 + i]);
        }
        let dx = self.state.true_pose.t.x - self.workspace_center.x;
        self.translate(Axis::X, -self.model.x_restoring * dx);

        self.state.basin_offset += delta[2];
        if action.mode == Mode::RotZ {
            self.state.palm_joint += action.magnitude;
            self.state.basin_offset -= action.magnitude;
        }
        self.state.clock += STEP_PERIOD;
        self.events.actions += 1;

        while self.schedule.front().is_some_and(|p| p.time <= self.state.clock) {
            let p = self.schedule.pop_front().expect("front checked");
            self.apply_perturbation(&p);
        }

        let off = dist_t(self.state.true_pose.t, self.workspace_center);
        if off > self.model.eject_distance {
            return Err(self.drop_object(format!("object ejected {:.1} mm from the workspace center", off * 1e3)));
        }
        Ok(())
    }

    fn update_stuck(&mut self, mode: Mode) {
        let Some(region) = self.in_stuck_region().cloned() else {
            self.state.stuck = false;
            return;
        };
        let rng = &mut self.state.rng;
        if self.state.stuck {
            if rng.random::<f64>() < region.escape_probability {
                self.state.stuck = false;
            }
        } else if mode == Mode::RotX && rng.random::<f64>() < region.catch_probability {
            self.state.stuck = true;
        }
    }

    /// Transfers the grasp to the other finger pair. The object's yaw falls
    /// toward the basin center; outside the capture range it is dropped.
    pub fn regrasp(&mut self) -> Result<()> {
        let basin = self.model.regrasp_basin.clone();
        let before = self.state.basin_offset;
        let rel = before - basin.center_offset;
        if rel.abs() > basin.capture_range {
            return Err(self.drop_object(format!(
                "regrasp from yaw offset {rel:.3} rad outside capture range {:.3}",
                basin.capture_range
            )));
        }
        let after =
            basin.center_offset + rel * (1.0 - basin.pull_strength) + normal(&mut self.state.rng, basin.noise_std);
        self.rotate(Axis::Z, after - before);
        self.state.basin_offset = after;
        self.state.grasp_pair = match self.state.grasp_pair {
            GraspPair::DifferentialPair => GraspPair::IndividualPair,
            GraspPair::IndividualPair => GraspPair::DifferentialPair,
        };
        self.events.regrasps += 1;
        Ok(())
    }

    /// Displaces the true pose along one axis; nothing else changes.
    pub fn apply_perturbation(&mut self, p: &Perturbation) {
        match p.axis {
            PerturbAxis::RotX => self.rotate(Axis::X, p.magnitude),
            PerturbAxis::RotY => self.rotate(Axis::Y, p.magnitude),
            PerturbAxis::RotZ => {
                self.rotate(Axis::Z, p.magnitude);
                self.state.basin_offset += p.magnitude;
            }
            PerturbAxis::TransX => self.translate(Axis::X, p.magnitude),
            PerturbAxis::TransY => self.translate(Axis::Y, p.magnitude),
            PerturbAxis::TransZ => self.translate(Axis::Z, p.magnitude),
        }
        self.events.perturbations_applied += 1;
    }

    /// Whether a grasp transfer from the current state lands inside the
    /// inflated transfer region (strict inequality).
    pub fn check_safe_transfer(&self, rho: f64) -> bool {
        let basin = &self.model.regrasp_basin;
        (self.state.basin_offset - basin.center_offset).abs() < rho.min(basin.capture_range)
    }
}

impl Plant for SimPlant {
    fn mode_action(&mut self, action: &ModeAction) -> Result<()> {
        SimPlant::mode_action(self, action)
    }

    fn clock(&self) -> f64 {
        self.state.clock
    }
}

/// Noisy, optionally delayed, observer of a [`SimPlant`].
#[derive(Debug, Clone)]
pub struct SimTracker {
    pub model: TrackerModel,
    rng: ChaCha8Rng,
}

impl SimTracker {
    pub fn new(model: TrackerModel, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Self { model, rng }
    }

    pub fn perceive(&mut self, plant: &SimPlant) -> Pose {
        let truth = plant.pose_ticks_ago(self.model.latency);
        let rs = self.model.rot_noise_std * DEG;
        let ts = self.model.trans_noise_std * 1e-3;
        let rng = &mut self.rng;
        let (nx, ny, nz) = (normal(rng, rs), normal(rng, rs), normal(rng, rs));
        let t = Vec3::new(truth.t.x + normal(rng, ts), truth.t.y + normal(rng, ts), truth.t.z + normal(rng, ts));
        let r = Rot3::about_axis_unchecked(Axis::Z, nz)
            * Rot3::about_axis_unchecked(Axis::Y, ny)
            * Rot3::about_axis_unchecked(Axis::X, nx)
            * truth.r;
        Pose::new(t, r)
    }
}

impl Tracker<SimPlant> for SimTracker {
    fn perceive(&mut self, plant: &SimPlant) -> Pose {
        SimTracker::perceive(self, plant)
    }
}
