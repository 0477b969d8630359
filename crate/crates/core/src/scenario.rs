//! Scenario files and the seeded episode runner.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "cube_ab"
//! seed = 7
//! repetitions = 8
//!
//! [object]
//! preset = "cube"          # or an inline object model table
//!
//! [start]
//! face = "A"               # or R = [w, x, y, z], or rpy_deg = [r, p, y]
//!
//! [[goals]]
//! face = "B"
//! T = [0.0, -0.018, 0.0]   # defaults to the workspace center
//!
//! [[perturbations]]
//! time = 12.0
//! axis = "RotX"
//! magnitude = 0.3
//!
//! [params]                 # control parameter overrides
//! [tracker]                # tracker overrides
//! ```

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::controller::{ControlParams, Controller, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::par;
use crate::plant::{ObjectModel, Perturbation, SimPlant, SimTracker, TrackerModel};
use crate::so3::{dist_r, Axis, Pose, Rot3, Vec3};
use crate::DEG;

/// Faces of the reference cube. `A` is the identity orientation, `A`-`B`-`C`-`D`
/// form a ring of quarter turns about x, and `E`/`F` are quarter turns about z.
/// All six sit at zero pitch, away from the roll/pitch/yaw singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CubeFace {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl CubeFace {
    pub const ALL: [CubeFace; 6] = [CubeFace::A, CubeFace::B, CubeFace::C, CubeFace::D, CubeFace::E, CubeFace::F];

    pub fn rotation(self) -> Rot3 {
        use std::f64::consts::FRAC_PI_2;
        let (axis, angle) = match self {
            CubeFace::A => (Axis::X, 0.0),
            CubeFace::B => (Axis::X, FRAC_PI_2),
            CubeFace::C => (Axis::X, std::f64::consts::PI),
            CubeFace::D => (Axis::X, -FRAC_PI_2),
            CubeFace::E => (Axis::Z, FRAC_PI_2),
            CubeFace::F => (Axis::Z, -FRAC_PI_2),
        };
        Rot3::about_axis_unchecked(axis, angle)
    }
}

/// Goal pose presenting `face`, centered in the workspace.
pub fn cube_face_goal(face: CubeFace, center: Vec3) -> Pose {
    Pose::new(center, face.rotation())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    #[serde(default)]
    pub face: Option<CubeFace>,
    #[serde(default, rename = "R")]
    pub r: Option<[f64; 4]>,
    #[serde(default)]
    pub rpy_deg: Option<[f64; 3]>,
    #[serde(default, rename = "T")]
    pub t: Option<Vec3>,
}

impl PoseSpec {
    pub fn resolve(&self, center: Vec3) -> Result<Pose> {
        let given = [self.face.is_some(), self.r.is_some(), self.rpy_deg.is_some()];
        if given.iter().filter(|g| **g).count() > 1 {
            return Err(Error::Config("pose: give at most one of face, R, rpy_deg".into()));
        }
        let r = if let Some(face) = self.face {
            face.rotation()
        } else if let Some(q) = self.r {
            Rot3::from_quaternion(q)?
        } else if let Some([r, p, y]) = self.rpy_deg {
            Rot3::from_rpy(r * DEG, p * DEG, y * DEG)
        } else {
            Rot3::IDENTITY
        };
        Ok(Pose::new(self.t.unwrap_or(center), r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectSpec {
    Preset { preset: String },
    Inline(Box<ObjectModel>),
}

impl ObjectSpec {
    pub fn resolve(&self) -> Result<ObjectModel> {
        let m = match self {
            ObjectSpec::Preset { preset } => ObjectModel::preset(preset)?,
            ObjectSpec::Inline(m) => (**m).clone(),
        };
        m.validate()?;
        Ok(m)
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub object: ObjectSpec,
    #[serde(default)]
    pub start: PoseSpec,
    pub goals: Vec<PoseSpec>,
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
    #[serde(default)]
    pub params: ControlParams,
    #[serde(default)]
    pub tracker: TrackerModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut s = Self::from_toml(&text)?;
        if s.name.is_empty() {
            s.name = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.goals.is_empty() {
            return Err(Error::Config("scenario needs at least one goal".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        self.params.validate()?;
        self.object.resolve()?;
        self.start.resolve(self.params.t_center)?;
        for g in &self.goals {
            g.resolve(self.params.t_center)?;
        }
        if self.perturbations.iter().any(|p| !p.magnitude.is_finite() || !p.time.is_finite()) {
            return Err(Error::Config("perturbations must be finite".into()));
        }
        let t = &self.tracker;
        if !(t.rot_noise_std >= 0.0 && t.trans_noise_std >= 0.0 && t.rate > 0.0) {
            return Err(Error::Config("tracker noise must be non-negative and rate positive".into()));
        }
        Ok(())
    }

    pub fn goal_poses(&self) -> Result<Vec<Pose>> {
        self.goals.iter().map(|g| g.resolve(self.params.t_center)).collect()
    }

    pub fn object_name(&self) -> String {
        self.object.resolve().map(|m| m.name).unwrap_or_default()
    }

    pub fn repetition_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(rep as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub object: String,
    pub repetition: usize,
    pub seed: u64,
    /// Observed orientation error when the last goal's orientation loop ended, degrees.
    pub final_orientation_error: f64,
    /// Ground-truth orientation error after each completed goal, degrees.
    pub goal_errors: Vec<f64>,
    pub final_true_pose: Pose,
    /// Wall-clock seconds spent in the rotation planner.
    pub total_plan_time: f64,
    /// Simulated seconds.
    pub total_time: f64,
    pub success: bool,
    pub failure: Option<String>,
    pub goals_reached: usize,
    pub recovery_phases: usize,
    pub replans: usize,
    pub index_builds: usize,
    pub regrasps: usize,
    pub perturbations_survived: usize,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub metrics: Vec<RunMetrics>,
    pub logs: Vec<TrajectoryRecord>,
}

impl ScenarioRun {
    pub fn all_succeeded(&self) -> bool {
        self.metrics.iter().all(|m| m.success)
    }
}

/// Runs one seeded repetition of the scenario.
pub fn run_episode(s: &Scenario, rep: usize) -> Result<(RunMetrics, TrajectoryRecord)> {
    let model = s.object.resolve()?;
    let goals = s.goal_poses()?;
    let start = s.start.resolve(s.params.t_center)?;
    let seed = s.repetition_seed(rep);

    let mut plant = SimPlant::new(model.clone(), start, s.params.t_center, seed);
    plant.schedule_perturbations(s.perturbations.clone());
    let mut tracker = SimTracker::new(s.tracker.clone(), seed);
    let mut ctl = Controller::new(s.params.clone())?;

    let mut goal_errors = Vec::with_capacity(goals.len());
    let mut failure = None;
    for goal in &goals {
        match ctl.run(goal, &mut plant, &mut tracker) {
            Ok(_) => goal_errors.push(dist_r(&goal.r, &plant.true_pose().r) / DEG),
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }

    let last_goal = goals.last().expect("validated non-empty");
    let final_obs = match (failure.is_none(), ctl.orientation_exit) {
        (true, Some(p)) => p,
        _ => ctl.log.entries.last().map(|e| e.pose).unwrap_or(start),
    };
    let applied = plant.events.perturbations_applied;
    let metrics = RunMetrics {
        object: model.name.clone(),
        repetition: rep,
        seed,
        final_orientation_error: dist_r(&last_goal.r, &final_obs.r) / DEG,
        goal_errors,
        final_true_pose: plant.true_pose(),
        total_plan_time: ctl.plan_time.as_secs_f64(),
        total_time: plant.state.clock,
        success: failure.is_none(),
        goals_reached: ctl.log.entries.iter().filter(|e| e.phase == crate::controller::Phase::Done).count(),
        failure,
        recovery_phases: ctl.log.recovery_phases(),
        replans: ctl.replans,
        index_builds: ctl.index_builds,
        regrasps: plant.events.regrasps,
        // A drop is charged to the most recent perturbation.
        perturbations_survived: if plant.is_dropped() { applied.saturating_sub(1) } else { applied },
    };
    Ok((metrics, ctl.log))
}

/// Runs every repetition; output is ordered by repetition index.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioRun> {
    s.validate()?;
    let reps: Vec<usize> = (0..s.repetitions).collect();
    let results = par::map(&reps, |&rep| run_episode(s, rep));
    let mut run = ScenarioRun { metrics: Vec::new(), logs: Vec::new() };
    for r in results {
        let (m, l) = r?;
        run.metrics.push(m);
        run.logs.push(l);
    }
    Ok(run)
}
