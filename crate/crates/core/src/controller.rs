//! Closed-loop object control: replan from the current observation every
//! tick, execute a single mode step, adapt the rotational step size, and
//! run translational recovery whenever the object leaves the workspace
//! center. Translation to the goal position runs after orientation.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{build_goal_manifold, GoalManifoldIndex};
use crate::planner::{so3_plan_with_index, translation_plan, ModeAction, PlanningFailure};
use crate::so3::{dist_r, dist_t, Pose, Rot3, Vec3};
use crate::DEG;

/// Executes mode steps. `mode_action` returns once the step has completed.
pub trait Plant {
    fn mode_action(&mut self, action: &ModeAction) -> Result<()>;
    /// Simulated or wall time since the start of the episode, seconds.
    fn clock(&self) -> f64;
}

/// Pose source. Simulated trackers read ground truth from the plant;
/// hardware trackers can ignore it.
pub trait Tracker<P: ?Sized> {
    fn perceive(&mut self, plant: &P) -> Pose;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlParams {
    pub rho: f64,
    pub sigma_r: f64,
    pub sigma_t: f64,
    pub tau_r: f64,
    pub tau_t: f64,
    pub lambda: f64,
    pub t_center: Vec3,
    pub sigma_r_bounds: (f64, f64),
    pub max_iterations: usize,
    /// Tracker frames averaged into one observation. A 60 Hz tracker
    /// delivers 30 frames per half-second step.
    pub perception_frames: usize,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            rho: 0.2,
            sigma_r: 2.0 * DEG,
            sigma_t: 0.003,
            tau_r: 0.1,
            tau_t: 0.005,
            lambda: 0.1,
            t_center: Vec3::ZERO,
            sigma_r_bounds: (0.5 * DEG, 5.0 * DEG),
            max_iterations: 2000,
            perception_frames: 30,
        }
    }
}

impl ControlParams {
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        let (lo, hi) = self.sigma_r_bounds;
        if !(self.tau_r > 0.0 && self.tau_t > 0.0) {
            return fail("goal thresholds must be positive");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail("lambda must lie in [0, 1]");
        }
        if !(lo > 0.0 && lo <= hi && hi <= std::f64::consts::PI) {
            return fail("step bounds must satisfy 0 < min <= max <= π");
        }
        if !(self.sigma_r >= lo && self.sigma_r <= hi) {
            return fail("initial rotational step outside its bounds");
        }
        if !(self.sigma_t > 0.0) {
            return fail("translational step must be positive");
        }
        if !(self.rho >= self.sigma_r) {
            return fail("connection threshold must be at least the rotational step");
        }
        if !self.t_center.is_finite() {
            return fail("workspace center must be finite");
        }
        if self.max_iterations == 0 {
            return fail("iteration budget must be positive");
        }
        if self.perception_frames == 0 {
            return fail("need at least one perception frame");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    OrientationControl,
    Recovery,
    TranslationControl,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: f64,
    pub phase: Phase,
    pub pose: Pose,
    pub action: Option<ModeAction>,
    #[serde(rename = "sigma_R")]
    pub sigma_r: f64,
    pub replan_count: usize,
}

/// One entry per control tick, in execution order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub entries: Vec<LogEntry>,
}

impl TrajectoryRecord {
    pub fn actions(&self) -> impl Iterator<Item = &ModeAction> {
        self.entries.iter().filter_map(|e| e.action.as_ref())
    }

    /// Number of maximal runs of consecutive `Recovery` entries.
    pub fn recovery_phases(&self) -> usize {
        let mut count = 0;
        let mut inside = false;
        for e in &self.entries {
            let rec = e.phase == Phase::Recovery;
            if rec && !inside {
                count += 1;
            }
            inside = rec;
        }
        count
    }
}

/// `clamp(σ + λ(σ − δ), bounds)`.
pub fn adapt_step(sigma: f64, delta: f64, lambda: f64, bounds: (f64, f64)) -> f64 {
    (sigma + lambda * (sigma - delta)).clamp(bounds.0, bounds.1)
}

/// First orientation step of a fresh plan from `current`.
///
/// Plans connect within ρ, or within the tighter `min(τ_R, ρ)` once
/// `fine` is set. A plan that connects without moving (the observation is
/// already within ρ of the goal but outside τ_R) is retried at the tighter
/// threshold, and a failed tight plan falls back to ρ.
pub fn next_orientation_action(
    current: &Pose,
    index: &GoalManifoldIndex,
    params: &ControlParams,
    sigma_r: f64,
    fine: bool,
) -> Result<ModeAction, PlanningFailure> {
    let tight = params.tau_r.min(params.rho);
    if fine {
        if let Ok(plan) = so3_plan_with_index(current.r, index, tight, sigma_r) {
            if let Some(a) = plan.first() {
                return Ok(*a);
            }
        }
    }
    let plan = so3_plan_with_index(current.r, index, params.rho, sigma_r)?;
    if let Some(a) = plan.first() {
        return Ok(*a);
    }
    let plan = so3_plan_with_index(current.r, index, tight, sigma_r)?;
    plan.first().copied().ok_or(PlanningFailure::ScheduleExhausted)
}

/// Mean of `frames` consecutive tracker readings.
pub fn observe<P, T: Tracker<P>>(tracker: &mut T, plant: &P, frames: usize) -> Pose {
    if frames <= 1 {
        return tracker.perceive(plant);
    }
    let mut rots = Vec::with_capacity(frames);
    let mut sum = [0.0; 3];
    for _ in 0..frames {
        let p = tracker.perceive(plant);
        for (acc, v) in sum.iter_mut().zip(p.t.to_array()) {
            *acc += v;
        }
        rots.push(p.r);
    }
    let n = frames as f64;
    let t = Vec3::new(sum[0] / n, sum[1] / n, sum[2] / n);
    let r = Rot3::chordal_mean(&rots).unwrap_or(rots[0]);
    Pose::new(t, r)
}

/// One greedy translation step toward the workspace center, then perceive.
/// Returns `None` when no controllable axis can reduce the deviation.
pub fn recovery_step<P: Plant, T: Tracker<P>>(
    current: Vec3,
    params: &ControlParams,
    plant: &mut P,
    tracker: &mut T,
) -> Result<Option<(ModeAction, Pose)>> {
    let plan = translation_plan(current, params.t_center, params.sigma_t)?;
    let Some(action) = plan.first().copied() else {
        return Ok(None);
    };
    plant.mode_action(&action)?;
    Ok(Some((action, observe(tracker, plant, params.perception_frames))))
}

/// Stateful driver of the loop. Keeps the log, the adapted step size and the
/// goal manifold across consecutive goals.
#[derive(Debug, Clone)]
pub struct Controller {
    pub params: ControlParams,
    pub sigma_r: f64,
    pub log: TrajectoryRecord,
    pub replans: usize,
    pub index_builds: usize,
    /// Wall time spent inside the rotation planner.
    pub plan_time: Duration,
    index: Option<GoalManifoldIndex>,
    /// Observation that ended the most recent orientation loop.
    pub orientation_exit: Option<Pose>,
    ticks: usize,
}

impl Controller {
    pub fn new(params: ControlParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            sigma_r: params.sigma_r,
            params,
            log: TrajectoryRecord::default(),
            replans: 0,
            index_builds: 0,
            plan_time: Duration::ZERO,
            index: None,
            orientation_exit: None,
            ticks: 0,
        })
    }

    fn index_for(&mut self, goal: &Pose) -> Result<GoalManifoldIndex> {
        match &self.index {
            Some(idx) if idx.goal() == goal.r => Ok(idx.clone()),
            _ => {
                let idx = build_goal_manifold(goal.r, self.params.sigma_r)?;
                self.index_builds += 1;
                self.index = Some(idx.clone());
                Ok(idx)
            }
        }
    }

    fn record(&mut self, t: f64, phase: Phase, pose: Pose, action: Option<ModeAction>) {
        self.log.entries.push(LogEntry { t, phase, pose, action, sigma_r: self.sigma_r, replan_count: self.replans });
    }

    fn tick(&mut self) -> Result<()> {
        self.ticks += 1;
        if self.ticks > self.params.max_iterations {
            return Err(Error::IterationBudgetExceeded(self.params.max_iterations));
        }
        Ok(())
    }

    fn execute<P: Plant, T: Tracker<P>>(
        &mut self,
        action: ModeAction,
        phase: Phase,
        plant: &mut P,
        tracker: &mut T,
    ) -> Result<Pose> {
        self.tick()?;
        let mut action = action;
        action.timestamp = plant.clock();
        plant.mode_action(&action)?;
        let obs = observe(tracker, plant, self.params.perception_frames);
        self.record(plant.clock(), phase, obs, Some(action));
        Ok(obs)
    }

    fn recover<P: Plant, T: Tracker<P>>(&mut self, mut obs: Pose, plant: &mut P, tracker: &mut T) -> Result<Pose> {
        while dist_t(obs.t, self.params.t_center) > self.params.tau_t {
            let plan = translation_plan(obs.t, self.params.t_center, self.params.sigma_t)?;
            let Some(action) = plan.first().copied() else { break };
            obs = self.execute(action, Phase::Recovery, plant, tracker)?;
        }
        Ok(obs)
    }

    /// Drives the object to `goal`: orientation first (with recovery), then
    /// translation. Returns a final perception of the object.
    pub fn run<P: Plant, T: Tracker<P>>(&mut self, goal: &Pose, plant: &mut P, tracker: &mut T) -> Result<Pose> {
        self.ticks = 0;
        let index = self.index_for(goal)?;
        let mut obs = observe(tracker, plant, self.params.perception_frames);

        // Latches once the object first comes within ρ of the goal, so the
        // final approach does not alternate between the two thresholds.
        let mut fine = false;
        loop {
            let err = dist_r(&goal.r, &obs.r);
            if err <= self.params.tau_r {
                break;
            }
            fine |= err <= self.params.rho;
            let t0 = Instant::now();
            let action = next_orientation_action(&obs, &index, &self.params, self.sigma_r, fine);
            self.plan_time += t0.elapsed();
            let action = action?;
            self.replans += 1;
            let next = self.execute(action, Phase::OrientationControl, plant, tracker)?;
            let delta = dist_r(&next.r, &obs.r);
            self.sigma_r = adapt_step(self.sigma_r, delta, self.params.lambda, self.params.sigma_r_bounds);
            if let Some(last) = self.log.entries.last_mut() {
                last.sigma_r = self.sigma_r;
            }
            obs = self.recover(next, plant, tracker)?;
        }
        self.orientation_exit = Some(obs);

        while dist_t(goal.t, obs.t) > self.params.tau_t {
            let plan = translation_plan(obs.t, goal.t, self.params.sigma_t)?;
            let Some(action) = plan.first().copied() else { break };
            obs = self.execute(action, Phase::TranslationControl, plant, tracker)?;
        }

        let fin = observe(tracker, plant, self.params.perception_frames);
        self.record(plant.clock(), Phase::Done, fin, None);
        Ok(fin)
    }
}

/// Runs the loop for a single goal and returns the final perceived pose and
/// the complete log.
pub fn object_control<P: Plant, T: Tracker<P>>(
    goal: &Pose,
    params: &ControlParams,
    plant: &mut P,
    tracker: &mut T,
) -> Result<(Pose, TrajectoryRecord)> {
    let mut c = Controller::new(params.clone())?;
    let fin = c.run(goal, plant, tracker)?;
    Ok((fin, c.log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn adapt_step_examples() {
        let b = (0.5 * DEG, 5.0 * DEG);
        assert_abs_diff_eq!(adapt_step(2.0 * DEG, 2.0 * DEG, 0.1, b), 2.0 * DEG, epsilon = 1e-15);
        assert_abs_diff_eq!(adapt_step(2.0 * DEG, 1.0 * DEG, 0.1, b), 2.1 * DEG, epsilon = 1e-15);
        assert_eq!(adapt_step(5.0 * DEG, 0.0, 0.5, b), 5.0 * DEG);
        assert_eq!(adapt_step(0.5 * DEG, 1.0, 1.0, b), 0.5 * DEG);
    }

    #[test]
    fn default_params_are_valid() {
        ControlParams::default().validate().unwrap();
        let base = ControlParams::default;
        assert!(ControlParams { lambda: 1.5, ..base() }.validate().is_err());
        assert!(ControlParams { rho: 0.01, ..base() }.validate().is_err());
        assert!(ControlParams { sigma_r: 6.0 * DEG, ..base() }.validate().is_err());
    }

    #[test]
    fn recovery_phase_count() {
        let mk = |phase| LogEntry { t: 0.0, phase, pose: Pose::default(), action: None, sigma_r: 0.0, replan_count: 0 };
        use Phase::*;
        let log = TrajectoryRecord {
            entries: [OrientationControl, Recovery, Recovery, OrientationControl, Recovery, TranslationControl, Done]
                .into_iter()
                .map(mk)
                .collect(),
        };
        assert_eq!(log.recovery_phases(), 2);
    }
}
