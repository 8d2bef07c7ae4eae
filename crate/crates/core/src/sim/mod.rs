//! Deterministic kinematic grab-and-lift environment.
//!
//! The world is a table with a target cube and a distractor cube, and a
//! four-joint right arm (shoulder pitch, shoulder roll, elbow roll, hand)
//! mounted at `shoulder_height`. Grasping is kinematic: once the hand is
//! closed past `hand_close_threshold` within `grasp_radius` of the cube, the
//! cube is rigidly attached to the gripper until the hand opens again.

mod config;
mod expert;
pub mod kinematics;
mod render;

use rand::Rng as _;

pub use config::EnvConfig;
pub use expert::scripted_expert;
pub use kinematics::{forward_kinematics, gripper_position, Vec3};
pub use render::{render, Camera};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng;

const RESET_TRIES: usize = 100;

/// Joint angles in degrees, each within `[0, 180]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointAngles {
    pub shoulder_pitch: f64,
    pub shoulder_roll: f64,
    pub elbow_roll: f64,
    pub hand: f64,
}

impl JointAngles {
    pub fn as_array(&self) -> [f64; 4] {
        [self.shoulder_pitch, self.shoulder_roll, self.elbow_roll, self.hand]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { shoulder_pitch: a[0], shoulder_roll: a[1], elbow_roll: a[2], hand: a[3] }
    }

    pub fn clamped(self) -> Self {
        Self::from_array(self.as_array().map(|v| v.clamp(0.0, 180.0)))
    }

    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|v| (0.0..=180.0).contains(v))
    }
}

/// Joint velocity command, each component in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action(pub [f64; 4]);

impl Action {
    /// Clamps components to `[-1, 1]`; NaN becomes 0.
    pub fn new(components: [f64; 4]) -> Self {
        Self(components.map(|v| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) }))
    }

    pub fn zero() -> Self {
        Self([0.0; 4])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub joints: JointAngles,
    pub cube_position: Vec3,
    pub grasped: bool,
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoneReason {
    Success,
    Timeout,
    Running,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Image,
    pub ground_truth_success: bool,
    pub done: bool,
    pub done_reason: DoneReason,
}

/// Grasped with the cube at or above the lift height.
pub fn is_success(state: &WorldState, config: &EnvConfig) -> bool {
    state.grasped && state.cube_position[2] >= config.table_height + config.lift_height
}

pub fn is_done(state: &WorldState, config: &EnvConfig) -> bool {
    is_success(state, config) || state.step_index >= config.max_steps
}

/// Seeded reset: jittered rest pose, cube uniform over the spawn rectangle
/// restricted to the arm's reach.
pub fn reset(config: &EnvConfig, episode_seed: u64) -> Result<WorldState> {
    config.validate()?;
    let mut r = rng::stream(episode_seed, 0x0072_6573_6574);
    let j = config.rest_jitter;
    let mut jitter = |nominal: f64| {
        let offset = if j > 0.0 { r.random_range(-j..=j) } else { 0.0 };
        (nominal + offset).clamp(0.0, 180.0)
    };
    let joints = JointAngles {
        shoulder_pitch: jitter(config.rest_shoulder_pitch),
        shoulder_roll: jitter(config.rest_shoulder_roll),
        elbow_roll: jitter(config.rest_elbow_roll),
        hand: jitter(config.rest_hand),
    };
    let shoulder = kinematics::shoulder_position(config);
    for _ in 0..RESET_TRIES {
        let x = sample(&mut r, config.cube_x_min, config.cube_x_max);
        let y = sample(&mut r, config.cube_y_min, config.cube_y_max);
        let cube = [x, y, config.cube_rest_z()];
        if kinematics::distance(cube, shoulder) <= config.reach() {
            return Ok(WorldState { joints, cube_position: cube, grasped: false, step_index: 0 });
        }
    }
    Err(Error::Config(format!("no reachable cube placement after {RESET_TRIES} tries")))
}

fn sample(r: &mut rng::Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        r.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Advances one control step.
pub fn step(state: &WorldState, action: &Action, config: &EnvConfig) -> Result<(WorldState, StepResult)> {
    let next = advance(state, action, config)?;
    let observation = render(&next, config);
    let success = is_success(&next, config);
    let done_reason = if success {
        DoneReason::Success
    } else if next.step_index >= config.max_steps {
        DoneReason::Timeout
    } else {
        DoneReason::Running
    };
    let result = StepResult {
        observation,
        ground_truth_success: success,
        done: done_reason != DoneReason::Running,
        done_reason,
    };
    Ok((next, result))
}

/// State transition without rendering.
pub fn advance(state: &WorldState, action: &Action, config: &EnvConfig) -> Result<WorldState> {
    if is_done(state, config) {
        return Err(Error::Usage("step called on a finished episode".into()));
    }
    Ok(transition(state, action, config))
}

/// Kinematic update with no episode bookkeeping checks.
pub(crate) fn transition(state: &WorldState, action: &Action, config: &EnvConfig) -> WorldState {
    let action = Action::new(action.0);
    let mut joints = state.joints.as_array();
    for (angle, a) in joints.iter_mut().zip(action.0) {
        *angle = (*angle + a * config.omega_max).clamp(0.0, 180.0);
    }
    let joints = JointAngles::from_array(joints);
    let gripper = gripper_position(&joints, config);
    let hand_closed = joints.hand >= config.hand_close_threshold;
    let mut cube = state.cube_position;
    let mut grasped = state.grasped;
    if grasped && !hand_closed {
        // released: the cube drops onto the table below the gripper
        grasped = false;
        cube = [
            gripper[0].clamp(config.table_near_x, config.table_far_x),
            gripper[1],
            config.cube_rest_z(),
        ];
    } else if !grasped && hand_closed && kinematics::distance(gripper, cube) <= config.grasp_radius {
        grasped = true;
    }
    if grasped {
        cube = gripper;
    }
    WorldState { joints, cube_position: cube, grasped, step_index: state.step_index + 1 }
}

/// Stateful convenience wrapper around [`reset`] and [`step`].
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    state: WorldState,
}

impl Env {
    pub fn new(config: EnvConfig, episode_seed: u64) -> Result<Self> {
        let state = reset(&config, episode_seed)?;
        Ok(Self { config, state })
    }

    pub fn reset(&mut self, episode_seed: u64) -> Result<Image> {
        self.state = reset(&self.config, episode_seed)?;
        Ok(render(&self.state, &self.config))
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult> {
        let (next, result) = step(&self.state, action, &self.config)?;
        self.state = next;
        Ok(result)
    }

    pub fn observe(&self) -> Image {
        render(&self.state, &self.config)
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn is_done(&self) -> bool {
        is_done(&self.state, &self.config)
    }
}
