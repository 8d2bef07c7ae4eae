use super::config::EnvConfig;
use super::kinematics::{distance, gripper_position};
use super::{is_success, Action, JointAngles, WorldState};

/// Per-joint candidate action magnitudes for the greedy search.
const CANDIDATES: [f64; 9] = [-1.0, -0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5, 1.0];

fn nudge(joints: JointAngles, index: usize, a: f64, config: &EnvConfig) -> JointAngles {
    let mut arr = joints.as_array();
    arr[index] = (arr[index] + a * config.omega_max).clamp(0.0, 180.0);
    JointAngles::from_array(arr)
}

/// Scripted controller used for dataset generation and as a solvability
/// oracle.
///
/// Before the grasp it runs a greedy coordinate search over the three arm
/// joints that minimizes the gripper-to-cube distance, closing the hand once
/// the gripper is within three grasp radii. Once grasped it raises the
/// shoulder pitch, picking the magnitude that lifts the gripper most.
pub fn scripted_expert(state: &WorldState, config: &EnvConfig) -> Action {
    if is_success(state, config) {
        return Action::zero();
    }
    if state.grasped {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for a in [1.0, 0.5, 0.25, 0.1] {
            let z = gripper_position(&nudge(state.joints, 0, a, config), config)[2];
            if z > best.0 {
                best = (z, a);
            }
        }
        return Action::new([best.1, 0.0, 0.0, 1.0]);
    }

    let mut joints = state.joints;
    let mut action = [0.0; 4];
    for (index, slot) in action.iter_mut().enumerate().take(3) {
        let mut best = (f64::INFINITY, 0.0, joints);
        for a in CANDIDATES {
            let candidate = nudge(joints, index, a, config);
            let d = distance(gripper_position(&candidate, config), state.cube_position);
            if d < best.0 - 1e-12 {
                best = (d, a, candidate);
            }
        }
        *slot = best.1;
        joints = best.2;
    }
    let d = distance(gripper_position(&joints, config), state.cube_position);
    action[3] = if d <= 3.0 * config.grasp_radius { 1.0 } else { 0.0 };
    Action::new(action)
}
