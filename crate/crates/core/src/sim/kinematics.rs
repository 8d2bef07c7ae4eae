//! Forward kinematics of the simplified right arm.
//!
//! Shoulder-relative frame: x forward, y left, z up. At the zero pose every
//! joint reads 0 and the arm hangs straight down. `shoulder_pitch` swings the
//! upper arm forward and up in the sagittal plane, `shoulder_roll` swings it
//! outward to the robot's right (negative y), and `elbow_roll` bends the
//! forearm toward the arm's local forward axis.

use super::config::EnvConfig;
use super::JointAngles;

pub type Vec3 = [f64; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn norm(a: Vec3) -> f64 {
    distance(a, [0.0; 3])
}

/// Elbow and gripper positions relative to the shoulder.
pub fn arm_points(joints: &JointAngles, config: &EnvConfig) -> (Vec3, Vec3) {
    let (sp, cp) = joints.shoulder_pitch.to_radians().sin_cos();
    let (sr, cr) = joints.shoulder_roll.to_radians().sin_cos();
    let (se, ce) = joints.elbow_roll.to_radians().sin_cos();
    let upper_dir = [sp * cr, -sr, -cp * cr];
    let bend_dir = [cp, 0.0, sp];
    let fore_dir = add(scale(upper_dir, ce), scale(bend_dir, se));
    let elbow = scale(upper_dir, config.upper_arm_len);
    let gripper = add(elbow, scale(fore_dir, config.forearm_len));
    (elbow, gripper)
}

/// Gripper center with the shoulder at the origin.
pub fn forward_kinematics(joints: &JointAngles, config: &EnvConfig) -> Vec3 {
    arm_points(joints, config).1
}

/// Shoulder position in the world frame (floor at z = 0).
pub fn shoulder_position(config: &EnvConfig) -> Vec3 {
    [0.0, 0.0, config.shoulder_height]
}

/// Gripper center in the world frame.
pub fn gripper_position(joints: &JointAngles, config: &EnvConfig) -> Vec3 {
    add(shoulder_position(config), forward_kinematics(joints, config))
}
