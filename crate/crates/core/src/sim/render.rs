//! Synthetic grayscale camera.
//!
//! Orthographic projection onto a plane facing the table from above the
//! shoulder, tilted down by [`Camera::TILT_DEG`]. Image right is the robot's
//! right (negative y). Primitives are painted in a fixed order with later ones
//! overwriting earlier ones, on a supersampled canvas that is then box-averaged
//! to the output resolution.

use super::config::EnvConfig;
use super::kinematics::{self, Vec3};
use super::WorldState;
use crate::image::Image;

const BACKGROUND: f64 = 0.05;
const TABLE: f64 = 0.35;
const CUBE: f64 = 0.9;
const LINK: f64 = 0.6;
const GRIPPER: f64 = 0.75;

const LINK_HALF_WIDTH: f64 = 0.012;
const GRIPPER_OPEN_RADIUS: f64 = 0.03;

/// Fixed viewing geometry; the horizontal span follows the image aspect.
#[derive(Debug, Clone, Copy)]
pub struct Camera {
    u_min: f64,
    v_max: f64,
    span_u: f64,
    span_v: f64,
}

impl Camera {
    pub const TILT_DEG: f64 = 30.0;
    const V_MIN: f64 = 0.60;
    const V_MAX: f64 = 1.05;
    /// Supersampled canvas width the renderer aims for.
    const CANVAS_TARGET: usize = 160;

    pub fn new(width: usize, height: usize) -> Self {
        let span_v = Self::V_MAX - Self::V_MIN;
        let span_u = span_v * width as f64 / height as f64;
        Self { u_min: -span_u / 2.0, v_max: Self::V_MAX, span_u, span_v }
    }

    /// World point to image-plane coordinates `(u, v)` in meters.
    pub fn project(p: Vec3) -> (f64, f64) {
        let (s, c) = Self::TILT_DEG.to_radians().sin_cos();
        (-p[1], p[0] * s + p[2] * c)
    }

    /// Samples per pixel along each axis.
    pub fn supersampling(width: usize) -> usize {
        Self::CANVAS_TARGET.div_ceil(width).max(1)
    }
}

struct Canvas {
    w: usize,
    h: usize,
    cam: Camera,
    data: Vec<f64>,
}

impl Canvas {
    fn sample_uv(&self, x: usize, y: usize) -> (f64, f64) {
        let u = self.cam.u_min + (x as f64 + 0.5) / self.w as f64 * self.cam.span_u;
        let v = self.cam.v_max - (y as f64 + 0.5) / self.h as f64 * self.cam.span_v;
        (u, v)
    }

    /// Canvas index range covering `[lo, hi]` in u (x) or v (y).
    fn x_range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let f = |u: f64| (u - self.cam.u_min) / self.cam.span_u * self.w as f64;
        clip_range(f(lo).floor(), f(hi).ceil(), self.w)
    }

    fn y_range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let f = |v: f64| (self.cam.v_max - v) / self.cam.span_v * self.h as f64;
        clip_range(f(hi).floor(), f(lo).ceil(), self.h)
    }

    fn paint<F: Fn(f64, f64) -> bool>(&mut self, bounds: (f64, f64, f64, f64), value: f64, inside: F) {
        let (u0, u1, v0, v1) = bounds;
        let (x0, x1) = self.x_range(u0, u1);
        let (y0, y1) = self.y_range(v0, v1);
        for y in y0..y1 {
            for x in x0..x1 {
                let (u, v) = self.sample_uv(x, y);
                if inside(u, v) {
                    self.data[y * self.w + x] = value;
                }
            }
        }
    }

    fn band(&mut self, v0: f64, v1: f64, value: f64) {
        let (y0, y1) = self.y_range(v0, v1);
        for y in y0..y1 {
            let (_, v) = self.sample_uv(0, y);
            if v >= v0 && v <= v1 {
                self.data[y * self.w..(y + 1) * self.w].fill(value);
            }
        }
    }

    fn square(&mut self, center: (f64, f64), half: f64, value: f64) {
        let (cu, cv) = center;
        let b = (cu - half, cu + half, cv - half, cv + half);
        self.paint(b, value, |u, v| (u - cu).abs() <= half && (v - cv).abs() <= half);
    }

    fn disc(&mut self, center: (f64, f64), radius: f64, value: f64) {
        let (cu, cv) = center;
        let b = (cu - radius, cu + radius, cv - radius, cv + radius);
        let r2 = radius * radius;
        self.paint(b, value, |u, v| (u - cu).powi(2) + (v - cv).powi(2) <= r2);
    }

    fn segment(&mut self, a: (f64, f64), b: (f64, f64), half_width: f64, value: f64) {
        let bounds = (
            a.0.min(b.0) - half_width,
            a.0.max(b.0) + half_width,
            a.1.min(b.1) - half_width,
            a.1.max(b.1) + half_width,
        );
        let (du, dv) = (b.0 - a.0, b.1 - a.1);
        let len2 = du * du + dv * dv;
        let hw2 = half_width * half_width;
        self.paint(bounds, value, |u, v| {
            let t = if len2 > 0.0 { (((u - a.0) * du + (v - a.1) * dv) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let (pu, pv) = (a.0 + t * du - u, a.1 + t * dv - v);
            pu * pu + pv * pv <= hw2
        });
    }
}

fn clip_range(lo: f64, hi: f64, n: usize) -> (usize, usize) {
    let lo = lo.max(0.0).min(n as f64) as usize;
    let hi = hi.max(0.0).min(n as f64) as usize;
    (lo, hi.max(lo))
}

/// Renders the scene at the configured camera resolution.
pub fn render(state: &WorldState, config: &EnvConfig) -> Image {
    let (width, height) = config.resolution();
    let ss = Camera::supersampling(width);
    let cam = Camera::new(width, height);
    let mut canvas = Canvas { w: width * ss, h: height * ss, cam, data: vec![BACKGROUND; width * height * ss * ss] };

    let table_z = config.table_height;
    let near = Camera::project([config.table_near_x, 0.0, table_z]).1;
    let far = Camera::project([config.table_far_x, 0.0, table_z]).1;
    canvas.band(near, far, TABLE);

    let half = config.cube_side / 2.0;
    let distractor = [config.distractor_x, config.distractor_y, config.cube_rest_z()];
    canvas.square(Camera::project(distractor), half, CUBE);
    canvas.square(Camera::project(state.cube_position), half, CUBE);

    let shoulder = kinematics::shoulder_position(config);
    let (elbow, gripper) = kinematics::arm_points(&state.joints, config);
    let elbow = kinematics::add(shoulder, elbow);
    let gripper = kinematics::add(shoulder, gripper);
    let (s, e, g) = (Camera::project(shoulder), Camera::project(elbow), Camera::project(gripper));
    canvas.segment(s, e, LINK_HALF_WIDTH, LINK);
    canvas.segment(e, g, LINK_HALF_WIDTH, LINK);

    let closure = state.joints.hand.clamp(0.0, 180.0) / 180.0;
    let radius = GRIPPER_OPEN_RADIUS * (1.0 - 0.6 * closure);
    canvas.disc(g, radius, GRIPPER);

    let mut pixels = vec![0.0; width * height];
    let norm = 1.0 / (ss * ss) as f64;
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for sy in 0..ss {
                let row = (y * ss + sy) * canvas.w + x * ss;
                acc += canvas.data[row..row + ss].iter().sum::<f64>();
            }
            pixels[y * width + x] = (acc * norm).clamp(0.0, 1.0);
        }
    }
    Image::new(width, height, pixels).expect("renderer produces a valid image")
}
