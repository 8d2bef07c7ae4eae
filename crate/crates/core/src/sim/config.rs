//! Environment configuration and its `key = value` text format.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Every
//! field of [`EnvConfig`] is addressable by its field name; unknown keys and
//! duplicate keys are errors.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// meters
    pub upper_arm_len: f64,
    pub forearm_len: f64,
    pub shoulder_height: f64,
    pub table_height: f64,
    /// Near edge of the table along the forward axis.
    pub table_near_x: f64,
    pub table_far_x: f64,
    pub cube_side: f64,
    pub grasp_radius: f64,
    /// degrees
    pub hand_close_threshold: f64,
    pub lift_height: f64,
    pub max_steps: usize,
    /// degrees per step at |action| = 1
    pub omega_max: f64,
    pub camera_width: usize,
    pub camera_height: usize,
    /// Cube spawn rectangle on the table top (meters).
    pub cube_x_min: f64,
    pub cube_x_max: f64,
    pub cube_y_min: f64,
    pub cube_y_max: f64,
    pub distractor_x: f64,
    pub distractor_y: f64,
    /// Nominal rest pose (degrees) and the half-width of its uniform jitter.
    pub rest_shoulder_pitch: f64,
    pub rest_shoulder_roll: f64,
    pub rest_elbow_roll: f64,
    pub rest_hand: f64,
    pub rest_jitter: f64,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            upper_arm_len: 0.18,
            forearm_len: 0.22,
            shoulder_height: 0.92,
            table_height: 0.75,
            table_near_x: 0.15,
            table_far_x: 0.60,
            cube_side: 0.05,
            grasp_radius: 0.06,
            hand_close_threshold: 120.0,
            lift_height: 0.10,
            max_steps: 50,
            omega_max: 8.0,
            camera_width: 32,
            camera_height: 24,
            cube_x_min: 0.29,
            cube_x_max: 0.33,
            cube_y_min: -0.02,
            cube_y_max: 0.02,
            distractor_x: 0.32,
            distractor_y: 0.14,
            rest_shoulder_pitch: 22.0,
            rest_shoulder_roll: 0.0,
            rest_elbow_roll: 65.0,
            rest_hand: 110.0,
            rest_jitter: 4.0,
            seed: 0,
        }
    }
}

macro_rules! fields {
    ($mac:ident) => {
        $mac! {
            f64: upper_arm_len, forearm_len, shoulder_height, table_height, table_near_x, table_far_x,
                cube_side, grasp_radius, hand_close_threshold, lift_height, omega_max,
                cube_x_min, cube_x_max, cube_y_min, cube_y_max, distractor_x, distractor_y,
                rest_shoulder_pitch, rest_shoulder_roll, rest_elbow_roll, rest_hand, rest_jitter;
            usize: max_steps, camera_width, camera_height;
            u64: seed
        }
    };
}

macro_rules! impl_kv {
    (f64: $($f:ident),*; usize: $($u:ident),*; u64: $($s:ident),*) => {
        impl EnvConfig {
            /// Every addressable key, in file order.
            pub const KEYS: &'static [&'static str] = &[$(stringify!($f),)* $(stringify!($u),)* $(stringify!($s),)*];

            /// Sets one field from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                let bad = |e: &dyn std::fmt::Display| Error::Config(format!("{key}: cannot parse {value:?}: {e}"));
                match key {
                    $(stringify!($f) => self.$f = value.parse().map_err(|e| bad(&e))?,)*
                    $(stringify!($u) => self.$u = value.parse().map_err(|e| bad(&e))?,)*
                    $(stringify!($s) => self.$s = value.parse().map_err(|e| bad(&e))?,)*
                    _ => return Err(Error::Config(format!("unknown key {key:?}"))),
                }
                Ok(())
            }

            pub fn to_kv_string(&self) -> String {
                let mut out = String::new();
                $(let _ = writeln!(out, "{} = {:?}", stringify!($f), self.$f);)*
                $(let _ = writeln!(out, "{} = {}", stringify!($u), self.$u);)*
                $(let _ = writeln!(out, "{} = {}", stringify!($s), self.$s);)*
                out
            }
        }
    };
}

fields!(impl_kv);

impl EnvConfig {
    pub fn reach(&self) -> f64 {
        self.upper_arm_len + self.forearm_len
    }

    /// Cube center height when resting on the table.
    pub fn cube_rest_z(&self) -> f64 {
        self.table_height + self.cube_side / 2.0
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.camera_width, self.camera_height)
    }

    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.camera_width = width;
        self.camera_height = height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("upper_arm_len", self.upper_arm_len),
            ("forearm_len", self.forearm_len),
            ("shoulder_height", self.shoulder_height),
            ("table_height", self.table_height),
            ("cube_side", self.cube_side),
            ("grasp_radius", self.grasp_radius),
            ("lift_height", self.lift_height),
            ("omega_max", self.omega_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.max_steps < 1 {
            return Err(Error::Config("max_steps must be >= 1".into()));
        }
        if self.camera_width < 8 || self.camera_height < 8 {
            return Err(Error::Config(format!(
                "camera resolution must be at least 8x8, got {}x{}",
                self.camera_width, self.camera_height
            )));
        }
        if !(0.0..=180.0).contains(&self.hand_close_threshold) {
            return Err(Error::Config("hand_close_threshold must be within [0, 180]".into()));
        }
        if self.cube_x_min > self.cube_x_max || self.cube_y_min > self.cube_y_max {
            return Err(Error::Config("empty cube spawn rectangle".into()));
        }
        if self.table_near_x >= self.table_far_x {
            return Err(Error::Config("table_near_x must be < table_far_x".into()));
        }
        if !(self.rest_jitter >= 0.0) {
            return Err(Error::Config("rest_jitter must be >= 0".into()));
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
            self.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        self.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
