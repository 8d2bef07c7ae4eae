//! Labeled capture sessions for training the success classifier.
//!
//! A session holds `n_success` images of the cube grasped and lifted and
//! `n_nonsuccess` images of everything else: half near misses around the
//! cube (including the cube held too low) and half arbitrary far poses.
//! Each session shifts the arm's pose distribution by its own joint offsets.
//!
//! File layout (`RWDS`, little-endian):
//!
//! ```text
//! "RWDS" | version u16 | width u16 | height u16 | session_count u16
//! per session: session_id u16 | image_count u32 | seed u64
//!   per image: label u8 (1 = Success, 0 = NonSuccess) | width*height pixel bytes
//! ```

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use rand::Rng as _;

use crate::binio::*;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng;
use crate::sim::{self, Action, EnvConfig, JointAngles, WorldState};

pub const MAGIC: [u8; 4] = *b"RWDS";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 12;
pub const SESSION_HEADER_BYTES: usize = 14;

pub const DEFAULT_SUCCESS: usize = 200;
pub const DEFAULT_NONSUCCESS: usize = 440;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    NonSuccess = 0,
    Success = 1,
}

impl Label {
    pub fn from_success(success: bool) -> Self {
        if success { Label::Success } else { Label::NonSuccess }
    }

    pub fn class_index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: Image,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSession {
    pub session_id: u16,
    pub seed: u64,
    pub images: Vec<LabeledImage>,
}

impl CaptureSession {
    /// `(success, non-success)` counts.
    pub fn composition(&self) -> (usize, usize) {
        let s = self.images.iter().filter(|i| i.label == Label::Success).count();
        (s, self.images.len() - s)
    }

    pub fn resolution(&self) -> Option<(usize, usize)> {
        self.images.first().map(|i| i.image.resolution())
    }
}

/// Whole-session train/validation/test partition.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<CaptureSession>,
    pub validation: Vec<CaptureSession>,
    pub test: Vec<CaptureSession>,
}

impl DatasetSplit {
    pub fn train_images(&self) -> impl Iterator<Item = &LabeledImage> {
        self.train.iter().flat_map(|s| s.images.iter())
    }

    pub fn image_counts(&self) -> (usize, usize, usize) {
        let count = |v: &[CaptureSession]| v.iter().map(|s| s.images.len()).sum();
        (count(&self.train), count(&self.validation), count(&self.test))
    }
}

/// A generated state and the label its ground-truth predicate implies.
#[derive(Debug, Clone)]
pub struct SourceState {
    pub state: WorldState,
    pub label: Label,
}

/// Per-session shift of the arm's pose distribution (degrees).
#[derive(Debug, Clone, Copy)]
struct SessionOffsets([f64; 3]);

impl SessionOffsets {
    fn draw(r: &mut rng::Rng) -> Self {
        Self([r.random_range(-5.0..=5.0), r.random_range(-3.0..=3.0), r.random_range(-5.0..=5.0)])
    }

    fn apply(&self, config: &EnvConfig) -> EnvConfig {
        let mut c = config.clone();
        c.rest_shoulder_pitch = (c.rest_shoulder_pitch + self.0[0]).clamp(0.0, 180.0);
        c.rest_shoulder_roll = (c.rest_shoulder_roll + self.0[1]).clamp(0.0, 180.0);
        c.rest_elbow_roll = (c.rest_elbow_roll + self.0[2]).clamp(0.0, 180.0);
        c
    }
}

const MAX_EXPERT_FAILURES: usize = 20;
const SUCCESS_VIEWS_PER_EPISODE: usize = 4;

/// Samples the source states of one session, in storage order (all Success
/// states first, then NonSuccess).
pub fn generate_session_states(
    config: &EnvConfig,
    seed: u64,
    n_success: usize,
    n_nonsuccess: usize,
) -> Result<Vec<SourceState>> {
    if n_success == 0 || n_nonsuccess == 0 {
        return Err(Error::Config("a session needs at least one image of each class".into()));
    }
    config.validate()?;
    let mut r = rng::stream(seed, 1);
    let offsets = SessionOffsets::draw(&mut r);
    let session_cfg = offsets.apply(config);

    let mut success = Vec::with_capacity(n_success);
    let mut approach: Vec<WorldState> = Vec::new();
    let mut failures = 0;
    let mut episode = 0u64;
    while success.len() < n_success {
        let (trajectory, solved) = expert_trajectory(&session_cfg, rng::derive_seed(seed, 1000 + episode))?;
        episode += 1;
        if !solved {
            failures += 1;
            if failures >= MAX_EXPERT_FAILURES {
                return Err(Error::Config("scripted expert cannot reach success in this environment".into()));
            }
            continue;
        }
        let (last, before) = trajectory.split_last().expect("non-empty trajectory");
        approach.extend(before.iter().cloned());
        let mut view = last.clone();
        success.push(view.clone());
        // other views of the lifted cube
        for _ in 1..SUCCESS_VIEWS_PER_EPISODE {
            if success.len() >= n_success {
                break;
            }
            for _ in 0..16 {
                let a = Action::new([
                    r.random_range(-0.4..=0.6),
                    r.random_range(-0.5..=0.5),
                    r.random_range(-0.5..=0.5),
                    1.0,
                ]);
                let candidate = sim::transition(&view, &a, &session_cfg);
                if sim::is_success(&candidate, &session_cfg) {
                    view = candidate;
                    success.push(view.clone());
                    break;
                }
            }
        }
    }

    // Near misses: half jittered approach states, a quarter with the cube
    // held at arbitrary low poses, a quarter held just under the lift height.
    let n_near = n_nonsuccess / 2;
    let n_jitter = n_near / 2;
    let n_held = n_near / 4;
    let mut non = Vec::with_capacity(n_nonsuccess);
    while non.len() < n_jitter {
        let base = &approach[r.random_range(0..approach.len())];
        let mut s = base.clone();
        let mut j = s.joints.as_array();
        for (k, angle) in j.iter_mut().enumerate() {
            let spread = if k == 3 { 30.0 } else { 8.0 };
            *angle = (*angle + r.random_range(-spread..=spread)).clamp(0.0, 180.0);
        }
        s.joints = JointAngles::from_array(j);
        if s.grasped {
            if s.joints.hand < session_cfg.hand_close_threshold {
                s.grasped = false;
                s.cube_position[2] = session_cfg.cube_rest_z();
            } else {
                s.cube_position = sim::gripper_position(&s.joints, &session_cfg);
            }
        }
        if !sim::is_success(&s, &session_cfg) {
            non.push(s);
        }
    }
    let o = offsets.0;
    while non.len() < n_jitter + n_held {
        let joints = JointAngles {
            shoulder_pitch: (r.random_range(0.0..=130.0) + o[0]).clamp(0.0, 180.0),
            shoulder_roll: (r.random_range(0.0..=60.0) + o[1]).clamp(0.0, 180.0),
            elbow_roll: (r.random_range(0.0..=150.0) + o[2]).clamp(0.0, 180.0),
            hand: r.random_range(session_cfg.hand_close_threshold..=180.0),
        };
        let s = held(&approach[0], joints, &session_cfg);
        if !sim::is_success(&s, &session_cfg) {
            non.push(s);
        }
    }
    while non.len() < n_near {
        let base = &success[r.random_range(0..success.len())];
        let mut j = base.joints;
        j.shoulder_pitch = (j.shoulder_pitch - r.random_range(1.0..=20.0)).clamp(0.0, 180.0);
        j.elbow_roll = (j.elbow_roll + r.random_range(-3.0..=3.0)).clamp(0.0, 180.0);
        let s = held(base, j, &session_cfg);
        if !sim::is_success(&s, &session_cfg) {
            non.push(s);
        }
    }
    while non.len() < n_nonsuccess {
        let base = sim::reset(&session_cfg, r.random())?;
        let joints = JointAngles {
            shoulder_pitch: (r.random_range(0.0..=110.0) + o[0]).clamp(0.0, 180.0),
            shoulder_roll: (r.random_range(0.0..=60.0) + o[1]).clamp(0.0, 180.0),
            elbow_roll: (r.random_range(0.0..=140.0) + o[2]).clamp(0.0, 180.0),
            hand: r.random_range(0.0..=180.0),
        };
        non.push(WorldState { joints, ..base });
    }

    let mut out: Vec<SourceState> =
        success.into_iter().map(|state| SourceState { label: Label::from_success(true), state }).collect();
    out.extend(non.into_iter().map(|state| SourceState { label: Label::NonSuccess, state }));
    debug_assert!(out.iter().all(|s| Label::from_success(sim::is_success(&s.state, &session_cfg)) == s.label));
    Ok(out)
}

/// `base` with the arm moved to `joints` and the cube held in the gripper.
fn held(base: &WorldState, joints: JointAngles, config: &EnvConfig) -> WorldState {
    WorldState { joints, cube_position: sim::gripper_position(&joints, config), grasped: true, step_index: base.step_index }
}

fn expert_trajectory(config: &EnvConfig, episode_seed: u64) -> Result<(Vec<WorldState>, bool)> {
    let mut state = sim::reset(config, episode_seed)?;
    let mut states = vec![state.clone()];
    while !sim::is_done(&state, config) {
        state = sim::advance(&state, &sim::scripted_expert(&state, config), config)?;
        states.push(state.clone());
    }
    let solved = sim::is_success(&state, config);
    Ok((states, solved))
}

/// Generates and renders one capture session at the configured camera
/// resolution. Pixels are quantized to 8 bits, matching the file format.
pub fn generate_session(
    config: &EnvConfig,
    session_id: u16,
    seed: u64,
    n_success: usize,
    n_nonsuccess: usize,
) -> Result<CaptureSession> {
    let states = generate_session_states(config, seed, n_success, n_nonsuccess)?;
    let images = states
        .iter()
        .map(|s| {
            let img = sim::render(&s.state, config);
            let q = Image::from_u8(img.width(), img.height(), &img.to_u8())?;
            Ok(LabeledImage { image: q, label: s.label })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CaptureSession { session_id, seed, images })
}

/// Seed used for session `session_id` under `base_seed`.
pub fn session_seed(base_seed: u64, session_id: u16) -> u64 {
    rng::derive_seed(base_seed, 0x5E55_0000 + u64::from(session_id))
}

/// Generates `count` sessions (ids `0..count`) on up to `workers` threads.
pub fn generate_sessions(
    config: &EnvConfig,
    count: u16,
    base_seed: u64,
    n_success: usize,
    n_nonsuccess: usize,
    workers: usize,
) -> Result<Vec<CaptureSession>> {
    let ids: Vec<u16> = (0..count).collect();
    let workers = workers.max(1);
    let chunks: Vec<&[u16]> = ids.chunks(ids.len().div_ceil(workers).max(1)).collect();
    let results: Vec<Result<Vec<CaptureSession>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|&id| generate_session(config, id, session_seed(base_seed, id), n_success, n_nonsuccess))
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("session worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(ids.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Deterministic split by session id: lowest ids train, then validation,
/// then test, in an 8:1:1 ratio (exactly 8/1/1 for ten sessions).
pub fn split(mut sessions: Vec<CaptureSession>) -> Result<DatasetSplit> {
    let mut seen = BTreeSet::new();
    for s in &sessions {
        if !seen.insert(s.session_id) {
            return Err(Error::Config(format!("duplicate session id {}", s.session_id)));
        }
    }
    let n = sessions.len();
    if n < 3 {
        return Err(Error::Config(format!("need at least 3 sessions to split, got {n}")));
    }
    sessions.sort_by_key(|s| s.session_id);
    let held_out = ((n as f64) / 10.0).round().max(1.0) as usize;
    let test = sessions.split_off(n - held_out);
    let validation = sessions.split_off(n - 2 * held_out);
    Ok(DatasetSplit { train: sessions, validation, test })
}

/// Exact file size for the given layout.
pub fn expected_file_size(width: usize, height: usize, sessions: usize, images: usize) -> usize {
    HEADER_BYTES + sessions * SESSION_HEADER_BYTES + images * (1 + width * height)
}

pub fn write_dataset<W: Write>(w: &mut W, sessions: &[CaptureSession]) -> Result<()> {
    let (width, height) = sessions
        .iter()
        .find_map(CaptureSession::resolution)
        .ok_or_else(|| Error::Config("cannot save a dataset without images".into()))?;
    for s in sessions {
        if s.images.iter().any(|i| i.image.resolution() != (width, height)) {
            return Err(Error::Inconsistent(format!("session {} mixes image resolutions", s.session_id)));
        }
    }
    w.write_all(&MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    w.write_u16::<LittleEndian>(checked_u16(width, "width")?)?;
    w.write_u16::<LittleEndian>(checked_u16(height, "height")?)?;
    w.write_u16::<LittleEndian>(checked_u16(sessions.len(), "session count")?)?;
    for s in sessions {
        w.write_u16::<LittleEndian>(s.session_id)?;
        w.write_u32::<LittleEndian>(checked_u32(s.images.len(), "image count")?)?;
        w.write_u64::<LittleEndian>(s.seed)?;
        for img in &s.images {
            w.write_u8(img.label as u8)?;
            w.write_all(&img.image.to_u8())?;
        }
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<Vec<CaptureSession>> {
    expect_magic(r, MAGIC)?;
    expect_version(r, VERSION)?;
    let width = read_u16(r, "width")? as usize;
    let height = read_u16(r, "height")? as usize;
    if width == 0 || height == 0 {
        return Err(Error::Inconsistent(format!("image dimensions {width}x{height}")));
    }
    let count = read_u16(r, "session count")? as usize;
    let mut sessions = Vec::with_capacity(count);
    let mut buf = vec![0u8; width * height];
    for _ in 0..count {
        let session_id = read_u16(r, "session id")?;
        let n = read_u32(r, "image count")? as usize;
        let seed = read_u64(r, "session seed")?;
        let mut images = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let label = match read_u8(r, "label")? {
                0 => Label::NonSuccess,
                1 => Label::Success,
                l => return Err(Error::Inconsistent(format!("invalid label byte {l}"))),
            };
            r.read_exact(&mut buf).map_err(truncated("pixels"))?;
            images.push(LabeledImage { image: Image::from_u8(width, height, &buf)?, label });
        }
        sessions.push(CaptureSession { session_id, seed, images });
    }
    expect_eof(r)?;
    Ok(sessions)
}

pub fn save_dataset(path: &Path, sessions: &[CaptureSession]) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, sessions)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Vec<CaptureSession>> {
    let bytes = std::fs::read(path)?;
    read_dataset(&mut bytes.as_slice())
}
