//! State encoders: raw pixels, PCA coefficients, and the reward window.

mod pca;
mod window;


use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use byteorder::{LittleEndian, WriteBytesExt};

use crate::binio::*;
use crate::error::{Error, Result};
use crate::image::Image;

pub use pca::{fit_pca, reconstruction_error, PcaBasis};
pub use window::RewardWindowBuffer;

/// Which state representation a policy consumes.
///
/// `width`/`height` are the resolution of the image the state is derived from:
/// the pixel grid itself, the image PCA was fitted on, or the renders the
/// reward classifier scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateSpec {
    Pixels { width: usize, height: usize },
    PcaImage { k: usize, width: usize, height: usize },
    RewardWindow { n: usize, width: usize, height: usize },
}

impl StateSpec {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.source_resolution();
        if w == 0 || h == 0 {
            return Err(Error::Config(format!("{self}: zero resolution")));
        }
        match *self {
            StateSpec::PcaImage { k: 0, .. } => Err(Error::Config("PCA state needs k >= 1".into())),
            StateSpec::RewardWindow { n: 0, .. } => Err(Error::Config("reward window needs n >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            StateSpec::Pixels { width, height } => width * height,
            StateSpec::PcaImage { k, .. } => k,
            StateSpec::RewardWindow { n, .. } => n,
        }
    }

    pub fn source_resolution(&self) -> (usize, usize) {
        match *self {
            StateSpec::Pixels { width, height }
            | StateSpec::PcaImage { width, height, .. }
            | StateSpec::RewardWindow { width, height, .. } => (width, height),
        }
    }

    /// Short row label for result tables.
    pub fn label(&self) -> String {
        match *self {
            StateSpec::Pixels { width, height } => format!("Pixels {width}x{height}"),
            StateSpec::PcaImage { k, .. } => format!("PCA {k} components"),
            StateSpec::RewardWindow { n, .. } => format!("Last {n} rewards"),
        }
    }

    /// 7-byte descriptor: tag u8, parameter u16, width u16, height u16.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let (tag, param) = match *self {
            StateSpec::Pixels { .. } => (0u8, 0),
            StateSpec::PcaImage { k, .. } => (1, k),
            StateSpec::RewardWindow { n, .. } => (2, n),
        };
        let (width, height) = self.source_resolution();
        w.write_u8(tag)?;
        w.write_u16::<LittleEndian>(checked_u16(param, "state parameter")?)?;
        w.write_u16::<LittleEndian>(checked_u16(width, "state width")?)?;
        w.write_u16::<LittleEndian>(checked_u16(height, "state height")?)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let tag = read_u8(r, "state tag")?;
        let param = read_u16(r, "state parameter")? as usize;
        let width = read_u16(r, "state width")? as usize;
        let height = read_u16(r, "state height")? as usize;
        let spec = match tag {
            0 if param == 0 => StateSpec::Pixels { width, height },
            1 => StateSpec::PcaImage { k: param, width, height },
            2 => StateSpec::RewardWindow { n: param, width, height },
            _ => return Err(Error::Inconsistent(format!("bad state descriptor tag {tag} param {param}"))),
        };
        spec.validate().map_err(|e| Error::Inconsistent(e.to_string()))?;
        Ok(spec)
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StateSpec::Pixels { width, height } => write!(f, "pixels:{width}x{height}"),
            StateSpec::PcaImage { k, width, height } => write!(f, "pca:{k}@{width}x{height}"),
            StateSpec::RewardWindow { n, width, height } => write!(f, "window:{n}@{width}x{height}"),
        }
    }
}

/// Parses `pixels:WxH`, `pca:K@WxH` or `window:N@WxH`.
impl FromStr for StateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse state spec {s:?}"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let parse_res = |r: &str| -> Result<(usize, usize)> {
            let (w, h) = r.split_once('x').ok_or_else(bad)?;
            Ok((w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?))
        };
        let spec = match kind {
            "pixels" => {
                let (width, height) = parse_res(rest)?;
                StateSpec::Pixels { width, height }
            }
            "pca" | "window" => {
                let (p, r) = rest.split_once('@').ok_or_else(bad)?;
                let p: usize = p.parse().map_err(|_| bad())?;
                let (width, height) = parse_res(r)?;
                if kind == "pca" {
                    StateSpec::PcaImage { k: p, width, height }
                } else {
                    StateSpec::RewardWindow { n: p, width, height }
                }
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Block-mean pooling to `width x height`; both factors must divide evenly.
pub fn downsample(image: &Image, width: usize, height: usize) -> Result<Image> {
    let (sw, sh) = image.resolution();
    if (sw, sh) == (width, height) {
        return Ok(image.clone());
    }
    if width == 0 || height == 0 || sw % width != 0 || sh % height != 0 {
        return Err(Error::Config(format!("cannot block-average {sw}x{sh} down to {width}x{height}")));
    }
    let (fx, fy) = (sw / width, sh / height);
    let scale = 1.0 / (fx * fy) as f64;
    let src = image.pixels();
    let mut out = vec![0.0; width * height];
    for (y, row) in out.chunks_mut(width).enumerate() {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for dy in 0..fy {
                let base = (y * fy + dy) * sw + x * fx;
                acc += src[base..base + fx].iter().sum::<f64>();
            }
            *o = (acc * scale).clamp(0.0, 1.0);
        }
    }
    Image::new(width, height, out)
}

/// Turns observations and reward windows into state vectors for one spec.
#[derive(Debug, Clone)]
pub struct StateEncoder {
    spec: StateSpec,
    basis: Option<Arc<PcaBasis>>,
}

impl StateEncoder {
    pub fn new(spec: StateSpec, basis: Option<Arc<PcaBasis>>) -> Result<Self> {
        spec.validate()?;
        match (spec, &basis) {
            (StateSpec::PcaImage { k, width, height }, Some(b)) => {
                if b.k() != k || b.dim() != width * height {
                    return Err(Error::Config(format!(
                        "{spec} does not match a basis with k = {} over {} pixels",
                        b.k(),
                        b.dim()
                    )));
                }
            }
            (StateSpec::PcaImage { .. }, None) => return Err(Error::Config(format!("{spec} needs a PCA basis"))),
            (_, Some(_)) => return Err(Error::Config(format!("{spec} takes no PCA basis"))),
            _ => {}
        }
        Ok(Self { spec, basis })
    }

    pub fn spec(&self) -> StateSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn basis(&self) -> Option<&PcaBasis> {
        self.basis.as_deref()
    }

    /// Whether the reward has to be pushed into a window before encoding.
    pub fn uses_window(&self) -> bool {
        matches!(self.spec, StateSpec::RewardWindow { .. })
    }

    pub fn encode(&self, observation: &Image, window: &RewardWindowBuffer) -> Result<Vec<f64>> {
        match self.spec {
            StateSpec::Pixels { width, height } => Ok(downsample(observation, width, height)?.pixels().to_vec()),
            StateSpec::PcaImage { width, height, .. } => {
                let img = downsample(observation, width, height)?;
                self.basis.as_ref().expect("checked in new").project(img.pixels())
            }
            StateSpec::RewardWindow { n, .. } => {
                if window.capacity() != n {
                    return Err(Error::Dimension { expected: n, got: window.capacity() });
                }
                Ok(window.encode())
            }
        }
    }
}
