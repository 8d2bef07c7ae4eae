use crate::error::{Error, Result};

/// Grayscale image, row-major, pixel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension { expected: width * height, got: pixels.len() });
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, pixels: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[allow(dead_code)]
    pub(crate) fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Quantizes to bytes, `round(255 p)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b) / 255.0).collect())
    }

    /// Fraction of pixels whose values differ by more than `tol`.
    pub fn fraction_different(&self, other: &Image, tol: f64) -> f64 {
        assert_eq!(self.resolution(), other.resolution());
        let n = self.pixels.iter().zip(&other.pixels).filter(|(a, b)| (*a - *b).abs() > tol).count();
        n as f64 / self.pixels.len() as f64
    }
}

impl Image {
    /// Binary PGM (P5) encoding, 8 bits per pixel.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_u8());
        out
    }
}
