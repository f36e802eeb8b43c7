//! Grayscale images, histogram equalization, flattening, and synthetic
//! corpora.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng as _, SeedableRng};

use crate::error::{QiglError, Result};
use crate::linalg::Matrix;
use crate::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(QiglError::Shape(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, alloc::vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major intensities.
    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Image from `[0, 1]` values: clamp, then round half-up to 8 bits.
    pub fn from_unit(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        Self::new(width, height, values.iter().map(|&v| quantize(v)).collect())
    }
}

/// `floor(255 * clamp(v, 0, 1) + 0.5)`.
#[inline]
pub fn quantize(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    libm::floor(255.0 * v + 0.5) as u8
}

/// Maps intensity `i` to `round(255 * cdf(i))` with round-half-up, computed
/// in exact integer arithmetic.
pub fn histogram_equalize(image: &GrayImage) -> GrayImage {
    let mut hist = [0u64; 256];
    for &p in &image.pixels {
        hist[p as usize] += 1;
    }
    let total = image.pixels.len() as u64;
    let mut table = [0u8; 256];
    let mut cumulative = 0u64;
    for (level, count) in hist.iter().enumerate() {
        cumulative += count;
        // floor(255 c / N + 1/2) = floor((510 c + N) / 2N)
        table[level] = ((510 * cumulative + total) / (2 * total)) as u8;
    }
    GrayImage {
        width: image.width,
        height: image.height,
        pixels: image.pixels.iter().map(|&p| table[p as usize]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Loaded,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<GrayImage>,
    pub class_label: Option<String>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(images: Vec<GrayImage>, provenance: Provenance) -> Result<Self> {
        if let Some(first) = images.first() {
            if let Some((i, img)) = images.iter().enumerate().find(|(_, im)| im.dims() != first.dims()) {
                return Err(QiglError::Shape(format!(
                    "image {i} is {}x{}, expected {}x{}",
                    img.width, img.height, first.width, first.height
                )));
            }
        }
        Ok(Self { images, class_label: None, provenance })
    }

    pub fn images(&self) -> &[GrayImage] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.images.first().map(GrayImage::dims)
    }

    pub fn equalized(&self) -> Self {
        Self {
            images: self.images.iter().map(histogram_equalize).collect(),
            class_label: self.class_label.clone(),
            provenance: self.provenance,
        }
    }

    /// `n x (width * height)` matrix of pixel / 255.
    pub fn flatten_normalize(&self) -> Result<Matrix> {
        flatten_normalize(self)
    }
}

pub fn flatten_normalize(dataset: &Dataset) -> Result<Matrix> {
    let Some((w, h)) = dataset.dims() else {
        return Err(QiglError::Argument("dataset is empty".into()));
    };
    let mut data = Vec::with_capacity(dataset.len() * w * h);
    for img in &dataset.images {
        data.extend(img.pixels.iter().map(|&p| f64::from(p) / 255.0));
    }
    Matrix::from_vec(dataset.len(), w * h, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SynthKind {
    /// Two Gaussian bumps near opposite corners, centres jittered.
    TwoBlobs,
    /// Horizontal sinusoidal stripes with a random phase.
    Bars,
    /// Horizontal linear gradients with a random slope.
    Ramps,
}

impl SynthKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthKind::TwoBlobs => "two-blobs",
            SynthKind::Bars => "bars",
            SynthKind::Ramps => "ramps",
        }
    }
}

impl core::str::FromStr for SynthKind {
    type Err = QiglError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-blobs" | "blobs" => Ok(Self::TwoBlobs),
            "bars" => Ok(Self::Bars),
            "ramps" => Ok(Self::Ramps),
            other => Err(QiglError::Argument(format!("unknown synthetic dataset kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub size: usize,
    /// Variation strength; 0 makes every image identical.
    pub jitter: f64,
    pub seed: u64,
}

/// Deterministic synthetic corpus of `n` square `size x size` images.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Dataset> {
    if spec.n < 2 {
        return Err(QiglError::Argument(format!("synthetic datasets need n >= 2, got {}", spec.n)));
    }
    if spec.size == 0 || !(spec.jitter >= 0.0) {
        return Err(QiglError::Argument("synthetic size must be positive and jitter non-negative".into()));
    }
    let mut rng = Rng::seed_from_u64(spec.seed);
    let s = spec.size as f64;
    let mut sym = move || 2.0 * rng.gen::<f64>() - 1.0;
    let images = (0..spec.n)
        .map(|_| {
            let field: Vec<f64> = match spec.kind {
                SynthKind::TwoBlobs => {
                    let sigma = 0.15 * s;
                    let c1 = (0.3 * s + spec.jitter * s * sym(), 0.3 * s + spec.jitter * s * sym());
                    let c2 = (0.7 * s + spec.jitter * s * sym(), 0.7 * s + spec.jitter * s * sym());
                    grid(spec.size, |x, y| bump(x, y, c1, sigma) + bump(x, y, c2, sigma))
                }
                SynthKind::Bars => {
                    let phase = PI * spec.jitter * sym();
                    let period = (s / 2.0).max(2.0);
                    grid(spec.size, |_, y| 0.5 + 0.5 * libm::sin(2.0 * PI * y / period + phase))
                }
                SynthKind::Ramps => {
                    let slope = 1.0 + spec.jitter * sym();
                    grid(spec.size, |x, _| 0.5 + 0.5 * slope * (2.0 * x / s - 1.0))
                }
            };
            GrayImage::from_unit(spec.size, spec.size, &field)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ds = Dataset::new(images, Provenance::Synthetic)?;
    ds.class_label = Some(spec.kind.as_str().into());
    Ok(ds)
}

/// Samples `f` at pixel centres, row-major.
fn grid(size: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..size * size)
        .map(|i| f((i % size) as f64 + 0.5, (i / size) as f64 + 0.5))
        .collect()
}

fn bump(x: f64, y: f64, (cx, cy): (f64, f64), sigma: f64) -> f64 {
    let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    libm::exp(-d2 / (2.0 * sigma * sigma))
}
