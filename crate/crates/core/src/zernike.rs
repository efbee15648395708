//! Complex Zernike moments of preprocessed mouth frames.
//!
//! The moment of order `m` and repetition `n` is
//! `Z = (m+1)/π · Σ I(x,y) · R_m|n|(r) · e^{+jnθ} · ΔA`, i.e. the conjugate of
//! the basis `V = R(r)·e^{-jnθ}` integrated against the image with a
//! pixel-centre midpoint rule. Basis fields for a lattice are built once by
//! [`ZernikeBasis`] and then reused for every frame.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roi::{Frame, ROI_SIZE};
use crate::util::nearest_index_resample;

/// Largest order whose radial coefficients are computed exactly in `u128`.
pub const MAX_ORDER: u32 = 30;

pub const DEFAULT_FRAMES_PER_UTTERANCE: usize = 52;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 2]", into = "[i64; 2]")]
pub struct MomentIndex {
    m: u32,
    n: i32,
}

impl MomentIndex {
    pub fn new(m: u32, n: i32) -> Result<Self> {
        let abs_n = n.unsigned_abs();
        if abs_n > m || !(m - abs_n).is_multiple_of(2) {
            return Err(Error::InvalidMomentIndex { m, n });
        }
        if m > MAX_ORDER {
            return Err(Error::OrderTooLarge(m));
        }
        Ok(Self { m, n })
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn repetition(&self) -> i32 {
        self.n
    }

    /// Every valid index with order `<= max_order`, ordered by `m` then `n`.
    pub fn all_up_to(max_order: u32) -> Vec<MomentIndex> {
        let mut out = Vec::new();
        for m in 0..=max_order {
            let m_i = m as i32;
            for n in (-m_i..=m_i).step_by(2) {
                out.push(MomentIndex { m, n });
            }
        }
        out
    }
}

impl TryFrom<[i64; 2]> for MomentIndex {
    type Error = Error;

    fn try_from([m, n]: [i64; 2]) -> Result<Self> {
        let m32 = u32::try_from(m).map_err(|_| Error::InvalidConfig(format!("moment order {m}")))?;
        let n32 = i32::try_from(n).map_err(|_| Error::InvalidConfig(format!("moment repetition {n}")))?;
        MomentIndex::new(m32, n32)
    }
}

impl From<MomentIndex> for [i64; 2] {
    fn from(idx: MomentIndex) -> Self {
        [idx.m as i64, idx.n as i64]
    }
}

fn factorial(k: u32) -> u128 {
    (1..=k as u128).product()
}

/// Radial polynomial `R_m|n|` with coefficients computed exactly.
#[derive(Debug, Clone)]
pub struct RadialPolynomial {
    /// `(power, coefficient)` pairs, highest power first.
    terms: Vec<(i32, f64)>,
}

impl RadialPolynomial {
    pub fn new(idx: MomentIndex) -> Self {
        let m = idx.m;
        let a = idx.n.unsigned_abs();
        let half_sum = (m + a) / 2;
        let half_diff = (m - a) / 2;
        let terms = (0..=half_diff)
            .map(|s| {
                let mag = factorial(m - s) / (factorial(s) * factorial(half_sum - s) * factorial(half_diff - s));
                let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                ((m - 2 * s) as i32, sign * mag as f64)
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.terms.iter().map(|&(p, c)| c * r.powi(p)).sum()
    }
}

/// `R_m|n|(r)` for `0 <= r <= 1`.
pub fn radial_polynomial(idx: MomentIndex, r: f64) -> f64 {
    RadialPolynomial::new(idx).eval(r)
}

/// How the pixel lattice is scaled onto the unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiskMapping {
    /// The frame's half-diagonal maps to `r = 1`; every pixel is inside.
    #[default]
    HalfDiagonal,
    /// The inscribed circle maps to `r = 1`; corner pixels with `r > 1` drop out.
    Inscribed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    /// Row-major pixel index.
    pub index: usize,
    pub r: f64,
    pub theta: f64,
}

#[derive(Debug, Clone)]
pub struct UnitDiskGrid {
    width: usize,
    height: usize,
    points: Vec<GridPoint>,
    area: f64,
}

impl UnitDiskGrid {
    pub fn new(width: usize, height: usize, mapping: DiskMapping) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!("{width}x{height} grid")));
        }
        let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
        let scale = match mapping {
            DiskMapping::HalfDiagonal => cx.hypot(cy),
            DiskMapping::Inscribed => cx.min(cy),
        };
        let mut points = Vec::with_capacity(width * height);
        for j in 0..height {
            let y = (cy - (j as f64 + 0.5)) / scale;
            for i in 0..width {
                let x = (i as f64 + 0.5 - cx) / scale;
                let r = x.hypot(y);
                if r <= 1.0 {
                    points.push(GridPoint {
                        index: j * width + i,
                        r,
                        theta: y.atan2(x),
                    });
                }
            }
        }
        Ok(Self {
            width,
            height,
            points,
            area: 1.0 / (scale * scale),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    /// Area of one pixel in normalized disk coordinates.
    pub fn area_weight(&self) -> f64 {
        self.area
    }

    fn check_frame<F: Frame + ?Sized>(&self, frame: &F) -> Result<()> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::DimensionMismatch {
                expected: self.width * self.height,
                actual: frame.width() * frame.height(),
            });
        }
        Ok(())
    }
}

/// Half-diagonal grid, the default mapping.
pub fn make_grid(width: usize, height: usize) -> Result<UnitDiskGrid> {
    UnitDiskGrid::new(width, height, DiskMapping::HalfDiagonal)
}

/// Single moment evaluated straight from the grid, without cached basis
/// tables.
pub fn zernike_moment<F: Frame + ?Sized>(frame: &F, idx: MomentIndex, grid: &UnitDiskGrid) -> Result<Complex64> {
    grid.check_frame(frame)?;
    let radial = RadialPolynomial::new(idx);
    let n = idx.n as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in &grid.points {
        let intensity = frame.value(p.index);
        if intensity == 0.0 {
            continue;
        }
        let (sin, cos) = (n * p.theta).sin_cos();
        acc += intensity * radial.eval(p.r) * Complex64::new(cos, sin);
    }
    Ok(acc * ((idx.m + 1) as f64 / PI) * grid.area)
}

/// Precomputed `(m+1)/π · ΔA · conj(V)` fields for a fixed lattice and index
/// list, stored as split real/imaginary planes over every pixel (zero
/// outside the disk).
#[derive(Debug, Clone)]
pub struct ZernikeBasis {
    width: usize,
    height: usize,
    indices: Vec<MomentIndex>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl ZernikeBasis {
    pub fn new(grid: &UnitDiskGrid, indices: &[MomentIndex]) -> Self {
        let len = grid.width * grid.height;
        let mut re = Vec::with_capacity(indices.len());
        let mut im = Vec::with_capacity(indices.len());
        for idx in indices {
            let radial = RadialPolynomial::new(*idx);
            let norm = (idx.m + 1) as f64 / PI * grid.area;
            let n = idx.n as f64;
            let mut plane_re = vec![0.0; len];
            let mut plane_im = vec![0.0; len];
            for p in &grid.points {
                let (sin, cos) = (n * p.theta).sin_cos();
                let w = norm * radial.eval(p.r);
                plane_re[p.index] = w * cos;
                plane_im[p.index] = w * sin;
            }
            re.push(plane_re);
            im.push(plane_im);
        }
        Self {
            width: grid.width,
            height: grid.height,
            indices: indices.to_vec(),
            re,
            im,
        }
    }

    pub fn indices(&self) -> &[MomentIndex] {
        &self.indices
    }

    /// All configured moments of `frame`, in index-list order. The pixel
    /// summation order is fixed, so results are bitwise reproducible.
    pub fn moments<F: Frame + ?Sized>(&self, frame: &F) -> Result<Vec<Complex64>> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::DimensionMismatch {
                expected: self.width * self.height,
                actual: frame.width() * frame.height(),
            });
        }
        let intensities: Vec<f64> = (0..frame.len()).map(|i| frame.value(i)).collect();
        Ok(self
            .re
            .iter()
            .zip(&self.im)
            .map(|(re, im)| Complex64::new(dot(&intensities, re), dot(&intensities, im)))
            .collect())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators in a fixed grouping.
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let (tail_a, tail_b) = (chunks_a.remainder(), chunks_b.remainder());
    for (x, y) in chunks_a.zip(chunks_b) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in tail_a.iter().zip(tail_b) {
        sum += x * y;
    }
    sum
}

fn default_indices() -> Vec<MomentIndex> {
    (1..=9u32).map(|m| MomentIndex { m, n: (m % 2) as i32 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZernikeConfig {
    /// `[m, n]` pairs; the descriptor holds one magnitude per entry.
    pub indices: Vec<MomentIndex>,
    pub frames_per_utterance: usize,
    pub mapping: DiskMapping,
}

impl Default for ZernikeConfig {
    fn default() -> Self {
        Self {
            indices: default_indices(),
            frames_per_utterance: DEFAULT_FRAMES_PER_UTTERANCE,
            mapping: DiskMapping::HalfDiagonal,
        }
    }
}

impl ZernikeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::InvalidConfig("zernike.indices is empty".into()));
        }
        if self.frames_per_utterance == 0 {
            return Err(Error::InvalidConfig("zernike.frames_per_utterance must be >= 1".into()));
        }
        Ok(())
    }

    pub fn utterance_dim(&self) -> usize {
        self.indices.len() * self.frames_per_utterance
    }
}

/// Moment magnitudes of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ZernikeDescriptor(pub Vec<f64>);

/// Per-frame descriptors of one utterance concatenated in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualUtteranceVector(pub Vec<f64>);

/// Descriptor and utterance-vector builder for the 120×120 ROI lattice.
#[derive(Debug, Clone)]
pub struct ZernikeExtractor {
    basis: ZernikeBasis,
    frames_per_utterance: usize,
}

impl ZernikeExtractor {
    pub fn new(cfg: &ZernikeConfig) -> Result<Self> {
        Self::with_size(cfg, ROI_SIZE, ROI_SIZE)
    }

    pub fn with_size(cfg: &ZernikeConfig, width: usize, height: usize) -> Result<Self> {
        cfg.validate()?;
        let grid = UnitDiskGrid::new(width, height, cfg.mapping)?;
        Ok(Self {
            basis: ZernikeBasis::new(&grid, &cfg.indices),
            frames_per_utterance: cfg.frames_per_utterance,
        })
    }

    pub fn descriptor<F: Frame + ?Sized>(&self, frame: &F) -> Result<ZernikeDescriptor> {
        Ok(ZernikeDescriptor(
            self.basis.moments(frame)?.into_iter().map(|z| z.norm()).collect(),
        ))
    }

    /// Resamples the sequence to the configured frame count by nearest index
    /// and concatenates the per-frame descriptors.
    pub fn utterance_vector<F: Frame>(&self, frames: &[F]) -> Result<VisualUtteranceVector> {
        if frames.is_empty() {
            return Err(Error::Empty("frame sequence"));
        }
        let picks = nearest_index_resample(frames.len(), self.frames_per_utterance);
        let mut values = Vec::with_capacity(picks.len() * self.basis.indices.len());
        let mut cache: Vec<Option<ZernikeDescriptor>> = vec![None; frames.len()];
        for src in picks {
            if cache[src].is_none() {
                cache[src] = Some(self.descriptor(&frames[src])?);
            }
            values.extend_from_slice(&cache[src].as_ref().expect("filled above").0);
        }
        Ok(VisualUtteranceVector(values))
    }

    /// Utterance vector from descriptors that were already computed per frame.
    pub fn assemble(&self, descriptors: &[ZernikeDescriptor]) -> Result<VisualUtteranceVector> {
        if descriptors.is_empty() {
            return Err(Error::Empty("frame sequence"));
        }
        let picks = nearest_index_resample(descriptors.len(), self.frames_per_utterance);
        Ok(VisualUtteranceVector(
            picks
                .into_iter()
                .flat_map(|i| descriptors[i].0.iter().copied())
                .collect(),
        ))
    }
}
