//! Mouth-region preprocessing.
//!
//! A raw RGB frame goes through lip emphasis (`|luma - R|`), a median filter,
//! Otsu binarization and finally a crop of the mouth box resampled to the
//! canonical [`ROI_SIZE`]×[`ROI_SIZE`] lattice used by the moment kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edge length of every preprocessed mouth frame.
pub const ROI_SIZE: usize = 120;

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// Read access shared by gray and binary frames.
pub trait Frame: Sync {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    /// Intensity of the pixel at row-major index `i`.
    fn value(&self, i: usize) -> f64;

    fn len(&self) -> usize {
        self.width() * self.height()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidFrame(format!("{width}x{height} frame")));
    }
    if width * height != len {
        return Err(Error::InvalidFrame(format!("{width}x{height} frame with {len} pixels")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.pixels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        if let Some(bad) = pixels.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidFrame(format!("non-finite intensity {bad}")));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Crops `bbox` and resamples it bilinearly to [`ROI_SIZE`]×[`ROI_SIZE`].
    pub fn crop_resize(&self, bbox: BoundingBox) -> Result<GrayFrame> {
        bbox.check_inside(self.width, self.height)?;
        let pixels = bilinear_resample(self, bbox, ROI_SIZE, ROI_SIZE);
        Ok(GrayFrame {
            width: ROI_SIZE,
            height: ROI_SIZE,
            pixels,
        })
    }
}

impl Frame for GrayFrame {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn value(&self, i: usize) -> f64 {
        self.pixels[i]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl BinaryFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        if pixels.iter().any(|&v| v > 1) {
            return Err(Error::InvalidFrame("binary frame holds values other than 0/1".into()));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.pixels.iter().map(|&v| v as usize).sum()
    }

    /// Crops `bbox`, resamples bilinearly to [`ROI_SIZE`]×[`ROI_SIZE`] and
    /// re-thresholds at 0.5.
    pub fn crop_resize(&self, bbox: BoundingBox) -> Result<BinaryFrame> {
        bbox.check_inside(self.width, self.height)?;
        let pixels = bilinear_resample(self, bbox, ROI_SIZE, ROI_SIZE)
            .into_iter()
            .map(|v| u8::from(v >= 0.5))
            .collect();
        Ok(BinaryFrame {
            width: ROI_SIZE,
            height: ROI_SIZE,
            pixels,
        })
    }

    /// 8-bit rendering with 1 → 255, suitable for PGM output.
    pub fn to_u8_image(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| v * 255).collect()
    }
}

impl Frame for BinaryFrame {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn value(&self, i: usize) -> f64 {
        self.pixels[i] as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self { x0, y0, w, h }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    pub fn check_inside(&self, width: usize, height: usize) -> Result<()> {
        let fits = self.w >= 1
            && self.h >= 1
            && self.x0.checked_add(self.w).is_some_and(|r| r <= width)
            && self.y0.checked_add(self.h).is_some_and(|b| b <= height);
        if fits {
            Ok(())
        } else {
            Err(Error::BoxOutOfBounds {
                x0: self.x0,
                y0: self.y0,
                w: self.w,
                h: self.h,
                width,
                height,
            })
        }
    }
}

/// Which image the moment features are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    #[default]
    Binary,
    Gray,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiConfig {
    pub filter_radius: usize,
    pub feature_source: FeatureSource,
}

impl Default for RoiConfig {
    fn default() -> Self {
        Self {
            filter_radius: 1,
            feature_source: FeatureSource::Binary,
        }
    }
}

#[inline]
fn luma(rgb: [u8; 3]) -> f64 {
    LUMA_R * rgb[0] as f64 + LUMA_G * rgb[1] as f64 + LUMA_B * rgb[2] as f64
}

pub fn to_grayscale(frame: &RgbFrame) -> GrayFrame {
    GrayFrame {
        width: frame.width,
        height: frame.height,
        pixels: frame.pixels.iter().map(|&p| luma(p)).collect(),
    }
}

/// `|luma - R|` per pixel: red-dominant lip pixels stand out against
/// achromatic or skin-toned surroundings.
pub fn lip_emphasis(frame: &RgbFrame) -> GrayFrame {
    GrayFrame {
        width: frame.width,
        height: frame.height,
        pixels: frame
            .pixels
            .iter()
            .map(|&p| (luma(p) - p[0] as f64).abs().clamp(0.0, 255.0))
            .collect(),
    }
}

#[inline(always)]
fn min2(a: f64, b: f64) -> f64 {
    if a < b {
        a
    } else {
        b
    }
}

#[inline(always)]
fn max2(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

#[inline(always)]
fn med3(a: f64, b: f64, c: f64) -> f64 {
    max2(min2(a, b), min2(max2(a, b), c))
}

/// Median over the `(2r+1)²` neighbourhood with replicated borders.
pub fn median_filter(frame: &GrayFrame, radius: usize) -> GrayFrame {
    match radius {
        0 => frame.clone(),
        1 => median_filter_3x3(frame),
        _ => median_filter_generic(frame, radius),
    }
}

/// Each column triple is sorted once per row; the median of the 3×3 window
/// is then the median of (largest low, middle middle, smallest high).
fn median_filter_3x3(frame: &GrayFrame) -> GrayFrame {
    let (w, h) = (frame.width, frame.height);
    let src = &frame.pixels;
    let mut out = vec![0.0; w * h];
    let (mut lo, mut mid, mut hi) = (vec![0.0; w], vec![0.0; w], vec![0.0; w]);
    for y in 0..h {
        let up = &src[y.saturating_sub(1) * w..][..w];
        let row = &src[y * w..][..w];
        let down = &src[(y + 1).min(h - 1) * w..][..w];
        for x in 0..w {
            let (a, b, c) = (up[x], row[x], down[x]);
            let (l, u) = (min2(a, b), max2(a, b));
            lo[x] = min2(l, c);
            hi[x] = max2(u, c);
            mid[x] = max2(l, min2(u, c));
        }
        let dst = &mut out[y * w..][..w];
        for (x, d) in dst.iter_mut().enumerate() {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let a = max2(max2(lo[xm], lo[x]), lo[xp]);
            let b = med3(mid[xm], mid[x], mid[xp]);
            let c = min2(min2(hi[xm], hi[x]), hi[xp]);
            *d = med3(a, b, c);
        }
    }
    GrayFrame {
        width: w,
        height: h,
        pixels: out,
    }
}

fn median_filter_generic(frame: &GrayFrame, radius: usize) -> GrayFrame {
    let (w, h) = (frame.width, frame.height);
    let side = 2 * radius + 1;
    let mut window = Vec::with_capacity(side * side);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            window.clear();
            for dy in 0..side {
                let yy = (y + dy).saturating_sub(radius).min(h - 1);
                for dx in 0..side {
                    let xx = (x + dx).saturating_sub(radius).min(w - 1);
                    window.push(frame.pixels[yy * w + xx]);
                }
            }
            let mid = window.len() / 2;
            let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
            out.push(*m);
        }
    }
    GrayFrame {
        width: w,
        height: h,
        pixels: out,
    }
}

/// Nearest bin, halves rounded up.
#[inline]
fn histogram_bin(v: f64) -> u8 {
    (v.clamp(0.0, 255.0) + 0.5) as u8
}

fn histogram(bins: &[u8]) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &b in bins {
        hist[b as usize] += 1;
    }
    hist
}

/// Otsu threshold over a 256-bin histogram (intensities rounded to the
/// nearest bin). When several thresholds reach the same maximal
/// between-class variance the middle of that plateau is returned. `None`
/// means a single occupied bin, i.e. no split exists.
pub fn otsu_threshold(frame: &GrayFrame) -> Option<u8> {
    let bins: Vec<u8> = frame.pixels.iter().map(|&v| histogram_bin(v)).collect();
    otsu_from_histogram(&histogram(&bins))
}

fn otsu_from_histogram(hist: &[u64; 256]) -> Option<u8> {
    let total = hist.iter().sum::<u64>() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();

    let mut best = 0.0f64;
    let mut first = None;
    let mut last = 0usize;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for (t, &count) in hist.iter().enumerate().take(255) {
        w0 += count as f64;
        sum0 += t as f64 * count as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mean_diff = sum0 / w0 - (sum_all - sum0) / w1;
        let between = w0 * w1 * mean_diff * mean_diff;
        if between > best {
            best = between;
            first = Some(t);
            last = t;
        } else if between == best && first.is_some() {
            last = t;
        }
    }
    first.map(|f| ((f + last) / 2) as u8)
}

/// Pixels whose histogram bin lies above the Otsu threshold become 1. A
/// constant frame maps to all zeros.
pub fn binarize_otsu(frame: &GrayFrame) -> BinaryFrame {
    let mut pixels: Vec<u8> = frame.pixels.iter().map(|&v| histogram_bin(v)).collect();
    match otsu_from_histogram(&histogram(&pixels)) {
        Some(t) => pixels.iter_mut().for_each(|b| *b = u8::from(*b > t)),
        None => pixels.fill(0),
    }
    BinaryFrame {
        width: frame.width,
        height: frame.height,
        pixels,
    }
}

struct Taps {
    lo: Vec<usize>,
    hi: Vec<usize>,
    frac: Vec<f64>,
}

/// Pixel-centre aligned sample positions for resampling `src_len` pixels
/// starting at `offset` onto `dst_len` pixels.
fn taps(offset: usize, src_len: usize, dst_len: usize) -> Taps {
    let scale = src_len as f64 / dst_len as f64;
    let mut t = Taps {
        lo: Vec::with_capacity(dst_len),
        hi: Vec::with_capacity(dst_len),
        frac: Vec::with_capacity(dst_len),
    };
    let max = (src_len - 1) as f64;
    for d in 0..dst_len {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
        let lo = s.floor();
        let frac = s - lo;
        let lo = lo as usize;
        t.lo.push(offset + lo);
        t.hi.push(offset + (lo + 1).min(src_len - 1));
        t.frac.push(frac);
    }
    t
}

fn bilinear_resample<F: Frame>(src: &F, bbox: BoundingBox, out_w: usize, out_h: usize) -> Vec<f64> {
    let w = src.width();
    let xs = taps(bbox.x0, bbox.w, out_w);
    let ys = taps(bbox.y0, bbox.h, out_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for j in 0..out_h {
        let (r0, r1, fy) = (ys.lo[j] * w, ys.hi[j] * w, ys.frac[j]);
        for i in 0..out_w {
            let (c0, c1, fx) = (xs.lo[i], xs.hi[i], xs.frac[i]);
            let top = src.value(r0 + c0) * (1.0 - fx) + src.value(r0 + c1) * fx;
            let bottom = src.value(r1 + c0) * (1.0 - fx) + src.value(r1 + c1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Full chain: lip emphasis, median filter, Otsu binarization, then crop of
/// `bbox` resampled to 120×120.
pub fn preprocess_frame(frame: &RgbFrame, bbox: BoundingBox, cfg: &RoiConfig) -> Result<BinaryFrame> {
    bbox.check_inside(frame.width, frame.height)?;
    let emphasized = median_filter(&lip_emphasis(frame), cfg.filter_radius);
    binarize_otsu(&emphasized).crop_resize(bbox)
}

/// Gray variant of [`preprocess_frame`]: the filtered emphasis map itself,
/// cropped and resized, without binarization.
pub fn preprocess_frame_gray(frame: &RgbFrame, bbox: BoundingBox, cfg: &RoiConfig) -> Result<GrayFrame> {
    bbox.check_inside(frame.width, frame.height)?;
    median_filter(&lip_emphasis(frame), cfg.filter_radius).crop_resize(bbox)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> GrayFrame {
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                px.push(f(x, y));
            }
        }
        GrayFrame::new(w, h, px).unwrap()
    }

    #[test]
    fn grayscale_of_achromatic_frames() {
        for v in [0u8, 100, 255] {
            let g = to_grayscale(&RgbFrame::filled(4, 3, [v, v, v]).unwrap());
            assert!(g.pixels().iter().all(|&p| (p - v as f64).abs() < 1e-9));
        }
    }

    #[test]
    fn lip_emphasis_values() {
        let gray_px = lip_emphasis(&RgbFrame::filled(2, 2, [77, 77, 77]).unwrap());
        assert!(gray_px.pixels().iter().all(|&p| p.abs() < 1e-12));

        let red = lip_emphasis(&RgbFrame::filled(1, 1, [255, 0, 0]).unwrap());
        assert!((red.pixels()[0] - 178.755).abs() < 1e-9);

        let black = lip_emphasis(&RgbFrame::filled(3, 3, [0, 0, 0]).unwrap());
        assert!(black.pixels().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn median_identity_and_uniform() {
        let f = gray(7, 5, |x, y| (x * 13 + y * 7) as f64 % 17.0);
        assert_eq!(median_filter(&f, 0), f);
        let u = GrayFrame::filled(9, 6, 42.0).unwrap();
        for r in 0..4 {
            assert_eq!(median_filter(&u, r), u);
        }
    }

    #[test]
    fn median_removes_isolated_spike() {
        let f = gray(5, 5, |x, y| if (x, y) == (2, 2) { 255.0 } else { 0.0 });
        let out = median_filter(&f, 1);
        assert!(out.pixels().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn otsu_two_level_frame() {
        let f = gray(10, 10, |x, _| if x < 5 { 10.0 } else { 200.0 });
        let t = otsu_threshold(&f).unwrap();
        assert!(t > 10 && t < 200, "threshold {t}");

        // Independent check: enumerate every threshold and confirm that the
        // chosen one attains the maximal between-class variance.
        let between = |t: usize| {
            let (c0, c1): (Vec<f64>, Vec<f64>) = f.pixels().iter().partition(|&&v| v <= t as f64);
            if c0.is_empty() || c1.is_empty() {
                return 0.0;
            }
            let m0 = c0.iter().sum::<f64>() / c0.len() as f64;
            let m1 = c1.iter().sum::<f64>() / c1.len() as f64;
            c0.len() as f64 * c1.len() as f64 * (m0 - m1).powi(2)
        };
        let max = (0..255).map(between).fold(0.0, f64::max);
        assert_eq!(between(t as usize), max);

        let b = binarize_otsu(&f);
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(b.get(x, y), u8::from(x >= 5));
            }
        }
    }

    #[test]
    fn otsu_constant_and_extreme_frames() {
        let c = GrayFrame::filled(8, 8, 93.0).unwrap();
        assert_eq!(otsu_threshold(&c), None);
        assert_eq!(binarize_otsu(&c).count_ones(), 0);

        let f = gray(6, 6, |x, y| if (x + y) % 3 == 0 { 255.0 } else { 0.0 });
        let b = binarize_otsu(&f);
        for (v, bit) in f.pixels().iter().zip(b.pixels()) {
            assert_eq!(*bit, u8::from(*v == 255.0));
        }
    }

    #[test]
    fn crop_resize_identity_and_constant() {
        let f = gray(120, 120, |x, y| ((x * 31 + y * 17) % 256) as f64);
        let out = f.crop_resize(BoundingBox::full(120, 120)).unwrap();
        assert_eq!(out, f);

        let u = GrayFrame::filled(240, 240, 77.5).unwrap();
        let out = u.crop_resize(BoundingBox::full(240, 240)).unwrap();
        assert_eq!((out.width(), out.height()), (120, 120));
        assert!(out.pixels().iter().all(|&p| (p - 77.5).abs() < 1e-12));
    }

    #[test]
    fn checkerboard_upsample_keeps_fill_fraction() {
        let px = (0..60 * 60).map(|i| (((i % 60) + (i / 60)) % 2) as u8).collect();
        let b = BinaryFrame::new(60, 60, px).unwrap();
        let input_fraction = b.count_ones() as f64 / 3600.0;
        let out = b.crop_resize(BoundingBox::full(60, 60)).unwrap();
        let out_fraction = out.count_ones() as f64 / (120.0 * 120.0);
        assert!((out_fraction - input_fraction).abs() <= 0.1 * input_fraction);
    }

    #[test]
    fn crop_outside_frame_is_rejected() {
        let f = GrayFrame::filled(10, 10, 1.0).unwrap();
        assert!(matches!(
            f.crop_resize(BoundingBox::new(5, 5, 6, 2)),
            Err(Error::BoxOutOfBounds { .. })
        ));
        assert!(f.crop_resize(BoundingBox::new(0, 0, 0, 2)).is_err());
    }

    fn ellipse_frame(w: usize, h: usize, cx: f64, cy: f64, a: f64, b: f64) -> RgbFrame {
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let dx = (x as f64 + 0.5 - cx) / a;
                let dy = (y as f64 + 0.5 - cy) / b;
                px.push(if dx * dx + dy * dy <= 1.0 {
                    [200, 40, 50]
                } else {
                    [128, 128, 128]
                });
            }
        }
        RgbFrame::new(w, h, px).unwrap()
    }

    #[test]
    fn preprocess_red_ellipse_area() {
        let (a, b) = (50.0, 25.0);
        let frame = ellipse_frame(320, 240, 160.0, 120.0, a, b);
        let bbox = BoundingBox::new(100, 80, 120, 80);
        let mask = preprocess_frame(&frame, bbox, &RoiConfig::default()).unwrap();
        assert_eq!((mask.width(), mask.height()), (ROI_SIZE, ROI_SIZE));
        // Analytic area of the ellipse mapped into the 120x120 lattice.
        let scale = (ROI_SIZE as f64 / bbox.w as f64) * (ROI_SIZE as f64 / bbox.h as f64);
        let expected = std::f64::consts::PI * a * b * scale;
        let got = mask.count_ones() as f64;
        assert!((got - expected).abs() <= 0.15 * expected, "{got} vs {expected}");
    }

    #[test]
    fn preprocess_gray_frame_is_empty_mask() {
        let frame = RgbFrame::filled(200, 150, [90, 90, 90]).unwrap();
        let mask = preprocess_frame(&frame, BoundingBox::full(200, 150), &RoiConfig::default()).unwrap();
        assert_eq!((mask.width(), mask.height()), (120, 120));
        assert_eq!(mask.count_ones(), 0);
    }

    proptest! {
        #[test]
        fn fast_and_generic_median_agree(
            w in 1usize..9, h in 1usize..9,
            seed in proptest::collection::vec(0f64..255.0, 81),
        ) {
            let f = GrayFrame::new(w, h, seed[..w * h].to_vec()).unwrap();
            prop_assert_eq!(median_filter_3x3(&f), median_filter_generic(&f, 1));
        }

        #[test]
        fn fast_median_handles_ties(
            w in 1usize..9, h in 1usize..9,
            seed in proptest::collection::vec(0u8..3, 81),
        ) {
            let f = GrayFrame::new(w, h, seed[..w * h].iter().map(|&v| v as f64).collect()).unwrap();
            prop_assert_eq!(median_filter_3x3(&f), median_filter_generic(&f, 1));
        }

        #[test]
        fn median_stays_within_input_range(
            px in proptest::collection::vec(0f64..255.0, 36), r in 0usize..3,
        ) {
            let f = GrayFrame::new(6, 6, px.clone()).unwrap();
            let lo = px.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = px.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let out = median_filter(&f, r);
            prop_assert!(out.pixels().iter().all(|&v| v >= lo && v <= hi));
        }

        #[test]
        fn otsu_ignores_pixel_order(
            mut px in proptest::collection::vec(0f64..255.0, 64),
            rot in 0usize..64,
        ) {
            let t = otsu_threshold(&GrayFrame::new(8, 8, px.clone()).unwrap());
            px.rotate_left(rot);
            px.reverse();
            prop_assert_eq!(t, otsu_threshold(&GrayFrame::new(8, 8, px).unwrap()));
        }

        #[test]
        fn achromatic_frames_have_zero_emphasis(
            levels in proptest::collection::vec(0u8..=255, 12),
        ) {
            let px = levels.iter().map(|&v| [v, v, v]).collect();
            let f = RgbFrame::new(4, 3, px).unwrap();
            prop_assert!(lip_emphasis(&f).pixels().iter().all(|&v| v.abs() < 1e-9));
        }

        #[test]
        fn preprocess_always_yields_roi_lattice(
            w in 1usize..40, h in 1usize..40, seed in any::<u64>(),
        ) {
            let px = (0..w * h)
                .map(|i| {
                    let v = seed.wrapping_mul(i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                    [(v >> 8) as u8, (v >> 24) as u8, (v >> 40) as u8]
                })
                .collect();
            let f = RgbFrame::new(w, h, px).unwrap();
            let m = preprocess_frame(&f, BoundingBox::full(w, h), &RoiConfig::default()).unwrap();
            prop_assert_eq!((m.width(), m.height()), (ROI_SIZE, ROI_SIZE));
            prop_assert!(m.pixels().iter().all(|&v| v <= 1));
        }
    }
}
