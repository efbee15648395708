//! Synthetic audio-visual corpus for exercising the full pipeline without
//! recorded data.
//!
//! Each class is a word with its own mouth-aperture trajectory
//! `A_c·|sin(ω_c·t + φ)|` (closed at the start, opening and closing `k_c`
//! times over the clip) rendered as red lips around a dark mouth interior,
//! and its own two-tone audio signature in the 300–3400 Hz band. Every
//! utterance gets seeded jitter in phase, rate, amplitude, size and mouth
//! position; `noise_level` widens that jitter and adds pixel and audio noise.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dataset::{to_manifest_text, Split, UtteranceRecord};
use crate::error::{Error, Result};
use crate::media::{write_png, write_wav};
use crate::roi::{BoundingBox, RgbFrame};
use crate::util::write_atomic;

pub const MANIFEST_NAME: &str = "manifest.jsonl";

const BACKGROUND: [u8; 3] = [128, 128, 128];
const FACE: [u8; 3] = [176, 176, 176];
const LIPS: [u8; 3] = [178, 52, 64];
const MOUTH: [u8; 3] = [58, 26, 30];

const LIP_HALF_WIDTH: f64 = 80.0;
const LIP_THICKNESS: f64 = 14.0;
const MOUTH_HALF_WIDTH: f64 = 56.0;
const BOX_W: usize = 240;
const BOX_H: usize = 120;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub n_per_class: usize,
    pub seed: u64,
    pub noise_level: f64,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub sample_rate: u32,
    pub duration_secs: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 12,
            n_per_class: 10,
            seed: 42,
            noise_level: 0.0,
            frames: 52,
            width: 720,
            height: 576,
            sample_rate: 16_000,
            duration_secs: 2.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_classes < 2 {
            return bad("synthetic corpus needs at least 2 classes");
        }
        if self.n_per_class < 2 {
            return bad("synthetic corpus needs at least 2 samples per class");
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad("noise level must be a finite value >= 0");
        }
        if self.frames == 0 || self.duration_secs <= 0.0 || self.sample_rate == 0 {
            return bad("frames, duration and sample rate must be positive");
        }
        if self.width < BOX_W + 60 || self.height < BOX_H + 60 {
            return bad("frame too small for the synthetic mouth region");
        }
        Ok(())
    }
}

/// Class-level constants of one synthetic word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordProfile {
    /// Open/close cycles over the clip.
    pub cycles: f64,
    /// Peak mouth opening in pixels.
    pub amplitude: f64,
    pub tone_hz: [f64; 2],
}

pub fn class_label(class: usize) -> String {
    format!("word_{:02}", class + 1)
}

pub fn word_profile(class: usize, n_classes: usize) -> WordProfile {
    let levels = n_classes.div_ceil(4);
    let level = class / 4;
    let amplitude = if levels > 1 {
        12.0 + 28.0 * level as f64 / (levels - 1) as f64
    } else {
        26.0
    };
    let step = 2900.0 / (n_classes - 1).max(1) as f64;
    WordProfile {
        cycles: 1.0 + (class % 4) as f64,
        amplitude,
        tone_hz: [350.0 + step * class as f64, 3250.0 - step * class as f64],
    }
}

/// Per-utterance realization of a word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipTrack {
    pub profile: WordProfile,
    pub phase: f64,
    pub rate: f64,
    pub gain: f64,
    pub size: f64,
    pub center: (f64, f64),
}

impl LipTrack {
    pub fn aperture(&self, t_secs: f64, duration: f64) -> f64 {
        let omega = self.profile.cycles * PI / duration;
        self.gain * self.profile.amplitude * (omega * self.rate * t_secs + self.phase).sin().abs()
    }

    pub fn mouth_box(&self) -> BoundingBox {
        BoundingBox::new(
            (self.center.0 - BOX_W as f64 / 2.0).round() as usize,
            (self.center.1 - BOX_H as f64 / 2.0).round() as usize,
            BOX_W,
            BOX_H,
        )
    }
}

fn fill_ellipse(frame: &mut RgbFrame, cx: f64, cy: f64, ax: f64, ay: f64, color: [u8; 3]) {
    if ax < 0.5 || ay < 0.5 {
        return;
    }
    let (w, h) = (frame.width(), frame.height());
    let x_lo = (cx - ax).floor().max(0.0) as usize;
    let x_hi = ((cx + ax).ceil() as usize).min(w);
    let y_lo = (cy - ay).floor().max(0.0) as usize;
    let y_hi = ((cy + ay).ceil() as usize).min(h);
    let px = frame.pixels_mut();
    for y in y_lo..y_hi {
        let dy = (y as f64 + 0.5 - cy) / ay;
        for x in x_lo..x_hi {
            let dx = (x as f64 + 0.5 - cx) / ax;
            if dx * dx + dy * dy <= 1.0 {
                px[y * w + x] = color;
            }
        }
    }
}

/// Background with an achromatic face oval centred above the mouth.
pub fn base_frame(width: usize, height: usize, mouth_center: (f64, f64)) -> RgbFrame {
    let mut frame = RgbFrame::filled(width, height, BACKGROUND).expect("nonzero size");
    let (cx, cy) = mouth_center;
    fill_ellipse(&mut frame, cx, cy - 130.0, 180.0, 230.0, FACE);
    frame
}

/// Lips with mouth opening `aperture` drawn onto `frame`.
pub fn draw_mouth(frame: &mut RgbFrame, track: &LipTrack, aperture: f64) {
    let (cx, cy) = track.center;
    let s = track.size;
    fill_ellipse(
        frame,
        cx,
        cy,
        LIP_HALF_WIDTH * s,
        (LIP_THICKNESS + aperture / 2.0) * s,
        LIPS,
    );
    fill_ellipse(frame, cx, cy, MOUTH_HALF_WIDTH * s, aperture / 2.0 * s, MOUTH);
}

fn add_pixel_noise(frame: &mut RgbFrame, amplitude: f64, rng: &mut ChaCha8Rng) {
    // Triangular noise from two uniforms, spread ±amplitude.
    for p in frame.pixels_mut() {
        for c in p.iter_mut() {
            let bits = rng.next_u32();
            let u = ((bits & 0xFFFF) as f64 + (bits >> 16) as f64) / 65535.0 - 1.0;
            *c = (*c as f64 + amplitude * u).round().clamp(0.0, 255.0) as u8;
        }
    }
}

fn jitter(rng: &mut ChaCha8Rng, spread: f64) -> f64 {
    rng.random_range(-1.0..=1.0) * spread
}

fn lip_track(profile: WordProfile, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> LipTrack {
    let widen = 1.0 + cfg.noise_level;
    let offset = 12.0 * widen;
    let cx = cfg.width as f64 / 2.0 + jitter(rng, offset);
    let cy = (cfg.height as f64 * 0.7).min(cfg.height as f64 - BOX_H as f64 / 2.0 - offset - 1.0) + jitter(rng, offset);
    LipTrack {
        profile,
        phase: jitter(rng, 0.15 * widen),
        rate: 1.0 + jitter(rng, 0.03 * widen),
        gain: 1.0 + jitter(rng, 0.05 * widen),
        size: 1.0 + jitter(rng, 0.03 * widen),
        center: (cx, cy),
    }
}

fn fade(i: usize, len: usize, ramp: usize) -> f64 {
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
    }
}

/// Two consecutive tones with raised-cosine edges, plus optional noise.
pub fn word_audio(profile: WordProfile, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let widen = 1.0 + cfg.noise_level;
    let n = (cfg.duration_secs * cfg.sample_rate as f64).round() as usize;
    let half = n / 2;
    let ramp = (0.02 * cfg.sample_rate as f64) as usize;
    let sr = cfg.sample_rate as f64;
    let tones = profile.tone_hz.map(|f| f * (1.0 + jitter(rng, 0.01 * widen)));
    let level = 0.4 * (1.0 + jitter(rng, 0.1 * widen));
    let noise = Normal::new(0.0, 0.05 * cfg.noise_level).expect("valid sigma");
    (0..n)
        .map(|i| {
            let (seg, j, len) = if i < half {
                (0, i, half)
            } else {
                (1, i - half, n - half)
            };
            let s = level * fade(j, len, ramp.max(1)) * (2.0 * PI * tones[seg] * i as f64 / sr).sin();
            if cfg.noise_level > 0.0 {
                s + noise.sample(rng)
            } else {
                s
            }
        })
        .collect()
}

/// Renders every frame of one utterance.
pub fn render_frames(track: &LipTrack, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<RgbFrame> {
    let base = base_frame(cfg.width, cfg.height, track.center);
    (0..cfg.frames)
        .map(|f| {
            let t = f as f64 * cfg.duration_secs / cfg.frames as f64;
            let mut frame = base.clone();
            draw_mouth(&mut frame, track, track.aperture(t, cfg.duration_secs));
            if cfg.noise_level > 0.0 {
                add_pixel_noise(&mut frame, 30.0 * cfg.noise_level, rng);
            }
            frame
        })
        .collect()
}

fn write_utterance(dir: &Path, id: &str, class: usize, rep: usize, cfg: &SynthConfig) -> Result<UtteranceRecord> {
    let stream = (class * cfg.n_per_class + rep) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);

    let profile = word_profile(class, cfg.n_classes);
    let track = lip_track(profile, cfg, &mut rng);
    let frames_rel = PathBuf::from(id).join("frames");
    let frames_dir = dir.join(&frames_rel);
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    for (f, frame) in render_frames(&track, cfg, &mut rng).iter().enumerate() {
        write_png(&frames_dir.join(format!("frame_{:04}.png", f + 1)), frame)?;
    }

    let audio_rel = PathBuf::from(id).join("audio.wav");
    write_wav(
        &dir.join(&audio_rel),
        &word_audio(profile, cfg, &mut rng),
        cfg.sample_rate,
    )?;

    Ok(UtteranceRecord {
        id: id.to_string(),
        label: class_label(class),
        frames_dir: Some(frames_rel),
        audio_path: Some(audio_rel),
        mouth_box: Some(track.mouth_box()),
        split: Split::Auto,
        speaker: Some("synthetic".into()),
    })
}

/// Writes the corpus under `out_dir` and returns the manifest path.
pub fn synth_corpus(out_dir: &Path, cfg: &SynthConfig) -> Result<PathBuf> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let jobs: Vec<(usize, usize)> = (0..cfg.n_classes)
        .flat_map(|c| (0..cfg.n_per_class).map(move |r| (c, r)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(c, r)| write_utterance(out_dir, &format!("{}_r{:02}", class_label(c), r + 1), c, r, cfg))
        .collect::<Result<Vec<_>>>()?;
    let manifest = out_dir.join(MANIFEST_NAME);
    write_atomic(&manifest, to_manifest_text(&records).as_bytes())?;
    Ok(manifest)
}
