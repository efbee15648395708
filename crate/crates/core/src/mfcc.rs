//! Mel-frequency cepstral front end.
//!
//! Processing chain per utterance:
//! 1. first-order pre-emphasis
//! 2. frame blocking with zero-padded tail
//! 3. Hamming window
//! 4. one-sided power spectrum
//! 5. triangular mel filterbank
//! 6. floored natural log
//! 7. DCT-II cepstra `C_n = Σ_k log S_k · cos(n (k - ½) π / K)`
//!
//! followed by pooling into a fixed-length utterance vector.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::nearest_index_resample;

/// Floor applied to mel energies before taking the log.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Empty("audio signal"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Nearest-index resample of the cepstral frames to `frames_fixed`, concatenated.
    #[default]
    ConcatFixed,
    /// Per-coefficient mean over all frames.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccConfig {
    pub pre_emphasis_alpha: f64,
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    /// FFT length in samples; 0 selects the next power of two at or above
    /// the frame length.
    pub fft_size: usize,
    pub n_filters: usize,
    pub n_ceps: usize,
    /// Emit `C_0` as the first coefficient (the remaining ones shift down).
    pub include_c0: bool,
    pub pooling: Pooling,
    pub frames_fixed: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            pre_emphasis_alpha: 0.97,
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            fft_size: 0,
            n_filters: 26,
            n_ceps: 13,
            include_c0: false,
            pooling: Pooling::ConcatFixed,
            frames_fixed: 100,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(0.0..1.0).contains(&self.pre_emphasis_alpha) {
            return bad(format!(
                "mfcc.pre_emphasis_alpha {} outside [0, 1)",
                self.pre_emphasis_alpha
            ));
        }
        if [self.frame_len_ms, self.hop_ms]
            .iter()
            .any(|v| v.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater))
        {
            return bad("mfcc.frame_len_ms and mfcc.hop_ms must be positive".into());
        }
        if self.n_filters == 0 {
            return bad("mfcc.n_filters must be >= 1".into());
        }
        if self.n_ceps > self.n_filters {
            return bad(format!(
                "mfcc.n_ceps {} exceeds n_filters {}",
                self.n_ceps, self.n_filters
            ));
        }
        if self.pooling == Pooling::ConcatFixed && self.frames_fixed == 0 {
            return bad("mfcc.frames_fixed must be >= 1".into());
        }
        Ok(())
    }

    pub fn frame_len(&self, sample_rate: u32) -> usize {
        ((self.frame_len_ms * sample_rate as f64 / 1000.0).round() as usize).max(2)
    }

    pub fn hop(&self, sample_rate: u32) -> usize {
        ((self.hop_ms * sample_rate as f64 / 1000.0).round() as usize).max(1)
    }

    pub fn resolved_fft_size(&self, sample_rate: u32) -> usize {
        if self.fft_size == 0 {
            self.frame_len(sample_rate).next_power_of_two()
        } else {
            self.fft_size
        }
    }

    pub fn utterance_dim(&self) -> usize {
        match self.pooling {
            Pooling::ConcatFixed => self.n_ceps * self.frames_fixed,
            Pooling::Mean => self.n_ceps,
        }
    }
}

/// Mel filterbank energies of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrum(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticUtteranceVector(pub Vec<f64>);

/// `y[0] = x[0]`, `y[t] = x[t] - alpha·x[t-1]`.
pub fn pre_emphasis(samples: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    if let Some(&first) = samples.first() {
        out.push(first);
    }
    out.extend(samples.windows(2).map(|w| w[1] - alpha * w[0]));
    out
}

/// Frames starting every `hop` samples; the tail frames are zero-padded.
/// Yields `floor((len - 1) / hop) + 1` frames.
pub fn frame_blocks(samples: &[f64], frame_len: usize, hop: usize) -> Result<Vec<Vec<f64>>> {
    if samples.is_empty() {
        return Err(Error::Empty("audio signal"));
    }
    if frame_len == 0 || hop == 0 {
        return Err(Error::InvalidConfig("frame length and hop must be >= 1".into()));
    }
    Ok((0..samples.len())
        .step_by(hop)
        .map(|start| {
            let end = (start + frame_len).min(samples.len());
            let mut frame = samples[start..end].to_vec();
            frame.resize(frame_len, 0.0);
            frame
        })
        .collect())
}

pub fn hamming_window(len: usize) -> Vec<f64> {
    if len < 2 {
        return vec![1.0; len];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / denom).cos())
        .collect()
}

pub fn hamming(frame: &[f64]) -> Vec<f64> {
    frame
        .iter()
        .zip(hamming_window(frame.len()))
        .map(|(x, w)| x * w)
        .collect()
}

fn power_spectrum_with(fft: &dyn Fft<f64>, frame: &[f64], fft_size: usize, buf: &mut Vec<Complex64>) -> Vec<f64> {
    buf.clear();
    buf.extend(frame.iter().take(fft_size).map(|&x| Complex64::new(x, 0.0)));
    buf.resize(fft_size, Complex64::new(0.0, 0.0));
    fft.process(buf);
    buf[..fft_size / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
}

/// One-sided `|FFT|²` of `frame` zero-padded (or truncated) to `fft_size`.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Vec<f64> {
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    power_spectrum_with(fft.as_ref(), frame, fft_size, &mut Vec::new())
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with centres uniformly spaced in mel between 0 Hz and
/// Nyquist, evaluated on FFT bins `floor((fft_size + 1)·f / sample_rate)`.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    centers_mel: Vec<f64>,
    center_bins: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(n_filters: usize, fft_size: usize, sample_rate: u32) -> Self {
        let n_bins = fft_size / 2 + 1;
        let top = hz_to_mel(sample_rate as f64 / 2.0);
        let step = top / (n_filters + 1) as f64;
        let edges_mel: Vec<f64> = (0..n_filters + 2).map(|i| i as f64 * step).collect();
        let bins: Vec<usize> = edges_mel
            .iter()
            .map(|&m| {
                let b = ((fft_size + 1) as f64 * mel_to_hz(m) / sample_rate as f64).floor();
                (b.max(0.0) as usize).min(n_bins - 1)
            })
            .collect();

        let weights = (1..=n_filters)
            .map(|k| {
                let (lo, mid, hi) = (bins[k - 1], bins[k], bins[k + 1]);
                let mut row = vec![0.0; n_bins];
                for (b, w) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
                    *w = if b == mid {
                        1.0
                    } else if b < mid {
                        (b - lo) as f64 / (mid - lo) as f64
                    } else {
                        (hi - b) as f64 / (hi - mid) as f64
                    };
                }
                row
            })
            .collect();

        Self {
            centers_mel: edges_mel[1..=n_filters].to_vec(),
            center_bins: bins[1..=n_filters].to_vec(),
            weights,
        }
    }

    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn centers_mel(&self) -> &[f64] {
        &self.centers_mel
    }

    pub fn center_bins(&self) -> &[usize] {
        &self.center_bins
    }

    /// `n_filters × (fft_size/2 + 1)` weight matrix.
    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn apply(&self, power: &[f64]) -> MelSpectrum {
        MelSpectrum(
            self.weights
                .iter()
                .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
                .collect(),
        )
    }
}

/// DCT-II cepstra of log mel energies for `n = 1..=n_ceps`, or
/// `n = 0..n_ceps` with `include_c0`.
pub fn cepstra(log_mel: &[f64], n_ceps: usize, include_c0: bool) -> Vec<f64> {
    let k_total = log_mel.len() as f64;
    let first = if include_c0 { 0 } else { 1 };
    (first..first + n_ceps)
        .map(|n| {
            log_mel
                .iter()
                .enumerate()
                .map(|(k, &l)| l * (n as f64 * (k as f64 + 0.5) * PI / k_total).cos())
                .sum()
        })
        .collect()
}

/// Configured front end for one sample rate; immutable and shareable.
pub struct MfccExtractor {
    cfg: MfccConfig,
    sample_rate: u32,
    frame_len: usize,
    hop: usize,
    fft_size: usize,
    window: Vec<f64>,
    filterbank: MelFilterbank,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor")
            .field("cfg", &self.cfg)
            .field("sample_rate", &self.sample_rate)
            .field("frame_len", &self.frame_len)
            .field("fft_size", &self.fft_size)
            .finish()
    }
}

impl MfccExtractor {
    pub fn new(cfg: &MfccConfig, sample_rate: u32) -> Result<Self> {
        cfg.validate()?;
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        let frame_len = cfg.frame_len(sample_rate);
        let fft_size = cfg.resolved_fft_size(sample_rate);
        if fft_size < frame_len {
            return Err(Error::InvalidConfig(format!(
                "mfcc.fft_size {fft_size} is shorter than the {frame_len}-sample frame"
            )));
        }
        Ok(Self {
            cfg: cfg.clone(),
            sample_rate,
            frame_len,
            hop: cfg.hop(sample_rate),
            fft_size,
            window: hamming_window(frame_len),
            filterbank: MelFilterbank::new(cfg.n_filters, fft_size, sample_rate),
            fft: FftPlanner::new().plan_fft_forward(fft_size),
        })
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Cepstral vectors, one per analysis frame.
    pub fn cepstral_frames(&self, signal: &AudioSignal) -> Result<Vec<Vec<f64>>> {
        if signal.sample_rate != self.sample_rate {
            return Err(Error::InvalidConfig(format!(
                "extractor built for {} Hz, signal is {} Hz",
                self.sample_rate, signal.sample_rate
            )));
        }
        if signal.samples.len() < self.frame_len {
            return Err(Error::SignalTooShort {
                len: signal.samples.len(),
                frame_len: self.frame_len,
            });
        }
        let emphasized = pre_emphasis(&signal.samples, self.cfg.pre_emphasis_alpha);
        let frames = frame_blocks(&emphasized, self.frame_len, self.hop)?;
        let mut buf = Vec::with_capacity(self.fft_size);
        Ok(frames
            .into_iter()
            .map(|frame| {
                let windowed: Vec<f64> = frame.iter().zip(&self.window).map(|(x, w)| x * w).collect();
                let power = power_spectrum_with(self.fft.as_ref(), &windowed, self.fft_size, &mut buf);
                let log_mel: Vec<f64> = self
                    .filterbank
                    .apply(&power)
                    .0
                    .into_iter()
                    .map(|e| e.max(LOG_FLOOR).ln())
                    .collect();
                cepstra(&log_mel, self.cfg.n_ceps, self.cfg.include_c0)
            })
            .collect())
    }

    pub fn utterance_features(&self, signal: &AudioSignal) -> Result<AcousticUtteranceVector> {
        let frames = self.cepstral_frames(signal)?;
        let values = match self.cfg.pooling {
            Pooling::ConcatFixed => nearest_index_resample(frames.len(), self.cfg.frames_fixed)
                .into_iter()
                .flat_map(|i| frames[i].iter().copied())
                .collect(),
            Pooling::Mean => {
                let mut mean = vec![0.0; self.cfg.n_ceps];
                for frame in &frames {
                    for (m, c) in mean.iter_mut().zip(frame) {
                        *m += c;
                    }
                }
                let count = frames.len() as f64;
                mean.iter_mut().for_each(|m| *m /= count);
                mean
            }
        };
        Ok(AcousticUtteranceVector(values))
    }
}

/// One-shot convenience around [`MfccExtractor`].
pub fn utterance_features(signal: &AudioSignal, cfg: &MfccConfig) -> Result<AcousticUtteranceVector> {
    MfccExtractor::new(cfg, signal.sample_rate)?.utterance_features(signal)
}
