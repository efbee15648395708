//! Image and audio file I/O.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};
use crate::mfcc::AudioSignal;
use crate::roi::{BinaryFrame, RgbFrame};

const FRAME_EXTENSIONS: [&str; 4] = ["png", "ppm", "pgm", "pnm"];

fn image_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_rgb(path: &Path) -> Result<RgbFrame> {
    let img = image::open(path).map_err(image_err(path))?.into_rgb8();
    let (w, h) = img.dimensions();
    let pixels = img.pixels().map(|p| p.0).collect();
    RgbFrame::new(w as usize, h as usize, pixels)
}

pub fn write_png(path: &Path, frame: &RgbFrame) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = PngEncoder::new_with_quality(BufWriter::new(file), CompressionType::Fast, FilterType::Sub);
    let raw: Vec<u8> = frame.pixels().iter().flatten().copied().collect();
    encoder
        .write_image(
            &raw,
            frame.width() as u32,
            frame.height() as u32,
            ExtendedColorType::Rgb8,
        )
        .map_err(image_err(path))
}

/// Binary PGM (P5) with 1 → 255.
pub fn write_mask_pgm(path: &Path, mask: &BinaryFrame) -> Result<()> {
    use crate::roi::Frame;
    let mut bytes = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    bytes.extend(mask.to_u8_image());
    crate::util::write_atomic(path, &bytes)
}

fn numeric_key(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

/// Image files of a frame directory ordered by the trailing number in their
/// names (`frame_0001.png`, `frame_0002.png`, …).
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_frame = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if is_frame && path.is_file() {
            frames.push(path);
        }
    }
    frames.sort_by(|a, b| numeric_key(a).cmp(&numeric_key(b)).then_with(|| a.cmp(b)));
    Ok(frames)
}

/// 16-bit PCM WAV; channels are averaged to mono and samples scaled by 1/32768.
pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::format(
            path,
            format!(
                "expected 16-bit PCM, found {:?} {}-bit",
                spec.sample_format, spec.bits_per_sample
            ),
        ));
    }
    let channels = spec.channels.max(1) as usize;
    let raw = reader
        .samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|source| Error::Wav {
            path: path.to_path_buf(),
            source,
        })?;
    let samples: Vec<f64> = raw
        .chunks(channels)
        .map(|c| c.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / c.len() as f64)
        .collect();
    AudioSignal::new(samples, spec.sample_rate).map_err(|e| Error::format(path, e.to_string()))
}

/// Mono 16-bit PCM; samples are clamped to [-1, 1).
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}
