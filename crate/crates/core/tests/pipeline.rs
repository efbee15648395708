use visword::config::PipelineConfig;
use visword::dataset::load_manifest;
use visword::features::Modality;
use visword::pipeline::Pipeline;
use visword::roi::{preprocess_frame, BoundingBox, RgbFrame, RoiConfig};
use visword::synth::{base_frame, draw_mouth, synth_corpus, word_profile, LipTrack, SynthConfig};
use visword::zernike::{ZernikeConfig, ZernikeExtractor};

fn fill_ellipse(frame: &mut RgbFrame, cx: f64, cy: f64, ax: f64, ay: f64, color: [u8; 3]) {
    let w = frame.width();
    let h = frame.height();
    let px = frame.pixels_mut();
    for y in 0..h {
        for x in 0..w {
            let dx = (x as f64 + 0.5 - cx) / ax;
            let dy = (y as f64 + 0.5 - cy) / ay;
            if dx * dx + dy * dy <= 1.0 {
                px[y * w + x] = color;
            }
        }
    }
}

/// Lips centred at `(cx, cy)` with an off-centre opening; no moment of this
/// shape vanishes by symmetry. Returns the frame and a box that tracks it.
fn lips(cx: f64, cy: f64, scale: f64) -> (RgbFrame, BoundingBox) {
    let mut frame = RgbFrame::filled(720, 576, [128, 128, 128]).unwrap();
    fill_ellipse(&mut frame, cx, cy, 80.0 * scale, 30.0 * scale, [178, 52, 64]);
    fill_ellipse(
        &mut frame,
        cx + 14.0 * scale,
        cy - 4.0 * scale,
        48.0 * scale,
        14.0 * scale,
        [58, 26, 30],
    );
    let (bw, bh) = (240.0 * scale, 120.0 * scale);
    let bbox = BoundingBox::new(
        (cx - bw / 2.0).round() as usize,
        (cy - bh / 2.0).round() as usize,
        bw.round() as usize,
        bh.round() as usize,
    );
    (frame, bbox)
}

fn descriptor(frame: &RgbFrame, bbox: BoundingBox) -> Vec<f64> {
    let ex = ZernikeExtractor::new(&ZernikeConfig::default()).unwrap();
    let mask = preprocess_frame(frame, bbox, &RoiConfig::default()).unwrap();
    ex.descriptor(&mask).unwrap().0
}

fn worst_relative(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()))
        .fold(0.0, f64::max)
}

/// Relative deviation per entry; entries that vanish by symmetry (below
/// 1e-3 of the largest) are compared against the largest entry instead.
fn worst_deviation(a: &[f64], b: &[f64]) -> f64 {
    let peak = a.iter().cloned().fold(0.0, f64::max);
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let scale = x.abs().max(y.abs());
            (x - y).abs() / if scale < 1e-3 * peak { peak } else { scale }
        })
        .fold(0.0, f64::max)
}

#[test]
fn descriptor_survives_translation_with_tracking_box() {
    let (f0, b0) = lips(360.0, 400.0, 1.0);
    let reference = descriptor(&f0, b0);
    assert!(reference.iter().all(|&v| v > 1e-4), "{reference:?}");
    for (dx, dy) in [(-150.0, -90.0), (120.0, 40.0), (37.3, -61.6)] {
        let (f, b) = lips(360.0 + dx, 400.0 + dy, 1.0);
        let worst = worst_relative(&reference, &descriptor(&f, b));
        assert!(worst < 0.05, "shift ({dx}, {dy}): {worst}");
    }
}

fn synth_lips(cx: f64, cy: f64, size: f64, aperture: f64) -> (RgbFrame, BoundingBox) {
    let track = LipTrack {
        profile: word_profile(0, 12),
        phase: 0.0,
        rate: 1.0,
        gain: 1.0,
        size,
        center: (cx, cy),
    };
    let mut frame = base_frame(720, 576, track.center);
    draw_mouth(&mut frame, &track, aperture);
    let (bw, bh) = (240.0 * size, 120.0 * size);
    let bbox = BoundingBox::new(
        (cx - bw / 2.0).round() as usize,
        (cy - bh / 2.0).round() as usize,
        bw.round() as usize,
        bh.round() as usize,
    );
    (frame, bbox)
}

#[test]
fn synthetic_lips_survive_uniform_scaling_with_tracking_box() {
    let orders: Vec<u32> = ZernikeConfig::default().indices.iter().map(|i| i.order()).collect();
    for aperture in [0.0, 12.0, 26.0, 40.0] {
        let (f0, b0) = synth_lips(360.0, 300.0, 1.0, aperture);
        let reference = descriptor(&f0, b0);
        let peak = reference.iter().cloned().fold(0.0, f64::max);
        for scale in [0.9, 1.1, 1.25, 1.5, 1.75, 2.0] {
            let (f, b) = synth_lips(360.0, 300.0, scale, aperture);
            let d = descriptor(&f, b);
            let low: Vec<usize> = (0..d.len()).filter(|&i| orders[i] <= 5).collect();
            let low_dev = worst_deviation(
                &low.iter().map(|&i| reference[i]).collect::<Vec<_>>(),
                &low.iter().map(|&i| d[i]).collect::<Vec<_>>(),
            );
            assert!(
                low_dev < 0.05,
                "aperture {aperture}, scale {scale}: low-order deviation {low_dev}"
            );
            let abs_dev = reference.iter().zip(&d).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / peak;
            assert!(
                abs_dev < 0.05,
                "aperture {aperture}, scale {scale}: deviation {abs_dev} of peak"
            );
        }
    }
}

#[test]
fn extraction_is_deterministic_and_order_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        n_classes: 3,
        n_per_class: 2,
        frames: 8,
        duration_secs: 0.5,
        ..SynthConfig::default()
    };
    let records = load_manifest(&synth_corpus(dir.path(), &cfg).unwrap()).unwrap();
    let pipeline = Pipeline::new(PipelineConfig::default()).unwrap();
    for modality in [Modality::Visual, Modality::Audio] {
        let parallel = pipeline.extract(&records, modality);
        assert!(parallel.failures.is_empty() && parallel.skipped.is_empty());
        assert_eq!(parallel.features.dim(), pipeline.feature_dim(modality));
        for (rec, row) in records.iter().zip(parallel.features.rows()) {
            let sequential = pipeline.record_features(rec, modality).unwrap().unwrap();
            assert_eq!(row.id, rec.id);
            assert_eq!(
                row.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                sequential.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
        assert_eq!(pipeline.extract(&records, modality).features, parallel.features);
    }
}

#[test]
fn train_and_evaluate_on_a_small_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        n_classes: 4,
        n_per_class: 4,
        ..SynthConfig::default()
    };
    let records = load_manifest(&synth_corpus(dir.path(), &cfg).unwrap()).unwrap();
    let pipeline = Pipeline::new(PipelineConfig::default()).unwrap();
    let features = pipeline.extract(&records, Modality::Audio).features;
    let report = pipeline.train(&records, &features).unwrap();
    assert!(report.missing.is_empty());
    assert_eq!(report.model.n_train(), 8);
    let eval = pipeline.evaluate(&records, &features, &report.model).unwrap();
    assert_eq!(eval.confusion.total(), 8);
    assert_eq!(eval.confusion.correct(), 8);
    assert_eq!(eval.summary(), "modality=audio overall_accuracy=100% correct=8 total=8");

    let files = visword::pipeline::write_evaluation(&dir.path().join("eval"), &eval).unwrap();
    let csv = std::fs::read_to_string(files.confusion_csv).unwrap();
    assert_eq!(csv.lines().count(), 5);
}
