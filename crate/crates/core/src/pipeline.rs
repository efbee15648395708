//! Extraction, training and evaluation over manifest records.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{classify, ConfusionMatrix, Metrics, Prediction};
use crate::config::PipelineConfig;
use crate::dataset::{class_labels, split, UtteranceRecord};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Modality, UtteranceFeatures};
use crate::media::{list_frames, read_rgb, read_wav};
use crate::mfcc::MfccExtractor;
use crate::pca::{fit, PcaModel, TrainingMatrix};
use crate::roi::{preprocess_frame, preprocess_frame_gray, BoundingBox, FeatureSource};
use crate::util::{nearest_index_resample, write_atomic};
use crate::zernike::{ZernikeDescriptor, ZernikeExtractor};

#[derive(Debug)]
pub struct ExtractReport {
    pub features: FeatureMatrix,
    /// Records without media for the requested modality.
    pub skipped: Vec<String>,
    /// Records whose media could not be processed.
    pub failures: Vec<(String, Error)>,
}

#[derive(Debug)]
pub struct TrainReport {
    pub model: PcaModel,
    /// Training-split records with no row in the feature table.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub id: String,
    pub true_label: String,
    #[serde(flatten)]
    pub prediction: Prediction,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub modality: Modality,
    pub confusion: ConfusionMatrix,
    pub outcomes: Vec<TestOutcome>,
    /// Test-split records with no row in the feature table.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    zernike: ZernikeExtractor,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let zernike = ZernikeExtractor::new(&cfg.zernike)?;
        Ok(Self { cfg, zernike })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn feature_dim(&self, modality: Modality) -> usize {
        match modality {
            Modality::Visual => self.cfg.zernike.utterance_dim(),
            Modality::Audio => self.cfg.mfcc.utterance_dim(),
        }
    }

    /// Visual vector of one record, or `None` when it has no frames.
    pub fn visual_features(&self, record: &UtteranceRecord) -> Result<Option<Vec<f64>>> {
        let Some(dir) = &record.frames_dir else {
            return Ok(None);
        };
        let frames = list_frames(dir)?;
        if frames.is_empty() {
            return Err(Error::format(dir, "no frame images found"));
        }
        let picks = nearest_index_resample(frames.len(), self.cfg.zernike.frames_per_utterance);
        let mut cache: HashMap<usize, ZernikeDescriptor> = HashMap::new();
        let mut values = Vec::with_capacity(self.feature_dim(Modality::Visual));
        for src in picks {
            if let Entry::Vacant(slot) = cache.entry(src) {
                slot.insert(self.frame_descriptor(&frames[src], record.mouth_box)?);
            }
            values.extend_from_slice(&cache[&src].0);
        }
        Ok(Some(values))
    }

    fn frame_descriptor(&self, path: &Path, mouth_box: Option<BoundingBox>) -> Result<ZernikeDescriptor> {
        let rgb = read_rgb(path)?;
        let bbox = mouth_box.unwrap_or_else(|| BoundingBox::full(rgb.width(), rgb.height()));
        let with_path = |e: Error| match e {
            Error::BoxOutOfBounds { .. } => Error::format(path, e.to_string()),
            other => other,
        };
        match self.cfg.roi.feature_source {
            FeatureSource::Binary => self
                .zernike
                .descriptor(&preprocess_frame(&rgb, bbox, &self.cfg.roi).map_err(with_path)?),
            FeatureSource::Gray => self
                .zernike
                .descriptor(&preprocess_frame_gray(&rgb, bbox, &self.cfg.roi).map_err(with_path)?),
        }
    }

    /// Acoustic vector of one record, or `None` when it has no audio.
    pub fn audio_features(&self, record: &UtteranceRecord) -> Result<Option<Vec<f64>>> {
        let Some(path) = &record.audio_path else {
            return Ok(None);
        };
        let signal = read_wav(path)?;
        let extractor = MfccExtractor::new(&self.cfg.mfcc, signal.sample_rate())?;
        let v = extractor
            .utterance_features(&signal)
            .map_err(|e| Error::format(path, e.to_string()))?;
        Ok(Some(v.0))
    }

    pub fn record_features(&self, record: &UtteranceRecord, modality: Modality) -> Result<Option<Vec<f64>>> {
        match modality {
            Modality::Visual => self.visual_features(record),
            Modality::Audio => self.audio_features(record),
        }
    }

    /// Features for every record in manifest order. Records are processed in
    /// parallel; the output order does not depend on scheduling.
    pub fn extract(&self, records: &[UtteranceRecord], modality: Modality) -> ExtractReport {
        let results: Vec<Result<Option<Vec<f64>>>> =
            records.par_iter().map(|r| self.record_features(r, modality)).collect();
        let mut features = FeatureMatrix::new(modality, self.feature_dim(modality));
        let mut skipped = Vec::new();
        let mut failures = Vec::new();
        for (r, res) in records.iter().zip(results) {
            let pushed = res.and_then(|v| match v {
                None => {
                    skipped.push(r.id.clone());
                    Ok(())
                }
                Some(values) => features.push(UtteranceFeatures {
                    id: r.id.clone(),
                    label: r.label.clone(),
                    values,
                }),
            });
            if let Err(e) = pushed {
                failures.push((r.id.clone(), e));
            }
        }
        ExtractReport {
            features,
            skipped,
            failures,
        }
    }

    /// Fits the eigenspace on the training split of `records`.
    pub fn train(&self, records: &[UtteranceRecord], features: &FeatureMatrix) -> Result<TrainReport> {
        let (train_set, _) = split(records, &self.cfg.split)?;
        let (rows, missing) = lookup(&train_set, features);
        let columns: Vec<Vec<f64>> = rows.iter().map(|r| r.values.clone()).collect();
        let labels = rows.iter().map(|r| r.label.clone()).collect();
        if columns.len() < 2 {
            return Err(Error::TooFewSamples(columns.len()));
        }
        let model = fit(&TrainingMatrix::new(&columns, labels)?, self.cfg.pca.components)?;
        Ok(TrainReport { model, missing })
    }

    /// Classifies the test split of `records` against `model`.
    pub fn evaluate(
        &self,
        records: &[UtteranceRecord],
        features: &FeatureMatrix,
        model: &PcaModel,
    ) -> Result<Evaluation> {
        if features.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                actual: features.dim(),
            });
        }
        let (_, test_set) = split(records, &self.cfg.split)?;
        let (rows, missing) = lookup(&test_set, features);

        let mut classes = class_labels(records);
        for l in model.labels() {
            if !classes.contains(l) {
                classes.push(l.clone());
            }
        }
        let mut confusion = ConfusionMatrix::new(classes);
        let mut outcomes = Vec::with_capacity(rows.len());
        for row in rows {
            let prediction = classify(&row.values, model)?;
            confusion.record(&row.label, &prediction.predicted_label)?;
            outcomes.push(TestOutcome {
                id: row.id.clone(),
                true_label: row.label.clone(),
                prediction,
            });
        }
        Ok(Evaluation {
            modality: features.modality(),
            confusion,
            outcomes,
            missing,
        })
    }
}

fn lookup<'a>(records: &[UtteranceRecord], features: &'a FeatureMatrix) -> (Vec<&'a UtteranceFeatures>, Vec<String>) {
    let by_id: HashMap<&str, &UtteranceFeatures> = features.rows().iter().map(|r| (r.id.as_str(), r)).collect();
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for r in records {
        match by_id.get(r.id.as_str()) {
            Some(row) => rows.push(*row),
            None => missing.push(r.id.clone()),
        }
    }
    (rows, missing)
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    modality: Modality,
    #[serde(flatten)]
    metrics: Metrics,
    predictions: &'a [TestOutcome],
}

/// Files written by [`write_evaluation`].
#[derive(Debug, Clone)]
pub struct EvaluationFiles {
    pub confusion_csv: PathBuf,
    pub confusion_txt: PathBuf,
    pub metrics_json: PathBuf,
}

impl Evaluation {
    /// One-line result, e.g. `modality=audio overall_accuracy=100% correct=36 total=36`.
    pub fn summary(&self) -> String {
        format!(
            "modality={} overall_accuracy={} correct={} total={}",
            self.modality,
            self.confusion.overall_percent(),
            self.confusion.correct(),
            self.confusion.total()
        )
    }
}

/// Writes the confusion matrix (CSV and text table) and the metrics JSON
/// into `dir`, suffixed with the modality name.
pub fn write_evaluation(dir: &Path, eval: &Evaluation) -> Result<EvaluationFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let m = eval.modality.name();
    let files = EvaluationFiles {
        confusion_csv: dir.join(format!("confusion_{m}.csv")),
        confusion_txt: dir.join(format!("confusion_{m}.txt")),
        metrics_json: dir.join(format!("metrics_{m}.json")),
    };
    write_atomic(&files.confusion_csv, eval.confusion.to_csv().as_bytes())?;
    write_atomic(&files.confusion_txt, eval.confusion.to_ascii_table().as_bytes())?;
    let json = serde_json::to_string_pretty(&MetricsFile {
        modality: eval.modality,
        metrics: eval.confusion.metrics(),
        predictions: &eval.outcomes,
    })
    .expect("metrics serialize");
    write_atomic(&files.metrics_json, format!("{json}\n").as_bytes())?;
    Ok(files)
}
