//! Utterance manifests and train/test splitting.
//!
//! A manifest is JSON lines, one [`UtteranceRecord`] per line:
//!
//! ```text
//! {"id":"w01_r03","label":"word_01","frames_dir":"w01_r03/frames","audio_path":"w01_r03/audio.wav","mouth_box":{"x0":240,"y0":340,"w":240,"h":120},"split":"auto"}
//! ```
//!
//! Relative paths are resolved against the manifest's directory. Blank lines
//! are ignored.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roi::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mouth_box: Option<BoundingBox>,
    #[serde(default)]
    pub split: Split,
    /// Free-form speaker tag; carried through, never interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
}

impl UtteranceRecord {
    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.frames_dir, &mut self.audio_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Parses manifest text, resolving relative paths against `base_dir`.
/// Structural checks only; referenced files are not touched.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<UtteranceRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: UtteranceRecord = serde_json::from_str(line).map_err(|e| Error::ManifestParse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.label.trim().is_empty() {
            return Err(Error::EmptyLabel(rec.id));
        }
        if rec.frames_dir.is_none() && rec.audio_path.is_none() {
            return Err(Error::NoMedia(rec.id));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId(rec.id));
        }
        rec.resolve(base_dir);
        records.push(rec);
    }
    Ok(records)
}

/// Reads and validates a manifest, including that every referenced frame
/// directory and audio file exists. All missing paths are reported at once.
pub fn load_manifest(path: &Path) -> Result<Vec<UtteranceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let records = parse_manifest(&text, base)?;
    let missing = missing_media(&records);
    if missing.is_empty() {
        Ok(records)
    } else {
        Err(Error::MissingMedia(missing))
    }
}

pub fn missing_media(records: &[UtteranceRecord]) -> Vec<(String, PathBuf)> {
    let mut missing = Vec::new();
    for r in records {
        if let Some(d) = &r.frames_dir {
            if !d.is_dir() {
                missing.push((r.id.clone(), d.clone()));
            }
        }
        if let Some(a) = &r.audio_path {
            if !a.is_file() {
                missing.push((r.id.clone(), a.clone()));
            }
        }
    }
    missing
}

pub fn to_manifest_text(records: &[UtteranceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Distinct labels in order of first appearance.
pub fn class_labels(records: &[UtteranceRecord]) -> Vec<String> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.label.as_str()))
        .map(|r| r.label.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.70,
            seed: 42,
            stratified: true,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split.train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }

    fn train_count(&self, n: usize) -> usize {
        ((n as f64 * self.train_fraction + 1e-9).floor() as usize).max(1)
    }
}

/// Train/test partition. Records with an explicit split keep it; `auto`
/// records are shuffled with the seeded generator and the first
/// `max(1, floor(n·fraction))` go to training, per class when stratified.
/// Both lists keep manifest order.
pub fn split(records: &[UtteranceRecord], cfg: &SplitConfig) -> Result<(Vec<UtteranceRecord>, Vec<UtteranceRecord>)> {
    cfg.validate()?;
    let mut is_train = vec![false; records.len()];
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        match r.split {
            Split::Train => is_train[i] = true,
            Split::Test => {}
            Split::Auto => {
                let key = if cfg.stratified { r.label.as_str() } else { "" };
                groups.entry(key).or_default().push(i);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for (label, mut members) in groups {
        if cfg.stratified && members.len() < 2 {
            return Err(Error::ClassTooSmall {
                label: label.to_string(),
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        for &i in &members[..cfg.train_count(members.len()).min(members.len())] {
            is_train[i] = true;
        }
    }

    let (train, test): (Vec<_>, Vec<_>) = records.iter().zip(is_train).partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(r, _)| r.clone()).collect(),
        test.into_iter().map(|(r, _)| r.clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(id: &str, label: &str) -> UtteranceRecord {
        UtteranceRecord {
            id: id.into(),
            label: label.into(),
            frames_dir: Some(PathBuf::from(format!("{id}/frames"))),
            audio_path: None,
            mouth_box: None,
            split: Split::Auto,
            speaker: None,
        }
    }

    fn corpus(classes: usize, per_class: usize) -> Vec<UtteranceRecord> {
        (0..classes)
            .flat_map(|c| (0..per_class).map(move |r| record(&format!("c{c}_r{r}"), &format!("word{c}"))))
            .collect()
    }

    #[test]
    fn empty_manifest() {
        assert!(parse_manifest("", Path::new("/x")).unwrap().is_empty());
        assert!(parse_manifest("\n  \n", Path::new("/x")).unwrap().is_empty());
    }

    #[test]
    fn manifest_validation_errors() {
        let err = parse_manifest(r#"{"id":"a","label":"w"}"#, Path::new(".")).unwrap_err();
        assert!(matches!(&err, Error::NoMedia(id) if id == "a"));
        assert!(err.to_string().contains("\"a\""));

        let dup = "{\"id\":\"a\",\"label\":\"w\",\"audio_path\":\"x.wav\"}\n{\"id\":\"a\",\"label\":\"w\",\"audio_path\":\"y.wav\"}";
        assert!(matches!(
            parse_manifest(dup, Path::new(".")),
            Err(Error::DuplicateId(_))
        ));

        let bad = "{\"id\":\"a\",\"label\":\"w\",\"audio_path\":\"x.wav\"}\n{not json";
        assert!(matches!(
            parse_manifest(bad, Path::new(".")),
            Err(Error::ManifestParse { line: 2, .. })
        ));

        let empty_label = r#"{"id":"a","label":" ","audio_path":"x.wav"}"#;
        assert!(matches!(
            parse_manifest(empty_label, Path::new(".")),
            Err(Error::EmptyLabel(_))
        ));
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let text = r#"{"id":"a","label":"w","frames_dir":"a/f","audio_path":"/abs/a.wav","split":"test"}"#;
        let recs = parse_manifest(text, Path::new("/data/corpus")).unwrap();
        assert_eq!(recs[0].frames_dir.as_deref(), Some(Path::new("/data/corpus/a/f")));
        assert_eq!(recs[0].audio_path.as_deref(), Some(Path::new("/abs/a.wav")));
        assert_eq!(recs[0].split, Split::Test);
    }

    #[test]
    fn full_corpus_shape() {
        let recs: Vec<UtteranceRecord> = (0..12)
            .flat_map(|w| {
                (0..10).flat_map(move |s| {
                    (0..10).map(move |r| {
                        let mut rec = record(&format!("w{w}_s{s}_r{r}"), &format!("word{w}"));
                        rec.speaker = Some(format!("s{s}"));
                        rec
                    })
                })
            })
            .collect();
        let parsed = parse_manifest(&to_manifest_text(&recs), Path::new("")).unwrap();
        assert_eq!(parsed.len(), 1200);
        assert_eq!(class_labels(&parsed).len(), 12);
    }

    #[test]
    fn load_reports_missing_media() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("a/frames")).unwrap();
        let recs = vec![record("a", "w"), record("b", "w")];
        let path = dir.path().join("manifest.jsonl");
        std::fs::write(&path, to_manifest_text(&recs)).unwrap();
        match load_manifest(&path) {
            Err(Error::MissingMedia(m)) => {
                assert_eq!(m.len(), 1);
                assert_eq!(m[0].0, "b");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn split_counts() {
        let (train, test) = split(&corpus(1, 10), &SplitConfig::default()).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));

        let (train, test) = split(&corpus(4, 3), &SplitConfig::default()).unwrap();
        assert_eq!((train.len(), test.len()), (8, 4));
        for c in 0..4 {
            let label = format!("word{c}");
            assert_eq!(train.iter().filter(|r| r.label == label).count(), 2);
        }
    }

    #[test]
    fn split_determinism_and_seed_dependence() {
        let recs = corpus(5, 10);
        let cfg = SplitConfig::default();
        assert_eq!(split(&recs, &cfg).unwrap(), split(&recs, &cfg).unwrap());
        let other = SplitConfig { seed: 7, ..cfg.clone() };
        assert_ne!(split(&recs, &cfg).unwrap().0, split(&recs, &other).unwrap().0);
    }

    #[test]
    fn explicit_assignments_are_honored() {
        let mut recs = corpus(2, 4);
        recs[0].split = Split::Test;
        recs[1].split = Split::Train;
        let (train, test) = split(&recs, &SplitConfig::default()).unwrap();
        assert!(test.iter().any(|r| r.id == recs[0].id));
        assert!(train.iter().any(|r| r.id == recs[1].id));
    }

    #[test]
    fn stratification_needs_two_records() {
        let mut recs = corpus(2, 3);
        recs.push(record("lonely", "solo"));
        assert!(matches!(
            split(&recs, &SplitConfig::default()),
            Err(Error::ClassTooSmall { .. })
        ));
        let flat = SplitConfig {
            stratified: false,
            ..SplitConfig::default()
        };
        let (train, test) = split(&recs, &flat).unwrap();
        assert_eq!((train.len(), test.len()), (4, 3));
        assert!(split(
            &recs,
            &SplitConfig {
                train_fraction: 1.0,
                ..flat
            }
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_records(
            sizes in proptest::collection::vec(2usize..15, 1..6),
            fraction in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let recs: Vec<UtteranceRecord> = sizes
                .iter()
                .enumerate()
                .flat_map(|(c, &n)| (0..n).map(move |r| record(&format!("c{c}_{r}"), &format!("w{c}"))))
                .collect();
            let cfg = SplitConfig { train_fraction: fraction, seed, stratified: true };
            let (train, test) = split(&recs, &cfg).unwrap();
            prop_assert_eq!(train.len() + test.len(), recs.len());
            let mut ids: Vec<&str> = train.iter().chain(&test).map(|r| r.id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), recs.len());
            for (c, &n) in sizes.iter().enumerate() {
                let label = format!("w{c}");
                let k = train.iter().filter(|r| r.label == label).count();
                let floor_k = (n as f64 * fraction + 1e-9).floor() as usize;
                if floor_k >= 1 {
                    prop_assert!((k as f64 / n as f64 - fraction).abs() < 1.0 / n as f64);
                } else {
                    prop_assert_eq!(k, 1);
                }
            }
        }
    }
}
