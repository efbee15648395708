//! Nearest-neighbour matching in eigenspace and confusion-matrix reporting.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pca::PcaModel;

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub predicted_label: String,
    pub nearest_index: usize,
    pub distance: f64,
}

/// 1-NN over arbitrary labelled templates. Ties go to the lowest index.
pub fn nearest_template<'a, I>(query: &[f64], templates: I) -> Result<Prediction>
where
    I: IntoIterator<Item = (&'a [f64], &'a str)>,
{
    let mut best: Option<Prediction> = None;
    for (i, (t, label)) in templates.into_iter().enumerate() {
        let d = euclidean(query, t)?;
        if best.as_ref().is_none_or(|b| d < b.distance) {
            best = Some(Prediction {
                predicted_label: label.to_string(),
                nearest_index: i,
                distance: d,
            });
        }
    }
    best.ok_or(Error::Empty("model has no training projections"))
}

/// Label of the training column closest to `test_proj` in eigenspace.
pub fn nearest(test_proj: &[f64], model: &PcaModel) -> Result<Prediction> {
    nearest_template(
        test_proj,
        model.train_projections().zip(model.labels().iter().map(String::as_str)),
    )
}

/// Projects `x` and classifies it.
pub fn classify(x: &[f64], model: &PcaModel) -> Result<Prediction> {
    nearest(&model.project(x)?, model)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let c = classes.len();
        Self {
            classes,
            counts: vec![vec![0; c]; c],
        }
    }

    fn class_index(&self, label: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn record(&mut self, truth: &str, predicted: &str) -> Result<()> {
        let t = self.class_index(truth)?;
        let p = self.class_index(predicted)?;
        self.counts[t][p] += 1;
        Ok(())
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_total(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Diagonal over row sum; an empty row reports 0.
    pub fn class_accuracy(&self, class: usize) -> f64 {
        ratio(self.counts[class][class], self.row_total(class))
    }

    pub fn overall_accuracy(&self) -> f64 {
        ratio(self.correct(), self.total())
    }

    pub fn overall_percent(&self) -> String {
        truncated_percent(self.correct(), self.total())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true");
        for c in &self.classes {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.counts) {
            out.push_str(&csv_field(c));
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width table: tested count, word, one column per predicted
    /// class, then recognized / missed / accuracy and a final result line.
    pub fn to_ascii_table(&self) -> String {
        let name_w = self
            .classes
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("Final Result".len());
        let col_w: Vec<usize> = self
            .classes
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let widest = self.counts.iter().map(|r| r[j].to_string().len()).max().unwrap_or(1);
                c.len().max(widest)
            })
            .collect();
        let mut out = String::new();

        let _ = write!(out, "{:>6}  {:<name_w$}", "Tested", "Word");
        for (c, w) in self.classes.iter().zip(&col_w) {
            let _ = write!(out, "  {c:>w$}");
        }
        let _ = writeln!(out, "  {:>10}  {:>6}  {:>8}", "Recognized", "Missed", "Accuracy");

        for (i, c) in self.classes.iter().enumerate() {
            let total = self.row_total(i);
            let hit = self.counts[i][i];
            let _ = write!(out, "{total:>6}  {c:<name_w$}");
            for (v, w) in self.counts[i].iter().zip(&col_w) {
                let _ = write!(out, "  {v:>w$}");
            }
            let _ = writeln!(
                out,
                "  {hit:>10}  {:>6}  {:>8}",
                total - hit,
                truncated_percent(hit, total)
            );
        }

        let counts_w: usize = col_w.iter().map(|w| w + 2).sum();
        let lead = 6 + 2 + name_w + counts_w;
        let correct = self.correct();
        let _ = writeln!(out, "{:<lead$}  {correct:>10}  {:>6}", "Total", self.total() - correct);
        let _ = writeln!(
            out,
            "{:<lead$}  {:>10}  {:>6}  {:>8}",
            "Final Result",
            "",
            "",
            self.overall_percent()
        );
        out
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            classes: self.classes.clone(),
            counts: self.counts.clone(),
            per_class_accuracy: (0..self.classes.len()).map(|i| self.class_accuracy(i)).collect(),
            correct: self.correct(),
            total: self.total(),
            overall_accuracy: self.overall_accuracy(),
            overall_percent: self.overall_percent(),
        }
    }
}

/// Machine-readable evaluation result with full-precision accuracies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub per_class_accuracy: Vec<f64>,
    pub correct: u64,
    pub total: u64,
    pub overall_accuracy: f64,
    pub overall_percent: String,
}

/// Tallies predictions against ground truth.
pub fn evaluate(predictions: &[Prediction], truths: &[String], classes: &[String]) -> Result<ConfusionMatrix> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: predictions.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(classes.to_vec());
    for (p, t) in predictions.iter().zip(truths) {
        cm.record(t, &p.predicted_label)?;
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Percentage truncated (not rounded) to two decimals with trailing zeros
/// dropped: 23/36 → "63.88%", 1/1 → "100%", 0/3 → "0%".
pub fn truncated_percent(num: u64, den: u64) -> String {
    if den == 0 {
        return "0%".into();
    }
    let hundredths = (num as u128 * 10_000) / den as u128;
    let (whole, frac) = (hundredths / 100, hundredths % 100);
    match frac {
        0 => format!("{whole}%"),
        f if f % 10 == 0 => format!("{whole}.{}%", f / 10),
        f => format!("{whole}.{f:02}%"),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
