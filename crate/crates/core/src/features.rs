//! Per-utterance feature tables and their on-disk formats.
//!
//! CSV: header `id,f0,…,f{D-1},label`, one row per utterance, label last.
//! Binary: 4-byte magic (`ZVF1` visual, `ZAF1` acoustic), u32 row count,
//! u32 dimension, then row-major little-endian f64 values. The binary form
//! carries no ids or labels; its rows follow the CSV row order.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Visual,
    Audio,
}

impl Modality {
    pub fn magic(self) -> &'static [u8; 4] {
        match self {
            Modality::Visual => b"ZVF1",
            Modality::Audio => b"ZAF1",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Visual => "visual",
            Modality::Audio => "audio",
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "visual" => Ok(Modality::Visual),
            "audio" | "acoustic" => Ok(Modality::Audio),
            other => Err(Error::InvalidConfig(format!("unknown modality {other:?}"))),
        }
    }
}

/// Feature vector of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceFeatures {
    pub id: String,
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    modality: Modality,
    dim: usize,
    rows: Vec<UtteranceFeatures>,
}

impl FeatureMatrix {
    pub fn new(modality: Modality, dim: usize) -> Self {
        Self {
            modality,
            dim,
            rows: Vec::new(),
        }
    }

    pub fn from_rows(modality: Modality, dim: usize, rows: Vec<UtteranceFeatures>) -> Result<Self> {
        let mut m = Self::new(modality, dim);
        for r in rows {
            m.push(r)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, row: UtteranceFeatures) -> Result<()> {
        if row.values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: row.values.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[UtteranceFeatures] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&UtteranceFeatures> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        header.extend((0..self.dim).map(|i| format!("f{i}")));
        header.push("label".into());
        w.write_record(&header).expect("in-memory csv");
        let mut fields = Vec::with_capacity(self.dim + 2);
        for row in &self.rows {
            fields.clear();
            fields.push(row.id.clone());
            fields.extend(row.values.iter().map(|v| {
                let mut s = String::new();
                let _ = write!(s, "{v:?}");
                s
            }));
            fields.push(row.label.clone());
            w.write_record(&fields).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    pub fn from_csv(text: &str, modality: Modality) -> std::result::Result<Self, String> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| e.to_string())?.clone();
        let n = headers.len();
        if n < 2 || &headers[0] != "id" || &headers[n - 1] != "label" {
            return Err("expected header id,f0,...,label".into());
        }
        let dim = n - 2;
        let mut m = Self::new(modality, dim);
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            let values = (1..=dim)
                .map(|i| record[i].parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| format!("row {}: {e}", line + 1))?;
            m.rows.push(UtteranceFeatures {
                id: record[0].to_string(),
                label: record[n - 1].to_string(),
                values,
            });
        }
        Ok(m)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.dim * self.rows.len());
        out.extend_from_slice(self.modality.magic());
        out.extend_from_slice(&(self.rows.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for row in &self.rows {
            for v in &row.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Decodes a binary table; returns the modality and the rows' values.
    pub fn decode_binary(bytes: &[u8]) -> std::result::Result<(Modality, Vec<Vec<f64>>), String> {
        if bytes.len() < 12 {
            return Err("truncated header".into());
        }
        let modality = match &bytes[..4] {
            b"ZVF1" => Modality::Visual,
            b"ZAF1" => Modality::Audio,
            _ => return Err("unknown magic".into()),
        };
        let rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = &bytes[12..];
        if body.len() != rows * dim * 8 {
            return Err(format!(
                "expected {} payload bytes, found {}",
                rows * dim * 8,
                body.len()
            ));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if dim == 0 {
            return Ok((modality, vec![Vec::new(); rows]));
        }
        Ok((modality, values.chunks(dim).map(<[f64]>::to_vec).collect()))
    }

    /// Writes `<path>` as CSV and the binary twin next to it with a `.bin`
    /// extension.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        write_atomic(csv_path, self.to_csv().as_bytes())?;
        write_atomic(&binary_path(csv_path), &self.to_binary())
    }

    /// Loads a CSV table. Without an explicit modality it is taken from the
    /// magic of the binary twin.
    pub fn load(csv_path: &Path, modality: Option<Modality>) -> Result<Self> {
        let modality = match modality {
            Some(m) => m,
            None => {
                let bin = binary_path(csv_path);
                let mut magic = [0u8; 4];
                std::fs::File::open(&bin)
                    .and_then(|mut f| std::io::Read::read_exact(&mut f, &mut magic))
                    .map_err(|e| Error::io(&bin, e))?;
                match &magic {
                    b"ZVF1" => Modality::Visual,
                    b"ZAF1" => Modality::Audio,
                    _ => return Err(Error::format(bin, "unknown feature magic")),
                }
            }
        };
        let text = std::fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
        Self::from_csv(&text, modality).map_err(|m| Error::format(csv_path, m))
    }
}

pub fn binary_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("bin")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(id: &str, label: &str, values: Vec<f64>) -> UtteranceFeatures {
        UtteranceFeatures {
            id: id.into(),
            label: label.into(),
            values,
        }
    }

    #[test]
    fn empty_table_round_trips() {
        let m = FeatureMatrix::new(Modality::Visual, 468);
        let back = FeatureMatrix::from_csv(&m.to_csv(), Modality::Visual).unwrap();
        assert_eq!(back, m);
        let bin = m.to_binary();
        assert_eq!(bin.len(), 12);
        assert_eq!(&bin[..4], b"ZVF1");
    }

    #[test]
    fn dimension_is_enforced() {
        let mut m = FeatureMatrix::new(Modality::Audio, 2);
        assert!(m.push(row("a", "w", vec![1.0])).is_err());
        m.push(row("a", "w", vec![1.0, 2.0])).unwrap();
        assert_eq!(&m.to_binary()[..4], b"ZAF1");
        assert!(FeatureMatrix::from_csv("a,b\n1,2\n", Modality::Audio).is_err());
    }

    #[test]
    fn labels_with_commas_survive() {
        let m = FeatureMatrix::from_rows(Modality::Audio, 1, vec![row("x,1", "new \"york\", ny", vec![0.5])]).unwrap();
        assert_eq!(FeatureMatrix::from_csv(&m.to_csv(), Modality::Audio).unwrap(), m);
    }

    proptest! {
        #[test]
        fn csv_and_binary_round_trip(
            values in proptest::collection::vec(proptest::collection::vec(-1e300f64..1e300, 5), 0..8),
        ) {
            let rows = values.iter().enumerate().map(|(i, v)| row(&format!("u{i}"), "w", v.clone())).collect();
            let m = FeatureMatrix::from_rows(Modality::Visual, 5, rows).unwrap();
            prop_assert_eq!(&FeatureMatrix::from_csv(&m.to_csv(), Modality::Visual).unwrap(), &m);
            let (modality, decoded) = FeatureMatrix::decode_binary(&m.to_binary()).unwrap();
            prop_assert_eq!(modality, Modality::Visual);
            prop_assert_eq!(decoded, values);
        }
    }
}
