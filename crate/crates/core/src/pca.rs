//! Eigenspace model built from training feature vectors.
//!
//! Training columns are centred on their mean and the eigenpairs of the
//! unnormalized covariance `C = A·Aᵀ` are obtained from the much smaller Gram
//! matrix `Aᵀ·A` (N×N for N samples of dimension D ≫ N): if `Aᵀ·A·v = λ·v`
//! then `u = A·v / √λ` is a unit eigenvector of `C` with the same eigenvalue.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::write_atomic;

const MAGIC: &[u8; 4] = b"PCA1";

/// Eigenvalues at or below this fraction of the largest are discarded.
pub const RELATIVE_EIGEN_FLOOR: f64 = 1e-10;

/// Number of retained components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Components {
    /// Every component whose eigenvalue clears [`RELATIVE_EIGEN_FLOOR`].
    #[default]
    All,
    Fixed(usize),
}

impl std::str::FromStr for Components {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Components::All);
        }
        s.parse()
            .map(Components::Fixed)
            .map_err(|_| Error::InvalidConfig(format!("components must be \"all\" or an integer, got {s:?}")))
    }
}

impl std::fmt::Display for Components {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Components::All => f.write_str("all"),
            Components::Fixed(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ComponentsRepr {
    Count(u64),
    Word(String),
}

impl Serialize for Components {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Components::All => ComponentsRepr::Word("all".into()),
            Components::Fixed(k) => ComponentsRepr::Count(*k as u64),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Components {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ComponentsRepr::deserialize(d)? {
            ComponentsRepr::Count(k) => Ok(Components::Fixed(k as usize)),
            ComponentsRepr::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub components: Components,
}

/// `N` labelled training columns of a common dimension `D`.
#[derive(Debug, Clone)]
pub struct TrainingMatrix {
    data: DMatrix<f64>,
    labels: Vec<String>,
}

impl TrainingMatrix {
    pub fn new(columns: &[Vec<f64>], labels: Vec<String>) -> Result<Self> {
        if columns.len() < 2 {
            return Err(Error::TooFewSamples(columns.len()));
        }
        if labels.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                actual: labels.len(),
            });
        }
        if let Some(l) = labels.iter().find(|l| l.is_empty()) {
            return Err(Error::EmptyLabel(l.clone()));
        }
        let dim = columns[0].len();
        if dim == 0 {
            return Err(Error::Empty("feature vector"));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: c.len(),
            });
        }
        let data = DMatrix::from_iterator(dim, columns.len(), columns.iter().flatten().copied());
        Ok(Self { data, labels })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.data.column(i).iter().copied().collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: DVector<f64>,
    eigenvalues: Vec<f64>,
    /// D×k, orthonormal columns.
    eigenvectors: DMatrix<f64>,
    /// k×N.
    train_projections: DMatrix<f64>,
    labels: Vec<String>,
}

/// Builds the eigenspace of `train`.
pub fn fit(train: &TrainingMatrix, components: Components) -> Result<PcaModel> {
    let (dim, n) = (train.dim(), train.len());
    if let Components::Fixed(k) = components {
        if k > n - 1 {
            return Err(Error::TooManyComponents {
                requested: k,
                max: n - 1,
            });
        }
    }

    let mean = train.data.column_mean();
    let mut centered = train.data.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }

    let gram = centered.tr_mul(&centered);
    let SymmetricEigen {
        eigenvalues,
        eigenvectors,
    } = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]).then(a.cmp(&b)));

    let lambda_max = eigenvalues[order[0]].max(0.0);
    // Relative floor, raised to an absolute floor at the data scale.
    let abs_floor = 1e-24 * train.data.norm_squared();
    let floor = (RELATIVE_EIGEN_FLOOR * lambda_max).max(abs_floor);
    let mut keep: Vec<usize> = order.into_iter().filter(|&i| eigenvalues[i] > floor).collect();
    if let Components::Fixed(k) = components {
        keep.truncate(k);
    }

    let k = keep.len();
    let mut basis = DMatrix::zeros(dim, k);
    for (j, &i) in keep.iter().enumerate() {
        let u = &centered * eigenvectors.column(i) / eigenvalues[i].sqrt();
        basis.set_column(j, &u);
    }
    reorthonormalize(&mut basis);
    for mut col in basis.column_iter_mut() {
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }

    let train_projections = basis.tr_mul(&centered);
    Ok(PcaModel {
        mean,
        eigenvalues: keep.iter().map(|&i| eigenvalues[i]).collect(),
        eigenvectors: basis,
        train_projections,
        labels: train.labels.clone(),
    })
}

/// One modified Gram–Schmidt sweep in eigenvalue order; removes the small
/// loss of orthogonality in weak directions after the `A·v/√λ` lift.
fn reorthonormalize(basis: &mut DMatrix<f64>) {
    for j in 0..basis.ncols() {
        for i in 0..j {
            let proj = basis.column(i).dot(&basis.column(j));
            let prev = basis.column(i).clone_owned();
            let mut col = basis.column_mut(j);
            col.axpy(-proj, &prev, 1.0);
        }
        let norm = basis.column(j).norm();
        basis.column_mut(j).unscale_mut(norm);
    }
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_train(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        self.eigenvectors.column(j).iter().copied().collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn train_projection(&self, i: usize) -> Vec<f64> {
        self.train_projections.column(i).iter().copied().collect()
    }

    pub fn train_projections(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_train()).map(move |i| {
            let k = self.k();
            &self.train_projections.as_slice()[i * k..(i + 1) * k]
        })
    }

    /// `Eᵀ·(x - m)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let centered = DVector::from_column_slice(x) - &self.mean;
        Ok(self.eigenvectors.tr_mul(&centered).iter().copied().collect())
    }

    /// `m + E·p`.
    pub fn reconstruct(&self, projection: &[f64]) -> Result<Vec<f64>> {
        if projection.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: projection.len(),
            });
        }
        let p = DVector::from_column_slice(projection);
        Ok((&self.mean + &self.eigenvectors * p).iter().copied().collect())
    }

    /// `PCA1` layout: magic, u32 D, N, k, then mean, eigenvalues,
    /// eigenvectors and training projections (column-major f64), then each
    /// label as u32 byte length + UTF-8. All little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (d, n, k) = (self.dim(), self.n_train(), self.k());
        let mut out = Vec::with_capacity(16 + 8 * (d + k + d * k + k * n));
        out.extend_from_slice(MAGIC);
        for v in [d, n, k] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        let floats = self
            .mean
            .iter()
            .chain(&self.eigenvalues)
            .chain(self.eigenvectors.iter())
            .chain(self.train_projections.iter());
        for v in floats {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for label in &self.labels {
            out.extend_from_slice(&(label.len() as u32).to_le_bytes());
            out.extend_from_slice(label.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err("not a PCA1 model file".into());
        }
        let d = r.u32()? as usize;
        let n = r.u32()? as usize;
        let k = r.u32()? as usize;
        if k > n {
            return Err(format!("k = {k} exceeds N = {n}"));
        }
        let mean = DVector::from_vec(r.f64s(d)?);
        let eigenvalues = r.f64s(k)?;
        let eigenvectors = DMatrix::from_vec(d, k, r.f64s(d * k)?);
        let train_projections = DMatrix::from_vec(k, n, r.f64s(k * n)?);
        let labels = (0..n)
            .map(|_| {
                let len = r.u32()? as usize;
                String::from_utf8(r.take(len)?.to_vec()).map_err(|e| e.to_string())
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(Self {
            mean,
            eigenvalues,
            eigenvectors,
            train_projections,
            labels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|msg| Error::format(path, msg))
    }

    pub fn eigenvalues_csv(&self) -> String {
        let total: f64 = self.eigenvalues.iter().sum();
        let mut out = String::from("component,eigenvalue,explained_fraction\n");
        for (i, v) in self.eigenvalues.iter().enumerate() {
            let frac = if total > 0.0 { v / total } else { 0.0 };
            let _ = writeln!(out, "{},{v},{frac}", i + 1);
        }
        out
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, count: usize) -> std::result::Result<Vec<f64>, String> {
        let raw = self.take(count.checked_mul(8).ok_or("size overflow")?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(dim: usize, n: usize, seed: u64) -> TrainingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels = (0..n).map(|i| format!("c{}", i % 3)).collect();
        TrainingMatrix::new(&cols, labels).unwrap()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn two_point_pca() {
        let u = vec![1.0, -2.0, 0.5, 3.0];
        let d = vec![0.3, 0.1, -0.7, 0.2];
        let v: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + b).collect();
        let model = fit(
            &TrainingMatrix::new(&[u, v], vec!["a".into(), "b".into()]).unwrap(),
            Components::All,
        )
        .unwrap();
        assert_eq!(model.k(), 1);
        let e = model.eigenvector(0);
        let cos = e.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>() / (norm(&e) * norm(&d));
        assert!(cos.abs() > 1.0 - 1e-8);
        // Unnormalized covariance of two points: λ = |d|²/2.
        assert!((model.eigenvalues()[0] - norm(&d).powi(2) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_columns_give_empty_spectrum() {
        let col = vec![0.1, 0.7, 1.3, 7.0 / 3.0];
        let model = fit(
            &TrainingMatrix::new(&[col.clone(), col.clone(), col], vec!["a".into(); 3]).unwrap(),
            Components::All,
        )
        .unwrap();
        assert_eq!(model.k(), 0);
        assert!(model.eigenvalues().iter().all(|&l| l <= 1e-10));
        assert!(model.project(&[0.0; 4]).unwrap().is_empty());
    }

    #[test]
    fn input_validation() {
        assert!(matches!(
            TrainingMatrix::new(&[vec![1.0]], vec!["a".into()]),
            Err(Error::TooFewSamples(1))
        ));
        assert!(TrainingMatrix::new(&[vec![1.0], vec![1.0, 2.0]], vec!["a".into(), "b".into()]).is_err());
        assert!(TrainingMatrix::new(&[vec![1.0], vec![2.0]], vec!["a".into(), "".into()]).is_err());
        let t = random_matrix(8, 5, 3);
        assert!(matches!(
            fit(&t, Components::Fixed(5)),
            Err(Error::TooManyComponents { .. })
        ));
        assert_eq!(fit(&t, Components::Fixed(2)).unwrap().k(), 2);
    }

    #[test]
    fn eigen_residuals_are_small() {
        let t = random_matrix(40, 9, 5);
        let model = fit(&t, Components::All).unwrap();
        let a: Vec<Vec<f64>> = (0..t.len())
            .map(|i| t.column(i).iter().zip(model.mean()).map(|(x, m)| x - m).collect())
            .collect();
        let lambda_max = model.eigenvalues()[0];
        for (j, &lambda) in model.eigenvalues().iter().enumerate() {
            let u = model.eigenvector(j);
            // C·u = A·(Aᵀ·u), two matrix-vector products.
            let at_u: Vec<f64> = a
                .iter()
                .map(|col| col.iter().zip(&u).map(|(x, y)| x * y).sum())
                .collect();
            let mut cu = vec![0.0; u.len()];
            for (col, s) in a.iter().zip(&at_u) {
                for (c, x) in cu.iter_mut().zip(col) {
                    *c += s * x;
                }
            }
            let resid: f64 = cu
                .iter()
                .zip(&u)
                .map(|(c, x)| (c - lambda * x).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(resid / lambda_max <= 1e-8, "component {j}: {resid}");
        }
    }

    #[test]
    fn projection_examples() {
        let t = random_matrix(12, 6, 9);
        let model = fit(&t, Components::All).unwrap();
        assert!(model.project(model.mean()).unwrap().iter().all(|v| v.abs() < 1e-12));
        for i in 0..t.len() {
            let p = model.project(&t.column(i)).unwrap();
            let stored = model.train_projection(i);
            assert!(p.iter().zip(&stored).all(|(a, b)| (a - b).abs() < 1e-9));
        }
        let shifted: Vec<f64> = model
            .mean()
            .iter()
            .zip(model.eigenvector(0))
            .map(|(m, e)| m + e)
            .collect();
        let p = model.project(&shifted).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9);
        assert!(p[1..].iter().all(|v| v.abs() < 1e-9));
        assert!(model.project(&[0.0; 3]).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let t = random_matrix(7, 5, 21);
        let model = fit(&t, Components::All).unwrap();
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..4], b"PCA1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 7);
        assert_eq!(PcaModel::from_bytes(&bytes).unwrap(), model);
        assert!(PcaModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(PcaModel::from_bytes(b"PCA2").is_err());
        assert!(model.eigenvalues_csv().starts_with("component,eigenvalue"));
    }

    #[test]
    fn components_parse_and_serialize() {
        assert_eq!("all".parse::<Components>().unwrap(), Components::All);
        assert_eq!("7".parse::<Components>().unwrap(), Components::Fixed(7));
        assert!("seven".parse::<Components>().is_err());
        let cfg: PcaConfig = toml::from_str("components = 4").unwrap();
        assert_eq!(cfg.components, Components::Fixed(4));
        let cfg: PcaConfig = toml::from_str("components = \"all\"").unwrap();
        assert_eq!(cfg.components, Components::All);
        assert_eq!(toml::to_string(&cfg).unwrap().trim(), "components = \"all\"");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn model_invariants(dim in 3usize..30, n in 2usize..12, seed in any::<u64>()) {
            let t = random_matrix(dim, n, seed);
            let model = fit(&t, Components::All).unwrap();
            prop_assert!(model.k() < n);
            prop_assert!(model.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
            for i in 0..model.k() {
                let ei = model.eigenvector(i);
                let pivot = ei.iter().copied().fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b });
                prop_assert!(pivot > 0.0);
                for j in 0..model.k() {
                    let dot: f64 = ei.iter().zip(model.eigenvector(j)).map(|(a, b)| a * b).sum();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - expected).abs() <= 1e-8);
                }
            }
            // Projection variance follows the eigenvalue order.
            let var = |j: usize| (0..n).map(|i| model.train_projection(i)[j].powi(2)).sum::<f64>();
            for j in 1..model.k() {
                prop_assert!(var(j - 1) >= var(j) * (1.0 - 1e-9));
            }
            for i in 0..n {
                let col = t.column(i);
                let back = model.reconstruct(&model.train_projection(i)).unwrap();
                let err = norm(&col.iter().zip(&back).map(|(a, b)| a - b).collect::<Vec<_>>());
                prop_assert!(err <= 1e-6 * norm(&col));
            }
        }
    }
}
