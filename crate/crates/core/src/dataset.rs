//! Labelled tabular datasets: CSV loading, built-in generators, splits.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rng::{seeded, Rng};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("row {row}: expected {expected} fields, found {actual}")]
    Ragged { row: usize, expected: usize, actual: usize },
    #[error("row {row}, column {column}: `{value}` is not a number")]
    NonNumeric { row: usize, column: usize, value: String },
    #[error("row {row}: label `{value}` is not a non-negative integer")]
    BadLabel { row: usize, value: String },
    #[error("class {0} has no rows; labels must cover 0..C-1")]
    MissingClass(usize),
    #[error("dataset has no rows")]
    Empty,
    #[error("dataset needs a header, at least one feature column and a label column")]
    NoColumns,
    #[error("unknown built-in dataset `{0}`")]
    UnknownBuiltin(String),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n_features × n_rows`: one column per example.
    features: DMatrix<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    /// Builds a dataset from row-major features; labels must cover `0..C`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        let f = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != f {
                return Err(DatasetError::Ragged { row: i + 1, expected: f, actual: r.len() });
            }
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        for c in 0..n_classes {
            if !labels.contains(&c) {
                return Err(DatasetError::MissingClass(c));
            }
        }
        let features = DMatrix::from_fn(f, rows.len(), |i, j| rows[j][i]);
        Ok(Self { features, labels, n_classes })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Zero mean and unit (population) variance per feature. Constant
    /// features are only centered.
    pub fn standardize(&mut self) {
        let n = self.n_rows() as f64;
        for i in 0..self.features.nrows() {
            let mut row = self.features.row_mut(i);
            let mean = row.sum() / n;
            row.add_scalar_mut(-mean);
            let sd = (row.norm_squared() / n).sqrt();
            if sd > 1e-12 {
                row /= sd;
            }
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let cols: Vec<_> = idx.iter().map(|&i| self.features.column(i)).collect();
        Self {
            features: DMatrix::from_columns(&cols),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// Deterministic shuffled split into `(train, validation)`.
    pub fn split(&self, train_fraction: f64, seed: u64) -> (Self, Self) {
        let mut idx: Vec<usize> = (0..self.n_rows()).collect();
        idx.shuffle(&mut seeded(seed));
        let n_train = ((self.n_rows() as f64 * train_fraction).round() as usize).clamp(1, self.n_rows().max(2) - 1);
        (self.subset(&idx[..n_train]), self.subset(&idx[n_train..]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    File(PathBuf),
    Builtin(String),
}

pub const BUILTIN_DATASETS: [&str; 2] = ["synthetic-2class", "digits-small"];

/// Loads and standardizes a dataset.
pub fn load_dataset(source: &DatasetSource) -> Result<Dataset, DatasetError> {
    let mut ds = match source {
        DatasetSource::File(p) => read_csv(p)?,
        DatasetSource::Builtin(name) => match name.as_str() {
            "synthetic-2class" => two_moons(500, 0.1, 0),
            "digits-small" => digits_small(60, 0),
            other => return Err(DatasetError::UnknownBuiltin(other.to_string())),
        },
    };
    ds.standardize();
    Ok(ds)
}

fn read_csv(path: &Path) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    parse_csv(&text)
}

/// Parses comma-separated text with a header; the last column is the label.
/// Row numbers in errors count data rows from 1.
pub fn parse_csv(text: &str) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let width = reader.headers()?.len();
    if width < 2 {
        return Err(DatasetError::NoColumns);
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != width {
            return Err(DatasetError::Ragged { row, expected: width, actual: rec.len() });
        }
        let mut feats = Vec::with_capacity(width - 1);
        for (column, cell) in rec.iter().take(width - 1).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| DatasetError::NonNumeric {
                row,
                column: column + 1,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NonNumeric { row, column: column + 1, value: cell.to_string() });
            }
            feats.push(v);
        }
        let cell = rec[width - 1].trim();
        let label: usize = cell.parse().map_err(|_| DatasetError::BadLabel { row, value: cell.to_string() })?;
        rows.push(feats);
        labels.push(label);
    }
    Dataset::from_rows(&rows, labels)
}

/// Two interleaved half circles with Gaussian jitter, alternating labels.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = seeded(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 2;
        let a = PI * rng.random::<f64>();
        let (x, y) = if c == 0 { (a.cos(), a.sin()) } else { (1.0 - a.cos(), 0.5 - a.sin()) };
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        rows.push(vec![x + noise * nx, y + noise * ny]);
        labels.push(c);
    }
    Dataset::from_rows(&rows, labels).expect("generator output is well formed")
}

/// Seven-segment strokes lit for each digit: top, upper-left, upper-right,
/// middle, lower-left, lower-right, bottom.
const SEGMENTS: [[bool; 7]; 10] = [
    [true, true, true, false, true, true, true],
    [false, false, true, false, false, true, false],
    [true, false, true, true, true, false, true],
    [true, false, true, true, false, true, true],
    [false, true, true, true, false, true, false],
    [true, true, false, true, false, true, true],
    [true, true, false, true, true, true, true],
    [true, false, true, false, false, true, false],
    [true, true, true, true, true, true, true],
    [true, true, true, true, false, true, true],
];

fn digit_pixels(digit: usize) -> [[f64; 8]; 8] {
    let mut img = [[0.0; 8]; 8];
    let s = SEGMENTS[digit];
    let mut set = |r: usize, c: usize| img[r][c] = 1.0;
    if s[0] {
        (2..6).for_each(|c| set(1, c));
    }
    if s[1] {
        (1..4).for_each(|r| set(r, 1));
    }
    if s[2] {
        (1..4).for_each(|r| set(r, 6));
    }
    if s[3] {
        (2..6).for_each(|c| set(4, c));
    }
    if s[4] {
        (4..7).for_each(|r| set(r, 1));
    }
    if s[5] {
        (4..7).for_each(|r| set(r, 6));
    }
    if s[6] {
        (2..6).for_each(|c| set(6, c));
    }
    img
}

/// Small 8×8 digit-style images: seven-segment glyphs with random one-pixel
/// shifts, stroke intensity variation and pixel noise.
pub fn digits_small(per_class: usize, seed: u64) -> Dataset {
    let mut rng: Rng = seeded(seed);
    let mut rows = Vec::with_capacity(per_class * 10);
    let mut labels = Vec::with_capacity(per_class * 10);
    for k in 0..per_class * 10 {
        let digit = k % 10;
        let glyph = digit_pixels(digit);
        let dr = rng.random_range(-1i32..=1);
        let dc = rng.random_range(-1i32..=1);
        let ink = 0.6 + 0.8 * rng.random::<f64>();
        let mut px = Vec::with_capacity(64);
        for r in 0..8i32 {
            for c in 0..8i32 {
                let (sr, sc) = (r - dr, c - dc);
                let v = if (0..8).contains(&sr) && (0..8).contains(&sc) {
                    glyph[sr as usize][sc as usize]
                } else {
                    0.0
                };
                let noise: f64 = rng.sample(StandardNormal);
                px.push(ink * v + 0.35 * noise);
            }
        }
        rows.push(px);
        labels.push(digit);
    }
    Dataset::from_rows(&rows, labels).expect("generator output is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_shapes() {
        let d = load_dataset(&DatasetSource::Builtin("synthetic-2class".into())).unwrap();
        assert_eq!((d.n_rows(), d.n_features(), d.n_classes()), (500, 2, 2));
        let d = load_dataset(&DatasetSource::Builtin("digits-small".into())).unwrap();
        assert_eq!((d.n_rows(), d.n_features(), d.n_classes()), (600, 64, 10));
        assert!(matches!(
            load_dataset(&DatasetSource::Builtin("mnist".into())),
            Err(DatasetError::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn standardized_columns() {
        let d = load_dataset(&DatasetSource::Builtin("digits-small".into())).unwrap();
        let n = d.n_rows() as f64;
        for row in d.features().row_iter() {
            let mean = row.sum() / n;
            let sd = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_errors_name_rows() {
        let mut text = String::from("a,b,label\n");
        for i in 1..=20 {
            if i == 17 {
                text.push_str("1.0,2\n");
            } else {
                text.push_str(&format!("{}.5,{},{}\n", i, i * 2, i % 2));
            }
        }
        let err = parse_csv(&text).unwrap_err();
        assert!(matches!(err, DatasetError::Ragged { row: 17, .. }), "{err}");
        assert!(err.to_string().contains("row 17"));

        let err = parse_csv("a,label\nx,0\n").unwrap_err();
        assert!(matches!(err, DatasetError::NonNumeric { row: 1, column: 1, .. }));
        let err = parse_csv("a,label\n1,0\n2,-1\n").unwrap_err();
        assert!(matches!(err, DatasetError::BadLabel { row: 2, .. }));
        let err = parse_csv("a,label\n1,0\n2,2\n").unwrap_err();
        assert!(matches!(err, DatasetError::MissingClass(1)));
    }

    #[test]
    fn split_is_deterministic() {
        let d = two_moons(50, 0.1, 3);
        let (a, b) = d.split(0.8, 7);
        let (c, _) = d.split(0.8, 7);
        assert_eq!(a, c);
        assert_eq!(a.n_rows() + b.n_rows(), 50);
        assert_eq!(a.n_rows(), 40);
    }
}
