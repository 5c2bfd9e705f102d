//! Datasets, benchmark generators, CSV ingestion, scaling, splits and metrics.

mod csv_io;
mod generators;
mod metrics;
mod split;

pub use csv_io::{load_csv, ColumnRef};
pub use generators::{
    add_gaussian_noise, box_jenkins_patterns, mackey_glass_dataset, mackey_glass_patterns,
    mackey_glass_series, mackey_glass_series_with_steps, plant_dataset, plant_series, MACKEY_GLASS_LAGS, MG_STEP,
};
pub use metrics::{correlation, rmse, Metrics};
pub use split::{split, Partition, SplitScheme};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{FuzzyTree, TreeError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}, column {column}: '{value}' is not a number")]
    NonNumeric { line: u64, column: usize, value: String },
    #[error("line {line}: target '{value}' is not a number")]
    NonNumericTarget { line: u64, value: String },
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset is empty")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("correlation is undefined for a constant vector")]
    ConstantVector,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Per-feature min/max of the training inputs plus the target range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
}

impl Scaler {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(DataError::Empty);
        }
        let d = ds.n_features();
        let mut feature_min = vec![f64::INFINITY; d];
        let mut feature_max = vec![f64::NEG_INFINITY; d];
        for row in ds.rows() {
            for (j, &v) in row.iter().enumerate() {
                feature_min[j] = feature_min[j].min(v);
                feature_max[j] = feature_max[j].max(v);
            }
        }
        let (target_min, target_max) = ds
            .targets()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
        Ok(Self { feature_min, feature_max, target_min, target_max })
    }

    pub fn n_features(&self) -> usize {
        self.feature_min.len()
    }

    /// Maps one value of feature `j` into `[0, 1]`, clamping values outside
    /// the training range. Constant features map to 0.5.
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.feature_min[j], self.feature_max[j]);
        if hi > lo {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }

    pub fn unscale(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.feature_min[j], self.feature_max[j]);
        if hi > lo {
            lo + v * (hi - lo)
        } else {
            lo
        }
    }

    /// Scales the inputs of `ds`; targets are left in their original units.
    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.n_features() != self.n_features() {
            return Err(DataError::LengthMismatch(ds.n_features(), self.n_features()));
        }
        let d = ds.n_features();
        let inputs = ds
            .inputs
            .iter()
            .enumerate()
            .map(|(k, &v)| self.scale(k % d, v))
            .collect();
        Ok(Dataset { inputs, ..ds.clone() })
    }

    pub fn inverse_transform(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.n_features() != self.n_features() {
            return Err(DataError::LengthMismatch(ds.n_features(), self.n_features()));
        }
        let d = ds.n_features();
        let inputs = ds
            .inputs
            .iter()
            .enumerate()
            .map(|(k, &v)| self.unscale(k % d, v))
            .collect();
        Ok(Dataset { inputs, ..ds.clone() })
    }
}

/// Min–max scales the inputs into `[0, 1]` using the statistics of `ds`
/// itself and returns the fitted scaler for reuse on test data.
pub fn normalize(ds: &Dataset) -> Result<(Dataset, Scaler)> {
    let scaler = Scaler::fit(ds)?;
    let scaled = scaler.transform(ds)?;
    Ok((scaled, scaler))
}

/// Input matrix (row-major) with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    n_features: usize,
    targets: Vec<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        if rows.len() != targets.len() {
            return Err(DataError::LengthMismatch(rows.len(), targets.len()));
        }
        let n_features = rows[0].len();
        if n_features == 0 {
            return Err(DataError::InvalidArgument("rows have no features".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
            return Err(DataError::LengthMismatch(bad.len(), n_features));
        }
        let feature_names = if feature_names.is_empty() {
            (1..=n_features).map(|j| format!("x{j}")).collect()
        } else if feature_names.len() == n_features {
            feature_names
        } else {
            return Err(DataError::LengthMismatch(feature_names.len(), n_features));
        };
        Ok(Self { inputs: rows.concat(), n_features, targets, feature_names })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.inputs.chunks_exact(self.n_features)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(idx.len() * self.n_features);
        for &i in idx {
            inputs.extend_from_slice(self.row(i));
        }
        Dataset {
            inputs,
            n_features: self.n_features,
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Tree output for every row.
    pub fn predict(&self, tree: &FuzzyTree) -> Result<Vec<f64>> {
        let need = tree.required_inputs();
        if need > self.n_features {
            return Err(TreeError::TerminalOutOfRange { index: need - 1, len: self.n_features }.into());
        }
        Ok(self.rows().map(|r| tree.evaluate_unchecked(r)).collect())
    }

    /// Training error of `tree` on this dataset. Non-finite results map to
    /// `+inf` so they always rank last.
    pub fn tree_rmse(&self, tree: &FuzzyTree) -> Result<f64> {
        let need = tree.required_inputs();
        if need > self.n_features {
            return Err(TreeError::TerminalOutOfRange { index: need - 1, len: self.n_features }.into());
        }
        let mut sse = 0.0;
        for (r, &t) in self.rows().zip(&self.targets) {
            let e = t - tree.evaluate_unchecked(r);
            sse += e * e;
        }
        let e = (sse / self.len() as f64).sqrt();
        Ok(if e.is_finite() { e } else { f64::INFINITY })
    }

    /// Writes `feature..., target` rows with a header line.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = self.feature_names.clone();
        header.push("target".into());
        out.write_record(&header)?;
        for (row, t) in self.rows().zip(&self.targets) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(t.to_string());
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| DataError::Io { path: "<writer>".into(), source: e })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: Vec<Vec<f64>>) -> Dataset {
        let n = rows.len();
        Dataset::new(rows, (0..n).map(|i| i as f64).collect(), vec![]).unwrap()
    }

    #[test]
    fn unit_range_feature_is_unchanged() {
        let d = ds(vec![vec![0.0], vec![0.25], vec![1.0]]);
        let (n, _) = normalize(&d).unwrap();
        assert_eq!(n, d);
    }

    #[test]
    fn constant_column_maps_to_half() {
        let d = ds(vec![vec![3.0, 1.0], vec![3.0, 2.0]]);
        let (n, _) = normalize(&d).unwrap();
        assert_eq!(n.row(0), &[0.5, 0.0]);
        assert_eq!(n.row(1), &[0.5, 1.0]);
    }

    #[test]
    fn out_of_range_test_rows_are_clamped() {
        let train = ds(vec![vec![1.0], vec![3.0]]);
        let (_, scaler) = normalize(&train).unwrap();
        let test = ds(vec![vec![0.0], vec![2.0], vec![5.0]]);
        let scaled = scaler.transform(&test).unwrap();
        assert_eq!(scaled.rows().map(|r| r[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn targets_stay_in_original_units() {
        let d = Dataset::new(vec![vec![2.0], vec![4.0]], vec![50.0, 60.0], vec![]).unwrap();
        let (n, s) = normalize(&d).unwrap();
        assert_eq!(n.targets(), &[50.0, 60.0]);
        assert_eq!((s.target_min, s.target_max), (50.0, 60.0));
    }

    #[test]
    fn normalize_round_trips_training_inputs() {
        let d = ds(vec![vec![0.3, -2.0, 7.0], vec![1.7, 4.0, 7.0], vec![-0.2, 0.5, 7.0]]);
        let (n, s) = normalize(&d).unwrap();
        let back = s.inverse_transform(&n).unwrap();
        for (a, b) in back.rows().zip(d.rows()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_and_ragged_construction_fail() {
        assert!(matches!(Dataset::new(vec![], vec![], vec![]), Err(DataError::Empty)));
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0.0, 0.0], vec![]).is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![0.0, 1.0], vec![]).is_err());
    }

    #[test]
    fn subset_picks_rows() {
        let d = ds(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let s = d.subset(&[2, 0]);
        assert_eq!(s.row(0), &[5.0, 6.0]);
        assert_eq!(s.targets(), &[2.0, 0.0]);
    }
}
