//! Datasets, synthetic generators and the connectivity pipeline.

mod connectivity;
mod synth;

pub use connectivity::{
    bootstrap_connectivity, matricize, pair_index, pair_of, pearson_connectivity, vectorize_upper,
    ConnectivityVector, TimeSeriesTable,
};
pub use synth::{
    axis_clusters, diagonal_clusters, diagonal_clusters_elongated, sparse_signal_synth, two_moons,
    SPARSE_TARGET,
};

use crate::error::{check_len, Error, Result};
use crate::linalg::DenseMatrix;

/// Feature matrix with binary labels and optional continuous targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DenseMatrix,
    labels: Vec<u8>,
    targets: Vec<(String, Vec<f64>)>,
    ground_truth_support: Option<Vec<usize>>,
    sample_ids: Vec<String>,
    feature_names: Vec<String>,
}

impl LabeledDataset {
    /// Labels must be 0 or 1. Sample ids default to `s0, s1, …` and feature
    /// names to `f0, f1, …`.
    pub fn new(features: DenseMatrix, labels: Vec<u8>) -> Result<Self> {
        check_len(features.rows(), labels.len())?;
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::input(format!(
                "label of sample {i} is {}, expected 0 or 1",
                labels[i]
            )));
        }
        if features.cols() == 0 {
            return Err(Error::input("dataset needs at least one feature column"));
        }
        let sample_ids = (0..labels.len()).map(|i| format!("s{i}")).collect();
        let feature_names = (0..features.cols()).map(|j| format!("f{j}")).collect();
        Ok(LabeledDataset {
            features,
            labels,
            targets: Vec::new(),
            ground_truth_support: None,
            sample_ids,
            feature_names,
        })
    }

    pub fn with_target(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        check_len(self.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("target {name} has non-finite values")));
        }
        if self.targets.iter().any(|(n, _)| *n == name) {
            return Err(Error::input(format!("duplicate target {name}")));
        }
        self.targets.push((name, values));
        Ok(self)
    }

    pub fn with_support(mut self, support: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = support.iter().find(|&&j| j >= self.dim()) {
            return Err(Error::input(format!("support index {bad} out of range")));
        }
        self.ground_truth_support = Some(support);
        Ok(self)
    }

    pub fn with_sample_ids(mut self, ids: Vec<String>) -> Result<Self> {
        check_len(self.len(), ids.len())?;
        self.sample_ids = ids;
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        check_len(self.dim(), names.len())?;
        self.feature_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn targets(&self) -> &[(String, Vec<f64>)] {
        &self.targets
    }

    pub fn target(&self, name: &str) -> Result<&[f64]> {
        self.targets
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| {
                let known: Vec<&str> = self.targets.iter().map(|(n, _)| n.as_str()).collect();
                Error::input(format!("unknown target {name:?}; available: {known:?}"))
            })
    }

    pub fn ground_truth_support(&self) -> Option<&[usize]> {
        self.ground_truth_support.as_deref()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// `(count of label 0, count of label 1)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.len() - ones, ones)
    }

    /// Subset of samples, keeping targets and ids aligned.
    pub fn select_rows(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            targets: self
                .targets
                .iter()
                .map(|(n, v)| (n.clone(), idx.iter().map(|&i| v[i]).collect()))
                .collect(),
            ground_truth_support: self.ground_truth_support.clone(),
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Subset of feature columns. Ground-truth support is dropped since its
    /// indices refer to the original columns.
    pub fn select_features(&self, idx: &[usize]) -> Result<LabeledDataset> {
        if idx.is_empty() {
            return Err(Error::input("feature subset is empty"));
        }
        if let Some(&bad) = idx.iter().find(|&&j| j >= self.dim()) {
            return Err(Error::input(format!(
                "feature index {bad} out of range for dimension {}",
                self.dim()
            )));
        }
        Ok(LabeledDataset {
            features: self.features.select_columns(idx),
            labels: self.labels.clone(),
            targets: self.targets.clone(),
            ground_truth_support: None,
            sample_ids: self.sample_ids.clone(),
            feature_names: idx.iter().map(|&j| self.feature_names[j].clone()).collect(),
        })
    }
}
