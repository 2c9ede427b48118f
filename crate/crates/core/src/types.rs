//! Shared domain types: feature and signature matrices, assignments with
//! their one-hot views, the mapping matrix, centroid sets and
//! hyperparameters.
//!
//! All matrices store instances (or classes) as columns. Assignments are
//! 0-based in memory; file formats and error messages use 1-based labels.

use nalgebra::{DMatrix, DVectorView};

use crate::error::{Result, ZslError};

fn check_finite(data: &DMatrix<f64>, what: &str) -> Result<()> {
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        let (row, col) = (pos % data.nrows(), pos / data.nrows());
        return Err(ZslError::NonFinite(format!(
            "{what} entry ({}, {}) is not finite",
            row + 1,
            col + 1
        )));
    }
    Ok(())
}

/// Squared Euclidean distance between two equally sized columns.
pub(crate) fn sq_dist(a: DVectorView<'_, f64>, b: DVectorView<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the smallest value, lowest index on ties. `None` when empty.
pub(crate) fn argmin(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((j, v)),
        }
    }
    best.map(|(j, _)| j)
}

/// d×N matrix of instance features, one instance per column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
    normalized: bool,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(ZslError::ShapeMismatch(
                "feature dimension must be at least 1".into(),
            ));
        }
        check_finite(&data, "feature matrix")?;
        Ok(Self {
            data,
            normalized: false,
        })
    }

    /// Feature matrix with `dim` rows and no instances.
    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, 0))
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    /// True when produced by [`normalize_l1`].
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn column(&self, i: usize) -> DVectorView<'_, f64> {
        self.data.column(i)
    }

    /// Columns `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            data: self.data.select_columns(indices),
            normalized: self.normalized,
        }
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn concat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.dim() != other.dim() {
            return Err(ZslError::DimensionMismatch(format!(
                "cannot concatenate feature matrices of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let mut data = DMatrix::zeros(self.dim(), self.len() + other.len());
        data.columns_mut(0, self.len()).copy_from(&self.data);
        data.columns_mut(self.len(), other.len())
            .copy_from(&other.data);
        Ok(FeatureMatrix {
            data,
            normalized: self.normalized && other.normalized,
        })
    }
}

/// r×n matrix of class signatures, one class per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMatrix {
    data: DMatrix<f64>,
}

impl SignatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(ZslError::ShapeMismatch(
                "signature dimension must be at least 1".into(),
            ));
        }
        check_finite(&data, "signature matrix")?;
        for (j, col) in data.column_iter().enumerate() {
            if col.iter().all(|v| *v == 0.0) {
                return Err(ZslError::ZeroColumn(j + 1));
            }
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.data.column(j)
    }

    pub fn select(&self, classes: &[usize]) -> SignatureMatrix {
        SignatureMatrix {
            data: self.data.select_columns(classes),
        }
    }

    /// Per-instance expansion: column `i` is the signature of the class of
    /// instance `i`.
    pub fn expand(&self, labels: &Assignment) -> Result<DMatrix<f64>> {
        if labels.k() != self.n_classes() {
            return Err(ZslError::ShapeMismatch(format!(
                "assignment over {} classes but {} signatures",
                labels.k(),
                self.n_classes()
            )));
        }
        Ok(self.data.select_columns(labels.indices()))
    }
}

/// Which axis of the one-hot matrix runs over instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// k×N, the layout used by the constrained clustering objective.
    InstancesAsColumns,
    /// N×k, the layout used by the joint objective.
    InstancesAsRows,
}

/// Per-instance cluster or class index in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    indices: Vec<usize>,
    k: usize,
}

impl Assignment {
    /// Builds from 0-based indices.
    pub fn new(indices: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(ZslError::InvalidAssignment(
                "number of classes must be at least 1".into(),
            ));
        }
        if let Some((i, &v)) = indices.iter().enumerate().find(|(_, &v)| v >= k) {
            return Err(ZslError::InvalidAssignment(format!(
                "instance {} has label {} outside 1..={k}",
                i + 1,
                v + 1
            )));
        }
        Ok(Self { indices, k })
    }

    /// Builds from 1-based labels as found in label files.
    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self> {
        if let Some(i) = labels.iter().position(|&v| v == 0) {
            return Err(ZslError::InvalidAssignment(format!(
                "instance {} has label 0; labels are 1-based",
                i + 1
            )));
        }
        Self::new(labels.iter().map(|v| v - 1).collect(), k)
    }

    /// Like [`Assignment::from_one_based`] with `k` taken as the largest label.
    pub fn from_one_based_infer(labels: &[usize]) -> Result<Self> {
        let k = labels.iter().copied().max().unwrap_or(0).max(1);
        Self::from_one_based(labels, k)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|v| v + 1).collect()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, i: usize) -> usize {
        self.indices[i]
    }

    /// Member count per class.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &v in &self.indices {
            counts[v] += 1;
        }
        counts
    }

    /// Sub-assignment over the given instances, keeping `k`.
    pub fn select(&self, instances: &[usize]) -> Assignment {
        Assignment {
            indices: instances.iter().map(|&i| self.indices[i]).collect(),
            k: self.k,
        }
    }

    pub fn to_one_hot(&self, orientation: Orientation) -> DMatrix<f64> {
        let n = self.indices.len();
        match orientation {
            Orientation::InstancesAsColumns => {
                let mut m = DMatrix::zeros(self.k, n);
                for (i, &v) in self.indices.iter().enumerate() {
                    m[(v, i)] = 1.0;
                }
                m
            }
            Orientation::InstancesAsRows => {
                let mut m = DMatrix::zeros(n, self.k);
                for (i, &v) in self.indices.iter().enumerate() {
                    m[(i, v)] = 1.0;
                }
                m
            }
        }
    }

    /// Inverse of [`Assignment::to_one_hot`]; every instance must carry
    /// exactly one entry equal to 1 and zeros elsewhere.
    pub fn from_one_hot(m: &DMatrix<f64>, orientation: Orientation) -> Result<Self> {
        let (n, k) = match orientation {
            Orientation::InstancesAsColumns => (m.ncols(), m.nrows()),
            Orientation::InstancesAsRows => (m.nrows(), m.ncols()),
        };
        let mut indices = Vec::with_capacity(n);
        for i in 0..n {
            let entry = |j: usize| match orientation {
                Orientation::InstancesAsColumns => m[(j, i)],
                Orientation::InstancesAsRows => m[(i, j)],
            };
            let mut hot = None;
            for j in 0..k {
                let v = entry(j);
                if v == 1.0 {
                    if hot.is_some() {
                        return Err(ZslError::InvalidAssignment(format!(
                            "instance {} has more than one active entry",
                            i + 1
                        )));
                    }
                    hot = Some(j);
                } else if v != 0.0 {
                    return Err(ZslError::InvalidAssignment(format!(
                        "instance {} has non-binary entry {v}",
                        i + 1
                    )));
                }
            }
            match hot {
                Some(j) => indices.push(j),
                None => {
                    return Err(ZslError::InvalidAssignment(format!(
                        "instance {} has no active entry",
                        i + 1
                    )))
                }
            }
        }
        Self::new(indices, k)
    }
}

/// Linear map from signature space into feature space (d×r).
#[derive(Debug, Clone, PartialEq)]
pub struct MappingMatrix {
    data: DMatrix<f64>,
}

impl MappingMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        check_finite(&data, "mapping matrix")?;
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn feature_dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn signature_dim(&self) -> usize {
        self.data.ncols()
    }
}

/// k cluster centers of dimension d, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    data: DMatrix<f64>,
}

impl CentroidSet {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(ZslError::ShapeMismatch(
                "centroid set needs at least one centroid".into(),
            ));
        }
        check_finite(&data, "centroid set")?;
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn k(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.data.column(j)
    }
}

/// Optimization hyperparameters.
///
/// `beta` weights both the label penalty of the constrained clustering and
/// the unlabeled term of the joint objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub gamma: f64,
    pub beta: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub repair_fraction: f64,
    /// Cluster count for the constrained clustering; `None` means one
    /// cluster per category (seen plus unseen).
    pub k: Option<usize>,
}

impl Hyperparams {
    pub const DEFAULT_BETA: f64 = 1.0;
    pub const DEFAULT_MAX_ITERS: usize = 100;
    pub const DEFAULT_REPAIR_FRACTION: f64 = 0.02;

    /// Defaults for everything except the ridge weight, which has no
    /// sensible default.
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            beta: Self::DEFAULT_BETA,
            max_iters: Self::DEFAULT_MAX_ITERS,
            seed: 0,
            repair_fraction: Self::DEFAULT_REPAIR_FRACTION,
            k: None,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(ZslError::InvalidHyperparams(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(ZslError::InvalidHyperparams(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if self.max_iters == 0 {
            return Err(ZslError::InvalidHyperparams(
                "max_iters must be >= 1".into(),
            ));
        }
        if !(self.repair_fraction > 0.0 && self.repair_fraction <= 1.0) {
            return Err(ZslError::InvalidHyperparams(format!(
                "repair_fraction must lie in (0, 1], got {}",
                self.repair_fraction
            )));
        }
        if self.k == Some(0) {
            return Err(ZslError::InvalidHyperparams("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Scales every column to unit L1 norm.
pub fn normalize_l1(x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut data = x.data.clone();
    for (j, mut col) in data.column_iter_mut().enumerate() {
        let norm: f64 = col.iter().map(|v| v.abs()).sum();
        if norm < 1e-12 {
            return Err(ZslError::ZeroColumn(j + 1));
        }
        col /= norm;
    }
    Ok(FeatureMatrix {
        data,
        normalized: true,
    })
}

/// Per-class arithmetic mean of the columns of `x`.
pub fn class_means(x: &FeatureMatrix, labels: &Assignment) -> Result<CentroidSet> {
    if x.len() != labels.len() {
        return Err(ZslError::ShapeMismatch(format!(
            "{} instances but {} labels",
            x.len(),
            labels.len()
        )));
    }
    let mut sums = DMatrix::zeros(x.dim(), labels.k());
    let mut counts = vec![0usize; labels.k()];
    for (i, &c) in labels.indices().iter().enumerate() {
        let mut col = sums.column_mut(c);
        col += x.column(i);
        counts[c] += 1;
    }
    for (j, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(ZslError::EmptyClass(j + 1));
        }
        let mut col = sums.column_mut(j);
        col /= n as f64;
    }
    CentroidSet::new(sums)
}
