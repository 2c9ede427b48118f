//! End-to-end prediction of unseen-class labels.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::clustering::{run_constrained_kmeans, ClusteringProblem, ClusteringResult};
use crate::error::{Result, ZslError};
use crate::joint::{assign_nearest_representative, run_joint, JointProblem, JointResult};
use crate::mapper::{map_signatures, solve_ridge};
use crate::types::{
    argmin, normalize_l1, sq_dist, Assignment, FeatureMatrix, Hyperparams, MappingMatrix,
    SignatureMatrix,
};

/// A zero-shot problem: labeled seen instances, unlabeled unseen instances
/// and signatures for both class sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ZslDataset {
    pub x_s: FeatureMatrix,
    pub labels_s: Assignment,
    pub s_s: SignatureMatrix,
    pub x_u: FeatureMatrix,
    pub s_u: SignatureMatrix,
    /// Ground truth for the unseen instances, used only for evaluation.
    pub truth_u: Option<Assignment>,
}

impl ZslDataset {
    pub fn new(
        x_s: FeatureMatrix,
        labels_s: Assignment,
        s_s: SignatureMatrix,
        x_u: FeatureMatrix,
        s_u: SignatureMatrix,
        truth_u: Option<Assignment>,
    ) -> Result<Self> {
        let data = Self {
            x_s,
            labels_s,
            s_s,
            x_u,
            s_u,
            truth_u,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_s.dim() != self.x_u.dim() {
            return Err(ZslError::DimensionMismatch(format!(
                "features_seen has dimension {} but features_unseen has {}",
                self.x_s.dim(),
                self.x_u.dim()
            )));
        }
        if self.s_s.dim() != self.s_u.dim() {
            return Err(ZslError::DimensionMismatch(format!(
                "signatures_seen has dimension {} but signatures_unseen has {}",
                self.s_s.dim(),
                self.s_u.dim()
            )));
        }
        if self.labels_s.len() != self.x_s.len() {
            return Err(ZslError::DimensionMismatch(format!(
                "labels_seen has {} entries but features_seen has {} instances",
                self.labels_s.len(),
                self.x_s.len()
            )));
        }
        if self.labels_s.k() != self.s_s.n_classes() {
            return Err(ZslError::DimensionMismatch(format!(
                "labels_seen range over {} classes but signatures_seen has {}",
                self.labels_s.k(),
                self.s_s.n_classes()
            )));
        }
        if let Some(truth) = &self.truth_u {
            if truth.len() != self.x_u.len() || truth.k() != self.s_u.n_classes() {
                return Err(ZslError::DimensionMismatch(format!(
                    "truth_unseen covers {} instances over {} classes, expected {} over {}",
                    truth.len(),
                    truth.k(),
                    self.x_u.len(),
                    self.s_u.n_classes()
                )));
            }
        }
        Ok(())
    }

    pub fn n_seen(&self) -> usize {
        self.s_s.n_classes()
    }

    pub fn n_unseen(&self) -> usize {
        self.s_u.n_classes()
    }

    /// Per-instance seen signatures.
    pub fn y_s(&self) -> DMatrix<f64> {
        self.s_s
            .expand(&self.labels_s)
            .expect("validated dataset has consistent labels")
    }

    /// Copy with every feature column scaled to unit L1 norm.
    pub fn normalized(&self) -> Result<ZslDataset> {
        let mut out = self.clone();
        out.x_s = normalize_l1(&self.x_s)?;
        out.x_u = normalize_l1(&self.x_u)?;
        Ok(out)
    }

    /// Treats the `validation` seen classes as unseen: their instances
    /// become the unlabeled set (with truth), the `train` classes stay
    /// labeled. Both class lists are renumbered in the given order.
    pub fn carve_validation(&self, train: &[usize], validation: &[usize]) -> Result<ZslDataset> {
        let n_s = self.n_seen();
        let mut role = vec![None; n_s];
        for (pos, &c) in train.iter().enumerate() {
            role[c] = Some((true, pos));
        }
        for (pos, &c) in validation.iter().enumerate() {
            if role[c].is_some() {
                return Err(ZslError::InvalidCounts(format!(
                    "class {} is both train and validation",
                    c + 1
                )));
            }
            role[c] = Some((false, pos));
        }
        let (mut tr_idx, mut tr_lab, mut va_idx, mut va_lab) = (vec![], vec![], vec![], vec![]);
        for (i, &c) in self.labels_s.indices().iter().enumerate() {
            match role[c] {
                Some((true, pos)) => {
                    tr_idx.push(i);
                    tr_lab.push(pos);
                }
                Some((false, pos)) => {
                    va_idx.push(i);
                    va_lab.push(pos);
                }
                None => {}
            }
        }
        ZslDataset::new(
            self.x_s.select(&tr_idx),
            Assignment::new(tr_lab, train.len())?,
            self.s_s.select(train),
            self.x_s.select(&va_idx),
            self.s_s.select(validation),
            Some(Assignment::new(va_lab, validation.len())?),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Simple,
    JointInitR,
    JointInitD,
    Smoothed,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Simple => "simple",
            Provenance::JointInitR => "joint-initR",
            Provenance::JointInitD => "joint-initD",
            Provenance::Smoothed => "smoothed",
        })
    }
}

/// How the joint optimization is started.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Labels from the clustering method.
    InitR,
    /// Seen-only mapping, then nearest representatives.
    InitD,
}

impl FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "initR" | "init-r" | "r" => Ok(InitMode::InitR),
            "initD" | "init-d" | "d" => Ok(InitMode::InitD),
            other => Err(format!("unknown init mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels_u: Assignment,
    pub provenance: Provenance,
}

/// Everything the clustering method computes on the way to its labels.
#[derive(Debug, Clone)]
pub struct SimpleFit {
    pub prediction: Prediction,
    pub mapping: MappingMatrix,
    pub clustering: ClusteringResult,
    /// Unseen class chosen for every cluster holding unseen instances.
    pub cluster_labels: Vec<Option<usize>>,
}

impl SimpleFit {
    /// Cluster of every unseen instance.
    pub fn unseen_clusters(&self, n_seen_instances: usize) -> Assignment {
        let all = &self.clustering.assignment;
        let idx: Vec<usize> = (n_seen_instances..all.len()).collect();
        all.select(&idx)
    }
}

#[derive(Debug, Clone)]
pub struct JointFit {
    pub prediction: Prediction,
    /// Present for [`InitMode::InitR`].
    pub init: Option<SimpleFit>,
    pub result: JointResult,
}

/// Seen-only mapping, constrained clustering of all instances, then each
/// cluster containing unseen instances takes the unseen class whose
/// representative is nearest to its centroid.
pub fn fit_simple(data: &ZslDataset, hyper: &Hyperparams) -> Result<SimpleFit> {
    hyper.validate()?;
    data.validate()?;
    let y_s = data.y_s();
    let mapping = solve_ridge(&data.x_s, &y_s, hyper.gamma)?;

    let x_all = data.x_s.concat(&data.x_u)?;
    let k = hyper.k.unwrap_or(data.n_seen() + data.n_unseen());
    let problem = ClusteringProblem::new(&x_all, &data.labels_s, k, hyper.beta, hyper.seed)?;
    let clustering = run_constrained_kmeans(&problem, hyper.max_iters)?;

    let reps = map_signatures(&mapping, &data.s_u)?;
    let n_seen_inst = data.x_s.len();
    let mut holds_unseen = vec![false; k];
    for i in n_seen_inst..x_all.len() {
        holds_unseen[clustering.assignment.get(i)] = true;
    }
    let cluster_labels: Vec<Option<usize>> = (0..k)
        .map(|c| {
            holds_unseen[c].then(|| {
                argmin(
                    (0..data.n_unseen())
                        .map(|j| sq_dist(clustering.centroids.column(c), reps.column(j))),
                )
                .expect("at least one unseen class")
            })
        })
        .collect();
    let labels: Vec<usize> = (n_seen_inst..x_all.len())
        .map(|i| cluster_labels[clustering.assignment.get(i)].expect("cluster holds unseen"))
        .collect();
    Ok(SimpleFit {
        prediction: Prediction {
            labels_u: Assignment::new(labels, data.n_unseen())?,
            provenance: Provenance::Simple,
        },
        mapping,
        clustering,
        cluster_labels,
    })
}

pub fn predict_simple(data: &ZslDataset, hyper: &Hyperparams) -> Result<Prediction> {
    fit_simple(data, hyper).map(|f| f.prediction)
}

/// Joint coordinate descent started per `mode`.
pub fn fit_joint(data: &ZslDataset, hyper: &Hyperparams, mode: InitMode) -> Result<JointFit> {
    hyper.validate()?;
    data.validate()?;
    let y_s = data.y_s();
    let (init, r0) = match mode {
        InitMode::InitR => {
            let simple = fit_simple(data, hyper)?;
            let r0 = simple.prediction.labels_u.clone();
            (Some(simple), r0)
        }
        InitMode::InitD => {
            let d0 = solve_ridge(&data.x_s, &y_s, hyper.gamma)?;
            (None, assign_nearest_representative(&data.x_u, &d0, &data.s_u)?)
        }
    };
    let problem = JointProblem {
        x_s: &data.x_s,
        y_s: &y_s,
        x_u: &data.x_u,
        s_u: &data.s_u,
        hyper,
    };
    let result = run_joint(&problem, &r0, hyper.max_iters)?;
    Ok(JointFit {
        prediction: Prediction {
            labels_u: result.r.clone(),
            provenance: match mode {
                InitMode::InitR => Provenance::JointInitR,
                InitMode::InitD => Provenance::JointInitD,
            },
        },
        init,
        result,
    })
}

pub fn predict_joint(data: &ZslDataset, hyper: &Hyperparams, mode: InitMode) -> Result<Prediction> {
    fit_joint(data, hyper, mode).map(|f| f.prediction)
}

/// Within each cluster every instance takes the most frequent base label;
/// ties go to the lowest label.
pub fn cluster_smooth(base: &Prediction, assignment: &Assignment) -> Result<Prediction> {
    let labels = &base.labels_u;
    if labels.len() != assignment.len() {
        return Err(ZslError::ShapeMismatch(format!(
            "{} predictions but {} cluster assignments",
            labels.len(),
            assignment.len()
        )));
    }
    let modal = modal_per_cluster(assignment, labels);
    let smoothed = assignment
        .indices()
        .iter()
        .map(|&c| modal[c].expect("cluster has members"))
        .collect();
    Ok(Prediction {
        labels_u: Assignment::new(smoothed, labels.k())?,
        provenance: Provenance::Smoothed,
    })
}

/// Most frequent value of `votes` inside each cluster of `clusters`
/// (lowest value on ties); `None` for empty clusters.
pub(crate) fn modal_per_cluster(clusters: &Assignment, votes: &Assignment) -> Vec<Option<usize>> {
    let mut tally = vec![vec![0usize; votes.k()]; clusters.k()];
    for (&c, &v) in clusters.indices().iter().zip(votes.indices()) {
        tally[c][v] += 1;
    }
    tally
        .iter()
        .map(|t| {
            let best = t.iter().copied().max().unwrap_or(0);
            (best > 0).then(|| t.iter().position(|&n| n == best).expect("max exists"))
        })
        .collect()
}
