//! Accuracy metrics, cluster majority-vote scoring, validation-class
//! splitting and the (γ, β) grid search.

use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ZslError};
use crate::par::map_range;
use crate::pipeline::{modal_per_cluster, predict_joint, predict_simple, InitMode, ZslDataset};
use crate::types::{Assignment, Hyperparams};

/// Overall accuracy and unweighted mean of per-class recall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub overall: f64,
    pub per_class: f64,
}

fn check_lengths(pred: &Assignment, truth: &Assignment) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(ZslError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(ZslError::InvalidCounts("no instances to score".into()));
    }
    Ok(())
}

pub fn accuracy(pred: &Assignment, truth: &Assignment) -> Result<Accuracy> {
    check_lengths(pred, truth)?;
    let mut hits = vec![0usize; truth.k()];
    let mut totals = vec![0usize; truth.k()];
    for (&p, &t) in pred.indices().iter().zip(truth.indices()) {
        totals[t] += 1;
        if p == t {
            hits[t] += 1;
        }
    }
    let correct: usize = hits.iter().sum();
    let present: Vec<f64> = totals
        .iter()
        .zip(&hits)
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &h)| h as f64 / n as f64)
        .collect();
    Ok(Accuracy {
        overall: correct as f64 / truth.len() as f64,
        per_class: present.iter().sum::<f64>() / present.len() as f64,
    })
}

/// Every cluster adopts the most frequent true label among its members
/// (lowest label on ties); returns the accuracy of that labeling.
pub fn majority_vote_accuracy(assignment: &Assignment, truth: &Assignment) -> Result<f64> {
    check_lengths(assignment, truth)?;
    let modal = modal_per_cluster(assignment, truth);
    let correct = assignment
        .indices()
        .iter()
        .zip(truth.indices())
        .filter(|(&c, &t)| modal[c] == Some(t))
        .count();
    Ok(correct as f64 / truth.len() as f64)
}

/// Seen classes split into a training part and a held-out part that plays
/// the role of unseen classes. Indices are 0-based and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvSplit {
    pub train_classes: Vec<usize>,
    pub validation_classes: Vec<usize>,
}

/// Number of validation classes `v` such that `v / (n_s − v) = n_u / n_s`,
/// rounded half away from zero and clamped to `[1, n_s − 1]`.
pub fn validation_size(n_s: usize, n_u: usize) -> usize {
    let v = (n_s as f64 * n_u as f64 / (n_s + n_u) as f64).round() as usize;
    v.clamp(1, n_s - 1)
}

/// `folds` independent random validation-class draws.
pub fn make_cv_splits(n_s: usize, n_u: usize, folds: usize, seed: u64) -> Result<Vec<CvSplit>> {
    if n_s < 2 || n_u < 1 || folds < 1 {
        return Err(ZslError::InvalidCounts(format!(
            "need n_s >= 2, n_u >= 1, folds >= 1; got n_s = {n_s}, n_u = {n_u}, folds = {folds}"
        )));
    }
    let v = validation_size(n_s, n_u);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..folds)
        .map(|_| {
            let mut validation = index::sample(&mut rng, n_s, v).into_vec();
            validation.sort_unstable();
            let train = (0..n_s).filter(|c| validation.binary_search(c).is_err()).collect();
            CvSplit {
                train_classes: train,
                validation_classes: validation,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub gamma_values: Vec<f64>,
    pub beta_values: Vec<f64>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_values.is_empty() || self.beta_values.is_empty() {
            return Err(ZslError::InvalidGrid("gamma and beta lists must be non-empty".into()));
        }
        if let Some(g) = self.gamma_values.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(ZslError::InvalidGrid(format!("gamma values must be > 0, got {g}")));
        }
        if let Some(b) = self.beta_values.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(ZslError::InvalidGrid(format!("beta values must be >= 0, got {b}")));
        }
        Ok(())
    }

    /// Grid points, gamma-major.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.gamma_values
            .iter()
            .flat_map(|&g| self.beta_values.iter().map(move |&b| (g, b)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvMethod {
    Simple,
    /// Joint optimization started from the clustering labels.
    Joint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub gamma: f64,
    pub beta: f64,
    /// 1-based fold number.
    pub fold: usize,
    /// `None` when the run failed.
    pub accuracy: Option<Accuracy>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    /// Grid order (gamma-major, beta-minor), then fold order.
    pub rows: Vec<GridRow>,
    /// Mean overall accuracy per grid point over the successful folds.
    pub means: Vec<(f64, f64, Option<f64>)>,
}

impl GridReport {
    /// Tab-separated, one row per grid point and fold.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gamma\tbeta\tfold\taccuracy_overall\taccuracy_per_class\n");
        for row in &self.rows {
            let (o, p) = match row.accuracy {
                Some(a) => (fmt_num(a.overall), fmt_num(a.per_class)),
                None => ("failed".to_string(), "failed".to_string()),
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{o}\t{p}",
                fmt_num(row.gamma),
                fmt_num(row.beta),
                row.fold
            );
        }
        out
    }

    /// Human-readable summary, one line per grid point.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:>14} {:>14} {:>12}\n", "gamma", "beta", "mean_acc");
        for (g, b, m) in &self.means {
            let acc = m.map_or("failed".to_string(), |v| format!("{:.4}", v));
            let _ = writeln!(out, "{:>14} {:>14} {:>12}", fmt_num(*g), fmt_num(*b), acc);
        }
        out
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOutcome {
    pub gamma: f64,
    pub beta: f64,
    pub score: f64,
    pub report: GridReport,
}

/// Scores every grid point by mean validation accuracy over `folds`
/// validation-class splits and returns the best one (earliest on ties).
///
/// `base` supplies the non-searched hyperparameters; the cluster count is
/// always reset to one per category inside each fold.
pub fn grid_search(
    data: &ZslDataset,
    grid: &GridSpec,
    method: CvMethod,
    base: &Hyperparams,
    folds: usize,
    seed: u64,
) -> Result<GridSearchOutcome> {
    grid.validate()?;
    let splits = make_cv_splits(data.n_seen(), data.n_unseen(), folds, seed)?;
    let fold_data: Vec<Option<ZslDataset>> = splits
        .iter()
        .map(|s| {
            data.carve_validation(&s.train_classes, &s.validation_classes)
                .ok()
        })
        .collect();
    let points = grid.points();
    let n_folds = splits.len();
    let scores = map_range(points.len() * n_folds, |job| {
        let (gamma, beta) = points[job / n_folds];
        let fold = job % n_folds;
        let fd = fold_data[fold].as_ref()?;
        let hyper = Hyperparams {
            gamma,
            beta,
            k: None,
            seed: base.seed.wrapping_add(fold as u64),
            ..base.clone()
        };
        let pred = match method {
            CvMethod::Simple => predict_simple(fd, &hyper),
            CvMethod::Joint => predict_joint(fd, &hyper, InitMode::InitR),
        }
        .ok()?;
        accuracy(&pred.labels_u, fd.truth_u.as_ref()?).ok()
    });

    let mut rows = Vec::with_capacity(scores.len());
    let mut means = Vec::with_capacity(points.len());
    let mut best: Option<(usize, f64)> = None;
    for (p, &(gamma, beta)) in points.iter().enumerate() {
        let fold_scores = &scores[p * n_folds..(p + 1) * n_folds];
        for (f, acc) in fold_scores.iter().enumerate() {
            rows.push(GridRow {
                gamma,
                beta,
                fold: f + 1,
                accuracy: *acc,
            });
        }
        let ok: Vec<f64> = fold_scores.iter().flatten().map(|a| a.overall).collect();
        let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
        if let Some(m) = mean {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((p, m));
            }
        }
        means.push((gamma, beta, mean));
    }
    let (p, score) = best.ok_or(ZslError::NoValidGridPoint)?;
    Ok(GridSearchOutcome {
        gamma: points[p].0,
        beta: points[p].1,
        score,
        report: GridReport { rows, means },
    })
}
