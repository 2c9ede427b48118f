//! Label-constrained k-means.
//!
//! Seen and unseen instances are clustered together. A labeled instance pays
//! a fixed penalty `beta` whenever it sits outside the cluster of its own
//! class, so clusters `1..=n_s` track the seen classes while the remaining
//! clusters are free to capture unseen categories. Distances are squared
//! Euclidean throughout, which makes the mean update an exact minimizer.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ZslError};
use crate::par::map_range;
use crate::types::{argmin, class_means, sq_dist, Assignment, CentroidSet, FeatureMatrix};

/// Relative slack allowed when checking that the objective never rises.
pub const MONOTONE_TOL: f64 = 1e-9;

/// Instances `x_all` hold the labeled seen columns first; `labels` covers
/// exactly those columns with classes `0..n_s`.
#[derive(Debug, Clone)]
pub struct ClusteringProblem<'a> {
    pub x_all: &'a FeatureMatrix,
    pub labels: &'a Assignment,
    pub k: usize,
    pub beta: f64,
    pub seed: u64,
}

impl<'a> ClusteringProblem<'a> {
    pub fn new(
        x_all: &'a FeatureMatrix,
        labels: &'a Assignment,
        k: usize,
        beta: f64,
        seed: u64,
    ) -> Result<Self> {
        let problem = Self {
            x_all,
            labels,
            k,
            beta,
            seed,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() > self.x_all.len() {
            return Err(ZslError::ShapeMismatch(format!(
                "{} labels for {} instances",
                self.labels.len(),
                self.x_all.len()
            )));
        }
        if self.k < self.n_seen_classes() {
            return Err(ZslError::InvalidConfig(format!(
                "k = {} is smaller than the {} seen classes",
                self.k,
                self.n_seen_classes()
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(ZslError::InvalidHyperparams(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn n_labeled(&self) -> usize {
        self.labels.len()
    }

    pub fn n_seen_classes(&self) -> usize {
        if self.labels.is_empty() {
            0
        } else {
            self.labels.k()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub assignment: Assignment,
    pub centroids: CentroidSet,
    pub objective: f64,
    pub iterations: usize,
    /// Objective after the initial assignment, then after every centroid
    /// step and every assignment step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

fn distinct_columns(x: &FeatureMatrix) -> usize {
    let mut seen = HashSet::new();
    for col in x.data().column_iter() {
        // +0.0 and -0.0 compare equal as points
        let key: Vec<u64> = col.iter().map(|v| (v + 0.0).to_bits()).collect();
        seen.insert(key);
    }
    seen.len()
}

/// D²-weighted seeding. Every center is a copy of a column of `x`.
pub fn kmeanspp_seed(x: &FeatureMatrix, m: usize, seed: u64) -> Result<CentroidSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kmeanspp_with_rng(x, m, &mut rng)
}

pub(crate) fn kmeanspp_with_rng<R: Rng>(x: &FeatureMatrix, m: usize, rng: &mut R) -> Result<CentroidSet> {
    if m == 0 {
        return Err(ZslError::InvalidConfig("cannot seed zero centers".into()));
    }
    let found = distinct_columns(x);
    if found < m {
        return Err(ZslError::TooFewPoints { needed: m, found });
    }
    let n = x.len();
    let mut chosen = Vec::with_capacity(m);
    chosen.push(rng.random_range(0..n));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(x.column(i), x.column(chosen[0])))
        .collect();
    while chosen.len() < m {
        let total: f64 = nearest.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in nearest.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        // `found >= m` guarantees some positive weight remains.
        let pick = pick.expect("positive weight left while distinct points remain");
        chosen.push(pick);
        for (i, w) in nearest.iter_mut().enumerate() {
            let d = sq_dist(x.column(i), x.column(pick));
            if d < *w {
                *w = d;
            }
        }
    }
    CentroidSet::new(x.data().select_columns(&chosen))
}

/// Seen-class clusters start at the labeled class means; the remaining
/// `k − n_s` start from k-means++ on the unlabeled columns.
pub fn init_centroids(problem: &ClusteringProblem<'_>) -> Result<CentroidSet> {
    problem.validate()?;
    let x = problem.x_all;
    let n_lab = problem.n_labeled();
    let n_seen = problem.n_seen_classes();
    let mut data = DMatrix::zeros(x.dim(), problem.k);
    if n_seen > 0 {
        let labeled: Vec<usize> = (0..n_lab).collect();
        let means = class_means(&x.select(&labeled), problem.labels)?;
        data.columns_mut(0, n_seen).copy_from(means.data());
    }
    let extra = problem.k - n_seen;
    if extra > 0 {
        let unlabeled: Vec<usize> = (n_lab..x.len()).collect();
        let pool = x.select(&unlabeled);
        if pool.is_empty() {
            return Err(ZslError::TooFewPoints {
                needed: extra,
                found: 0,
            });
        }
        let seeds = kmeanspp_seed(&pool, extra, problem.seed)?;
        data.columns_mut(n_seen, extra).copy_from(seeds.data());
    }
    CentroidSet::new(data)
}

fn check_dims(x_all: &FeatureMatrix, labels: &Assignment, centroids: &CentroidSet) -> Result<()> {
    if centroids.dim() != x_all.dim() {
        return Err(ZslError::ShapeMismatch(format!(
            "centroids have dimension {}, features {}",
            centroids.dim(),
            x_all.dim()
        )));
    }
    if labels.len() > x_all.len() {
        return Err(ZslError::ShapeMismatch(format!(
            "{} labels for {} instances",
            labels.len(),
            x_all.len()
        )));
    }
    Ok(())
}

/// Assignment step: each instance takes the cluster minimizing its squared
/// distance plus, for labeled instances, `beta` if the cluster differs from
/// its label. Ties go to the lowest cluster index.
pub fn assign_constrained(
    x_all: &FeatureMatrix,
    labels: &Assignment,
    centroids: &CentroidSet,
    beta: f64,
) -> Result<Assignment> {
    check_dims(x_all, labels, centroids)?;
    let k = centroids.k();
    let n_lab = labels.len();
    let indices = map_range(x_all.len(), |i| {
        let own = (i < n_lab).then(|| labels.get(i));
        argmin((0..k).map(|j| {
            let d = sq_dist(x_all.column(i), centroids.column(j));
            match own {
                Some(z) if z != j => d + beta,
                _ => d,
            }
        }))
        .expect("k >= 1")
    });
    Assignment::new(indices, k)
}

/// Mean update. Empty clusters keep their previous centroid.
pub fn update_centroids(
    x_all: &FeatureMatrix,
    assignment: &Assignment,
    previous: &CentroidSet,
) -> Result<CentroidSet> {
    if assignment.len() != x_all.len() || assignment.k() != previous.k() {
        return Err(ZslError::ShapeMismatch(format!(
            "assignment covers {} instances over {} clusters, expected {} over {}",
            assignment.len(),
            assignment.k(),
            x_all.len(),
            previous.k()
        )));
    }
    if previous.dim() != x_all.dim() {
        return Err(ZslError::ShapeMismatch(format!(
            "centroids have dimension {}, features {}",
            previous.dim(),
            x_all.dim()
        )));
    }
    let k = previous.k();
    let mut sums = DMatrix::zeros(x_all.dim(), k);
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.indices().iter().enumerate() {
        let mut col = sums.column_mut(c);
        col += x_all.column(i);
        counts[c] += 1;
    }
    for (j, &n) in counts.iter().enumerate() {
        let mut col = sums.column_mut(j);
        if n == 0 {
            col.copy_from(&previous.column(j));
        } else {
            col /= n as f64;
        }
    }
    CentroidSet::new(sums)
}

/// `Σ ‖x_n − μ_{r(n)}‖² + β·#{labeled n : r(n) ≠ z(n)}`.
pub fn compute_objective_constrained(
    x_all: &FeatureMatrix,
    labels: &Assignment,
    assignment: &Assignment,
    centroids: &CentroidSet,
    beta: f64,
) -> Result<f64> {
    check_dims(x_all, labels, centroids)?;
    if assignment.len() != x_all.len() || assignment.k() != centroids.k() {
        return Err(ZslError::ShapeMismatch(format!(
            "assignment covers {} instances over {} clusters, expected {} over {}",
            assignment.len(),
            assignment.k(),
            x_all.len(),
            centroids.k()
        )));
    }
    let mut total = 0.0;
    let mut violations = 0usize;
    for (i, &c) in assignment.indices().iter().enumerate() {
        total += sq_dist(x_all.column(i), centroids.column(c));
        if i < labels.len() && labels.get(i) != c {
            violations += 1;
        }
    }
    Ok(total + beta * violations as f64)
}

/// Lloyd-style alternation of [`assign_constrained`] and
/// [`update_centroids`] until the assignment stops changing or `max_iters`
/// centroid updates have run.
pub fn run_constrained_kmeans(
    problem: &ClusteringProblem<'_>,
    max_iters: usize,
) -> Result<ClusteringResult> {
    let centroids = init_centroids(problem)?;
    run_from_centroids(problem, centroids, max_iters)
}

/// Same as [`run_constrained_kmeans`] starting from given centroids.
pub fn run_from_centroids(
    problem: &ClusteringProblem<'_>,
    mut centroids: CentroidSet,
    max_iters: usize,
) -> Result<ClusteringResult> {
    problem.validate()?;
    if max_iters == 0 {
        return Err(ZslError::InvalidHyperparams("max_iters must be >= 1".into()));
    }
    if centroids.k() != problem.k {
        return Err(ZslError::ShapeMismatch(format!(
            "{} initial centroids for k = {}",
            centroids.k(),
            problem.k
        )));
    }
    let (x, labels, beta) = (problem.x_all, problem.labels, problem.beta);
    let objective = |a: &Assignment, c: &CentroidSet| {
        compute_objective_constrained(x, labels, a, c, beta)
    };

    let mut assignment = assign_constrained(x, labels, &centroids, beta)?;
    let mut trace = vec![objective(&assignment, &centroids)?];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        centroids = update_centroids(x, &assignment, &centroids)?;
        push_checked(&mut trace, objective(&assignment, &centroids)?);
        let next = assign_constrained(x, labels, &centroids, beta)?;
        push_checked(&mut trace, objective(&next, &centroids)?);
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
    }
    Ok(ClusteringResult {
        objective: *trace.last().expect("trace is never empty"),
        assignment,
        centroids,
        iterations,
        objective_trace: trace,
        converged,
    })
}

fn push_checked(trace: &mut Vec<f64>, value: f64) {
    if let Some(&prev) = trace.last() {
        debug_assert!(
            value <= prev + MONOTONE_TOL * prev.abs().max(1.0),
            "objective rose from {prev} to {value}"
        );
    }
    trace.push(value);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: usize, vals: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(DMatrix::from_column_slice(rows, vals.len() / rows, vals)).unwrap()
    }

    fn cs(rows: usize, vals: &[f64]) -> CentroidSet {
        CentroidSet::new(DMatrix::from_column_slice(rows, vals.len() / rows, vals)).unwrap()
    }

    fn no_labels() -> Assignment {
        Assignment::new(vec![], 1).unwrap()
    }

    #[test]
    fn kmeanspp_single_point() {
        let x = fm(2, &[3.0, 4.0]);
        let c = kmeanspp_seed(&x, 1, 9).unwrap();
        assert_eq!(c.data(), x.data());
    }

    #[test]
    fn kmeanspp_two_points_both_selected() {
        let x = fm(1, &[0.0, 10.0]);
        for seed in 0..50 {
            let c = kmeanspp_seed(&x, 2, seed).unwrap();
            let mut v: Vec<f64> = c.data().iter().copied().collect();
            v.sort_by(f64::total_cmp);
            assert_eq!(v, vec![0.0, 10.0]);
        }
    }

    #[test]
    fn kmeanspp_all_distinct_points_with_duplicates() {
        // five distinct points, two of them duplicated
        let x = fm(1, &[0.0, 1.0, 1.0, 3.0, 7.0, 7.0, 12.0]);
        for seed in 0..200 {
            let c = kmeanspp_seed(&x, 5, seed).unwrap();
            let mut v: Vec<f64> = c.data().iter().copied().collect();
            v.sort_by(f64::total_cmp);
            assert_eq!(v, vec![0.0, 1.0, 3.0, 7.0, 12.0]);
        }
    }

    #[test]
    fn kmeanspp_too_few_points() {
        let x = fm(1, &[1.0, 1.0, 2.0]);
        assert_eq!(
            kmeanspp_seed(&x, 3, 0),
            Err(ZslError::TooFewPoints { needed: 3, found: 2 })
        );
    }

    #[test]
    fn kmeanspp_frequencies_follow_d2_weights() {
        // Points 0, 1, 4. First pick uniform; enumerate exact second-pick
        // probabilities and compare with empirical frequencies.
        let pts = [0.0f64, 1.0, 4.0];
        let x = fm(1, &pts);
        let mut expected = [[0.0f64; 3]; 3];
        for first in 0..3 {
            let w: Vec<f64> = pts.iter().map(|p| (p - pts[first]).powi(2)).collect();
            let total: f64 = w.iter().sum();
            for second in 0..3 {
                expected[first][second] = w[second] / total / 3.0;
            }
        }
        let mut counts = [[0usize; 3]; 3];
        let trials = 20_000;
        for seed in 0..trials {
            let c = kmeanspp_seed(&x, 2, seed).unwrap();
            let a = pts.iter().position(|&p| p == c.data()[0]).unwrap();
            let b = pts.iter().position(|&p| p == c.data()[1]).unwrap();
            counts[a][b] += 1;
        }
        for a in 0..3 {
            for b in 0..3 {
                let freq = counts[a][b] as f64 / trials as f64;
                assert!((freq - expected[a][b]).abs() < 0.015, "{a}->{b}: {freq} vs {}", expected[a][b]);
            }
        }
    }

    #[test]
    fn init_reduces_to_class_means_without_unlabeled() {
        let x = fm(2, &[0., 0., 2., 0., 5., 5., 7., 5.]);
        let labels = Assignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let p = ClusteringProblem::new(&x, &labels, 2, 1.0, 0).unwrap();
        let c = init_centroids(&p).unwrap();
        assert_eq!(c, class_means(&x, &labels).unwrap());
        assert_eq!(c.column(0).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn init_extra_centroids_come_from_unlabeled() {
        let x = fm(2, &[0., 0., 2., 0., 9., 9., 20., 1., 30., 3., 40., 2.]);
        let labels = Assignment::new(vec![0, 0], 1).unwrap();
        for seed in 0..20 {
            let p = ClusteringProblem::new(&x, &labels, 3, 1.0, seed).unwrap();
            let c = init_centroids(&p).unwrap();
            assert_eq!(c.column(0).as_slice(), &[1.0, 0.0]);
            for j in 1..3 {
                assert!((2..6).any(|i| x.column(i) == c.column(j)));
            }
        }
    }

    #[test]
    fn init_without_unlabeled_but_extra_clusters_fails() {
        let x = fm(1, &[0.0, 1.0]);
        let labels = Assignment::new(vec![0, 0], 1).unwrap();
        let p = ClusteringProblem::new(&x, &labels, 2, 1.0, 0).unwrap();
        assert!(matches!(init_centroids(&p), Err(ZslError::TooFewPoints { .. })));
    }

    #[test]
    fn problem_rejects_k_below_seen_classes() {
        let x = fm(1, &[0.0, 1.0]);
        let labels = Assignment::new(vec![0, 1], 2).unwrap();
        assert!(ClusteringProblem::new(&x, &labels, 1, 1.0, 0).is_err());
    }

    #[test]
    fn assign_unlabeled_nearest() {
        let x = fm(2, &[1.0, 0.0]);
        let c = cs(2, &[0., 0., 10., 0.]);
        let a = assign_constrained(&x, &no_labels(), &c, 1.0).unwrap();
        assert_eq!(a.indices(), &[0]);
    }

    #[test]
    fn assign_labeled_penalty_keeps_own_cluster() {
        // squared distances 1.0 to μ₁ and 1.5 to μ₂, label 2
        let x = fm(1, &[0.0]);
        let c = cs(1, &[1.0, 1.5f64.sqrt()]);
        let labels = Assignment::new(vec![1], 2).unwrap();
        let a = assign_constrained(&x, &labels, &c, 1.0).unwrap();
        assert_eq!(a.indices(), &[1]);
    }

    #[test]
    fn assign_labeled_penalty_exceeded() {
        // squared distances 1.0 and 2.5, label 2: 2.5 > 2.0
        let x = fm(1, &[0.0]);
        let c = cs(1, &[1.0, 2.5f64.sqrt()]);
        let labels = Assignment::new(vec![1], 2).unwrap();
        let a = assign_constrained(&x, &labels, &c, 1.0).unwrap();
        assert_eq!(a.indices(), &[0]);
    }

    #[test]
    fn assign_ties_go_low() {
        let x = fm(1, &[5.0]);
        let c = cs(1, &[0.0, 10.0]);
        let a = assign_constrained(&x, &no_labels(), &c, 0.0).unwrap();
        assert_eq!(a.indices(), &[0]);
    }

    #[test]
    fn update_means_and_empty_cluster() {
        let x = fm(2, &[0., 0., 2., 2., 7., 3.]);
        let a = Assignment::new(vec![0, 0, 1], 3).unwrap();
        let prev = cs(2, &[9., 9., 9., 9., 5., 5.]);
        let c = update_centroids(&x, &a, &prev).unwrap();
        assert_eq!(c.column(0).as_slice(), &[1.0, 1.0]);
        assert_eq!(c.column(1).as_slice(), &[7.0, 3.0]);
        assert_eq!(c.column(2).as_slice(), &[5.0, 5.0]);
    }

    #[test]
    fn objective_zero_and_isolated_penalty() {
        let x = fm(1, &[1.0, 4.0]);
        let c = cs(1, &[1.0, 4.0]);
        let labels = Assignment::new(vec![0], 2).unwrap();
        let ok = Assignment::new(vec![0, 1], 2).unwrap();
        assert_eq!(compute_objective_constrained(&x, &labels, &ok, &c, 1.0).unwrap(), 0.0);
        // labeled instance at centroid of cluster 2 but labeled 1
        let c2 = cs(1, &[4.0, 1.0]);
        let wrong = Assignment::new(vec![1, 0], 2).unwrap();
        assert_eq!(compute_objective_constrained(&x, &labels, &wrong, &c2, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn objective_matches_naive_double_loop() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = FeatureMatrix::new(DMatrix::from_fn(3, 25, |_, _| rng.random_range(-3.0..3.0))).unwrap();
            let c = CentroidSet::new(DMatrix::from_fn(3, 4, |_, _| rng.random_range(-3.0..3.0))).unwrap();
            let labels = Assignment::new((0..10).map(|_| rng.random_range(0..3)).collect(), 3).unwrap();
            let a = Assignment::new((0..25).map(|_| rng.random_range(0..4)).collect(), 4).unwrap();
            let beta = rng.random_range(0.0..2.0);
            let mut naive = 0.0;
            for i in 0..25 {
                for j in 0..4 {
                    if a.get(i) == j {
                        for r in 0..3 {
                            naive += (x.data()[(r, i)] - c.data()[(r, j)]).powi(2);
                        }
                    }
                }
                if i < 10 && a.get(i) != labels.get(i) {
                    naive += beta;
                }
            }
            let got = compute_objective_constrained(&x, &labels, &a, &c, beta).unwrap();
            assert!((got - naive).abs() <= 1e-9 * naive.max(1.0));
        }
    }

    #[test]
    fn run_is_deterministic_and_monotone() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = FeatureMatrix::new(DMatrix::from_fn(2, 60, |_, _| rng.random_range(0.0..1.0))).unwrap();
        let labels = Assignment::new((0..20).map(|i| i % 2).collect(), 2).unwrap();
        let p = ClusteringProblem::new(&x, &labels, 4, 0.05, 3).unwrap();
        let a = run_constrained_kmeans(&p, 100).unwrap();
        let b = run_constrained_kmeans(&p, 100).unwrap();
        assert_eq!(a, b);
        assert!(a.converged);
        for w in a.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs());
        }
        let recomputed =
            compute_objective_constrained(&x, &labels, &a.assignment, &a.centroids, 0.05).unwrap();
        assert!((recomputed - a.objective).abs() < 1e-9);
    }
}
