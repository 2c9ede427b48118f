//! Joint estimation of the signature mapping and the unseen-instance labels.
//!
//! The objective
//!
//! ```text
//! ‖X_s − D Y_s‖² + β‖X_u − D S_u Rᵀ‖² + γ‖D‖²
//! ```
//!
//! is minimized by coordinate descent: a closed-form ridge update of `D`
//! for fixed `R`, then nearest-representative assignment of every unseen
//! instance for fixed `D`. Empty classes are refilled with a random
//! fraction of the instances, and the loop stops once `R` no longer changes.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ZslError};
use crate::mapper::{joint_ridge_update, map_signatures};
use crate::par::map_range;
use crate::types::{argmin, sq_dist, Assignment, FeatureMatrix, Hyperparams, MappingMatrix, SignatureMatrix};

/// Mixed into the run seed so repair draws are independent of the
/// clustering seeds derived from the same value.
const REPAIR_STREAM: u64 = 0x5eed_0f0e_7a1c;

#[derive(Debug, Clone)]
pub struct JointProblem<'a> {
    pub x_s: &'a FeatureMatrix,
    /// Per-instance seen signatures, r×N_s.
    pub y_s: &'a DMatrix<f64>,
    pub x_u: &'a FeatureMatrix,
    pub s_u: &'a SignatureMatrix,
    pub hyper: &'a Hyperparams,
}

impl JointProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.x_s.len() != self.y_s.ncols() {
            return Err(ZslError::ShapeMismatch(format!(
                "{} seen instances but {} seen signature columns",
                self.x_s.len(),
                self.y_s.ncols()
            )));
        }
        if self.x_s.dim() != self.x_u.dim() {
            return Err(ZslError::ShapeMismatch(format!(
                "seen features have dimension {}, unseen {}",
                self.x_s.dim(),
                self.x_u.dim()
            )));
        }
        if self.y_s.nrows() != self.s_u.dim() {
            return Err(ZslError::ShapeMismatch(format!(
                "seen signatures have dimension {}, unseen {}",
                self.y_s.nrows(),
                self.s_u.dim()
            )));
        }
        Ok(())
    }

    fn check_assignment(&self, r: &Assignment) -> Result<()> {
        if r.len() != self.x_u.len() || r.k() != self.s_u.n_classes() {
            return Err(ZslError::ShapeMismatch(format!(
                "assignment covers {} instances over {} classes, expected {} over {}",
                r.len(),
                r.k(),
                self.x_u.len(),
                self.s_u.n_classes()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointResult {
    pub d: MappingMatrix,
    pub r: Assignment,
    /// Two entries per iteration: after the `D` update, then after the
    /// assignment and repair step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// 1-based iterations in which empty-class repair moved instances.
    pub repair_events: Vec<usize>,
    pub converged: bool,
}

impl JointResult {
    /// Half-steps where the objective rose by more than `rel_tol` without a
    /// repair explaining it, as `(trace index, before, after)`.
    pub fn monotonicity_violations(&self, rel_tol: f64) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for i in 1..self.objective_trace.len() {
            let (before, after) = (self.objective_trace[i - 1], self.objective_trace[i]);
            // odd entries close an assignment step of iteration (i + 1) / 2
            let repaired = i % 2 == 1 && self.repair_events.contains(&i.div_ceil(2));
            if !repaired && after > before + rel_tol * before.abs().max(1.0) {
                out.push((i, before, after));
            }
        }
        out
    }
}

/// Each instance goes to the class whose mapped signature `D s_k` is
/// nearest; ties go to the lowest class index.
pub fn assign_nearest_representative(
    x_u: &FeatureMatrix,
    d: &MappingMatrix,
    s_u: &SignatureMatrix,
) -> Result<Assignment> {
    let reps = map_signatures(d, s_u)?;
    if reps.dim() != x_u.dim() {
        return Err(ZslError::ShapeMismatch(format!(
            "mapping produces dimension {}, features have {}",
            reps.dim(),
            x_u.dim()
        )));
    }
    let k = s_u.n_classes();
    let indices = map_range(x_u.len(), |i| {
        argmin((0..k).map(|j| sq_dist(x_u.column(i), reps.column(j)))).expect("k >= 1")
    });
    Assignment::new(indices, k)
}

/// Number of instances moved into each empty class.
pub fn repair_count(n: usize, fraction: f64) -> usize {
    // guard against 0.07 * 100 = 7.000000000000001
    ((fraction * n as f64 - 1e-9).ceil() as usize).max(1)
}

/// Seeded variant of [`repair_with_rng`].
pub fn repair_empty_clusters(r: &Assignment, fraction: f64, seed: u64) -> Result<Assignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    repair_with_rng(r, fraction, &mut rng).map(|(a, _)| a)
}

/// For every class without members, in ascending order, moves
/// `ceil(fraction · N)` instances chosen uniformly without replacement
/// (never the same instance twice within one call) into it. Returns the new
/// assignment and the repaired classes.
pub fn repair_with_rng<R: Rng>(
    r: &Assignment,
    fraction: f64,
    rng: &mut R,
) -> Result<(Assignment, Vec<usize>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(ZslError::InvalidHyperparams(format!(
            "repair fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let counts = r.counts();
    let empty: Vec<usize> = (0..r.k()).filter(|&c| counts[c] == 0).collect();
    if empty.is_empty() || r.is_empty() {
        return Ok((r.clone(), Vec::new()));
    }
    let per_class = repair_count(r.len(), fraction);
    let mut indices = r.indices().to_vec();
    let mut movable: Vec<usize> = (0..r.len()).collect();
    let mut repaired = Vec::new();
    for c in empty {
        let take = per_class.min(movable.len());
        if take == 0 {
            break;
        }
        let mut picked: Vec<usize> = index::sample(rng, movable.len(), take).into_vec();
        picked.sort_unstable();
        for &p in &picked {
            indices[movable[p]] = c;
        }
        for &p in picked.iter().rev() {
            movable.remove(p);
        }
        repaired.push(c);
    }
    Ok((Assignment::new(indices, r.k())?, repaired))
}

/// Value of the joint objective at `(d, r)`.
pub fn compute_objective_joint(
    problem: &JointProblem<'_>,
    d: &MappingMatrix,
    r: &Assignment,
) -> Result<f64> {
    problem.validate()?;
    problem.check_assignment(r)?;
    if d.feature_dim() != problem.x_s.dim() || d.signature_dim() != problem.y_s.nrows() {
        return Err(ZslError::ShapeMismatch(format!(
            "mapping is {}x{}, problem needs {}x{}",
            d.feature_dim(),
            d.signature_dim(),
            problem.x_s.dim(),
            problem.y_s.nrows()
        )));
    }
    let seen = (problem.x_s.data() - d.data() * problem.y_s).norm_squared();
    let reps = d.data() * problem.s_u.data();
    let mut unseen = 0.0;
    for (i, &c) in r.indices().iter().enumerate() {
        unseen += sq_dist(problem.x_u.column(i), reps.column(c));
    }
    Ok(seen + problem.hyper.beta * unseen + problem.hyper.gamma * d.data().norm_squared())
}

/// Coordinate descent from an initial assignment.
pub fn run_joint(
    problem: &JointProblem<'_>,
    r_init: &Assignment,
    max_iters: usize,
) -> Result<JointResult> {
    problem.validate()?;
    problem.check_assignment(r_init)?;
    if max_iters == 0 {
        return Err(ZslError::InvalidHyperparams("max_iters must be >= 1".into()));
    }
    let hyper = problem.hyper;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ REPAIR_STREAM);
    let mut r = r_init.clone();
    let mut trace = Vec::with_capacity(2 * max_iters);
    let mut repair_events = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut d;
    loop {
        iterations += 1;
        d = joint_ridge_update(
            problem.x_s,
            problem.y_s,
            problem.x_u,
            problem.s_u,
            &r,
            hyper.beta,
            hyper.gamma,
        )?;
        trace.push(compute_objective_joint(problem, &d, &r)?);
        let assigned = assign_nearest_representative(problem.x_u, &d, problem.s_u)?;
        let (next, repaired) = repair_with_rng(&assigned, hyper.repair_fraction, &mut rng)?;
        if !repaired.is_empty() {
            repair_events.push(iterations);
        }
        trace.push(compute_objective_joint(problem, &d, &next)?);
        if next == r {
            converged = true;
            break;
        }
        r = next;
        if iterations >= max_iters {
            break;
        }
    }
    Ok(JointResult {
        d,
        r,
        objective_trace: trace,
        iterations,
        repair_events,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn nearest_representative_basic_and_tie() {
        let d = MappingMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let s = SignatureMatrix::new(DMatrix::from_column_slice(2, 2, &[1e-300, 0.0, 10.0, 0.0]))
            .unwrap();
        let x = FeatureMatrix::new(DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 5.0, 0.0])).unwrap();
        let a = assign_nearest_representative(&x, &d, &s).unwrap();
        assert_eq!(a.indices(), &[0, 0]);
    }

    #[test]
    fn nearest_representative_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let d = MappingMatrix::new(randn(4, 3, &mut rng)).unwrap();
            let s = SignatureMatrix::new(randn(3, 5, &mut rng)).unwrap();
            let x = FeatureMatrix::new(randn(4, 30, &mut rng)).unwrap();
            let a = assign_nearest_representative(&x, &d, &s).unwrap();
            for i in 0..30 {
                let mut best = (0, f64::INFINITY);
                for k in 0..5 {
                    let rep = d.data() * s.data().column(k);
                    let dist = (x.data().column(i) - rep).norm();
                    if dist < best.1 {
                        best = (k, dist);
                    }
                }
                assert_eq!(a.get(i), best.0);
            }
        }
    }

    #[test]
    fn repair_no_empty_is_noop() {
        let r = Assignment::new(vec![0, 1, 2, 0], 3).unwrap();
        assert_eq!(repair_empty_clusters(&r, 0.02, 1).unwrap(), r);
    }

    #[test]
    fn repair_moves_two_percent() {
        let r = Assignment::new((0..100).map(|i| i % 2).collect(), 3).unwrap();
        for seed in 0..10 {
            let out = repair_empty_clusters(&r, 0.02, seed).unwrap();
            assert_eq!(out.counts()[2], 2);
            let changed = (0..100).filter(|&i| out.get(i) != r.get(i)).count();
            assert_eq!(changed, 2);
        }
    }

    #[test]
    fn repair_ceiling_rule() {
        let r = Assignment::new(vec![0; 10], 2).unwrap();
        let out = repair_empty_clusters(&r, 0.02, 3).unwrap();
        assert_eq!(out.counts(), vec![9, 1]);
        assert_eq!(repair_count(350, 0.02), 7);
        assert_eq!(repair_count(100, 0.02), 2);
        assert_eq!(repair_count(100, 0.07), 7);
    }

    #[test]
    fn repair_never_moves_an_instance_twice() {
        let r = Assignment::new(vec![0; 3], 6).unwrap();
        let out = repair_empty_clusters(&r, 0.5, 0).unwrap();
        // each of the 3 instances moves once, classes 1..=3 get one each
        // (two requested, fewer available), classes 4 and 5 stay empty
        assert_eq!(out.counts(), vec![0, 2, 1, 0, 0, 0]);
    }

    fn problem_parts(seed: u64) -> (FeatureMatrix, DMatrix<f64>, FeatureMatrix, SignatureMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x_s = FeatureMatrix::new(randn(5, 12, &mut rng)).unwrap();
        let y_s = randn(3, 12, &mut rng);
        let x_u = FeatureMatrix::new(randn(5, 15, &mut rng)).unwrap();
        let s_u = SignatureMatrix::new(randn(3, 3, &mut rng)).unwrap();
        (x_s, y_s, x_u, s_u)
    }

    #[test]
    fn objective_zero_map_and_naive_sum() {
        let (x_s, y_s, x_u, s_u) = problem_parts(2);
        let hyper = Hyperparams::new(0.4).with_beta(0.7);
        let p = JointProblem { x_s: &x_s, y_s: &y_s, x_u: &x_u, s_u: &s_u, hyper: &hyper };
        let r = Assignment::new((0..15).map(|i| i % 3).collect(), 3).unwrap();
        let zero = MappingMatrix::new(DMatrix::zeros(5, 3)).unwrap();
        let v = compute_objective_joint(&p, &zero, &r).unwrap();
        let expect = x_s.data().norm_squared() + 0.7 * x_u.data().norm_squared();
        assert!((v - expect).abs() < 1e-12 * expect);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = MappingMatrix::new(randn(5, 3, &mut rng)).unwrap();
        let mut naive = 0.0;
        for i in 0..12 {
            for a in 0..5 {
                let mut pred = 0.0;
                for b in 0..3 {
                    pred += d.data()[(a, b)] * y_s[(b, i)];
                }
                naive += (x_s.data()[(a, i)] - pred).powi(2);
            }
        }
        for i in 0..15 {
            for a in 0..5 {
                let mut pred = 0.0;
                for b in 0..3 {
                    pred += d.data()[(a, b)] * s_u.data()[(b, r.get(i))];
                }
                naive += 0.7 * (x_u.data()[(a, i)] - pred).powi(2);
            }
        }
        for v in d.data().iter() {
            naive += 0.4 * v * v;
        }
        let got = compute_objective_joint(&p, &d, &r).unwrap();
        assert!((got - naive).abs() <= 1e-9 * naive);
    }

    #[test]
    fn run_joint_monotone_and_deterministic() {
        for seed in 0..10 {
            let (x_s, y_s, x_u, s_u) = problem_parts(seed);
            let hyper = Hyperparams::new(0.5).with_seed(seed);
            let p = JointProblem { x_s: &x_s, y_s: &y_s, x_u: &x_u, s_u: &s_u, hyper: &hyper };
            let r0 = Assignment::new(vec![0; 15], 3).unwrap();
            let a = run_joint(&p, &r0, 100).unwrap();
            let b = run_joint(&p, &r0, 100).unwrap();
            assert_eq!(a, b);
            assert!(a.monotonicity_violations(1e-9).is_empty());
            assert_eq!(a.objective_trace.len(), 2 * a.iterations);
        }
    }

    #[test]
    fn run_joint_respects_max_iters() {
        let (x_s, y_s, x_u, s_u) = problem_parts(1);
        let hyper = Hyperparams::new(0.5);
        let p = JointProblem { x_s: &x_s, y_s: &y_s, x_u: &x_u, s_u: &s_u, hyper: &hyper };
        let r0 = Assignment::new(vec![0; 15], 3).unwrap();
        let res = run_joint(&p, &r0, 1).unwrap();
        assert_eq!(res.iterations, 1);
    }
}
