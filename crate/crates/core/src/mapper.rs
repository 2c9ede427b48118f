//! Ridge regression from class signatures to feature space.
//!
//! Both the seen-only mapping and the joint update reduce to an r×r
//! symmetric positive definite system `G Dᵀ = B`, solved by Cholesky
//! factorization of `G`. `D` is transposed once at the end.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Result, ZslError};
use crate::types::{Assignment, FeatureMatrix, MappingMatrix, SignatureMatrix};

/// Largest tolerated condition number of the unregularized Gram matrix.
pub const MAX_CONDITION: f64 = 1e12;
/// Largest tolerated absolute asymmetry of the system matrix.
const MAX_ASYMMETRY: f64 = 1e-10;

/// Seen-only mapping problem: targets `x` (d×N), per-instance signatures
/// `y` (r×N) and ridge weight `gamma`.
#[derive(Debug, Clone)]
pub struct RidgeProblem<'a> {
    pub x: &'a FeatureMatrix,
    pub y: &'a DMatrix<f64>,
    pub gamma: f64,
}

impl RidgeProblem<'_> {
    pub fn solve(&self) -> Result<MappingMatrix> {
        solve_ridge(self.x, self.y, self.gamma)
    }

    pub fn objective(&self, d: &MappingMatrix) -> Result<f64> {
        ridge_objective(self.x, self.y, d, self.gamma)
    }
}

/// `Y Yᵀ` computed entry by entry so the result is exactly symmetric.
fn gram(y: &DMatrix<f64>) -> DMatrix<f64> {
    let r = y.nrows();
    let mut g = DMatrix::zeros(r, r);
    for a in 0..r {
        for b in a..r {
            let v = y.row(a).dot(&y.row(b));
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    g
}

fn check_shapes(x: &FeatureMatrix, y: &DMatrix<f64>) -> Result<()> {
    if x.len() != y.ncols() {
        return Err(ZslError::ShapeMismatch(format!(
            "{} feature columns but {} signature columns",
            x.len(),
            y.ncols()
        )));
    }
    if y.nrows() == 0 {
        return Err(ZslError::ShapeMismatch(
            "signature dimension must be at least 1".into(),
        ));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(ZslError::InvalidHyperparams(format!(
            "gamma must be >= 0, got {gamma}"
        )));
    }
    Ok(())
}

/// Seen-data normal equations: `(Y Yᵀ, Y Xᵀ)` before adding the ridge.
fn seen_system(x: &FeatureMatrix, y: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (gram(y), y * x.data().transpose())
}

/// Solves `(G + γI) Dᵀ = rhs` and returns `D`.
fn solve_system(mut g: DMatrix<f64>, rhs: DMatrix<f64>, gamma: f64) -> Result<MappingMatrix> {
    let asym = (&g - g.transpose()).amax();
    if asym >= MAX_ASYMMETRY {
        return Err(ZslError::SingularSystem(format!(
            "system matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    if gamma == 0.0 {
        let eig = SymmetricEigen::new(g.clone()).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        if min.is_nan() || min <= 0.0 || max / min > MAX_CONDITION {
            return Err(ZslError::SingularSystem(format!(
                "unregularized Gram matrix is singular (eigenvalues in [{min:e}, {max:e}])"
            )));
        }
    } else {
        for i in 0..g.nrows() {
            g[(i, i)] += gamma;
        }
    }
    let chol = Cholesky::new(g).ok_or_else(|| {
        ZslError::SingularSystem("system matrix is not positive definite".into())
    })?;
    let dt = chol.solve(&rhs);
    MappingMatrix::new(dt.transpose())
}

/// Closed-form ridge solution `D = X Yᵀ (Y Yᵀ + γI)⁻¹`, the unique minimizer
/// of `‖X − DY‖² + γ‖D‖²`.
///
/// `gamma = 0` is accepted when `Y Yᵀ` is well conditioned.
pub fn solve_ridge(x: &FeatureMatrix, y: &DMatrix<f64>, gamma: f64) -> Result<MappingMatrix> {
    check_shapes(x, y)?;
    check_gamma(gamma)?;
    let (g, rhs) = seen_system(x, y);
    solve_system(g, rhs, gamma)
}

/// `‖X − DY‖² + γ‖D‖²` with squared Frobenius norms.
pub fn ridge_objective(
    x: &FeatureMatrix,
    y: &DMatrix<f64>,
    d: &MappingMatrix,
    gamma: f64,
) -> Result<f64> {
    check_shapes(x, y)?;
    if d.feature_dim() != x.dim() || d.signature_dim() != y.nrows() {
        return Err(ZslError::ShapeMismatch(format!(
            "mapping is {}x{}, problem needs {}x{}",
            d.feature_dim(),
            d.signature_dim(),
            x.dim(),
            y.nrows()
        )));
    }
    let resid = x.data() - d.data() * y;
    Ok(resid.norm_squared() + gamma * d.data().norm_squared())
}

/// Mapping update of the joint objective for a fixed unseen assignment:
///
/// `D = (X_s Y_sᵀ + β X_u R S_uᵀ)(Y_s Y_sᵀ + β S_u Rᵀ R S_uᵀ + γI)⁻¹`.
///
/// With `beta = 0` or no unseen instances this is exactly [`solve_ridge`].
pub fn joint_ridge_update(
    x_s: &FeatureMatrix,
    y_s: &DMatrix<f64>,
    x_u: &FeatureMatrix,
    s_u: &SignatureMatrix,
    r: &Assignment,
    beta: f64,
    gamma: f64,
) -> Result<MappingMatrix> {
    check_shapes(x_s, y_s)?;
    check_gamma(gamma)?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(ZslError::InvalidHyperparams(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    if x_u.dim() != x_s.dim() {
        return Err(ZslError::ShapeMismatch(format!(
            "seen features have dimension {}, unseen {}",
            x_s.dim(),
            x_u.dim()
        )));
    }
    if s_u.dim() != y_s.nrows() {
        return Err(ZslError::ShapeMismatch(format!(
            "seen signatures have dimension {}, unseen {}",
            y_s.nrows(),
            s_u.dim()
        )));
    }
    if r.len() != x_u.len() || r.k() != s_u.n_classes() {
        return Err(ZslError::ShapeMismatch(format!(
            "assignment covers {} instances over {} classes, expected {} over {}",
            r.len(),
            r.k(),
            x_u.len(),
            s_u.n_classes()
        )));
    }

    let (mut g, mut rhs) = seen_system(x_s, y_s);
    if beta > 0.0 && !x_u.is_empty() {
        // X_u R: per-class sums of unseen features; Rᵀ R: diagonal of counts.
        let n_u = s_u.n_classes();
        let mut sums = DMatrix::zeros(x_u.dim(), n_u);
        let mut counts = vec![0.0; n_u];
        for (i, &c) in r.indices().iter().enumerate() {
            let mut col = sums.column_mut(c);
            col += x_u.column(i);
            counts[c] += 1.0;
        }
        let s = s_u.data();
        let mut weighted = s.clone();
        for (c, mut col) in weighted.column_iter_mut().enumerate() {
            col *= counts[c];
        }
        let r_dim = s.nrows();
        let mut extra = DMatrix::zeros(r_dim, r_dim);
        for a in 0..r_dim {
            for b in a..r_dim {
                let v = weighted.row(a).dot(&s.row(b));
                extra[(a, b)] = v;
                extra[(b, a)] = v;
            }
        }
        g += extra * beta;
        rhs += (s * sums.transpose()) * beta;
    }
    solve_system(g, rhs, gamma)
}

/// Class representatives: column `j` is `D s_j`.
pub fn map_signatures(d: &MappingMatrix, s: &SignatureMatrix) -> Result<FeatureMatrix> {
    if d.signature_dim() != s.dim() {
        return Err(ZslError::ShapeMismatch(format!(
            "mapping expects signatures of dimension {}, got {}",
            d.signature_dim(),
            s.dim()
        )));
    }
    FeatureMatrix::new(d.data() * s.data())
}
