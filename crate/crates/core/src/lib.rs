//! Semi-supervised zero-shot classification.
//!
//! Class signatures are mapped into the visual feature space by ridge
//! regression, unlabeled instances are grouped by a label-constrained
//! k-means, and the mapping and the unseen-class labels can be refined
//! jointly by alternating minimization.
//!
//! Matrices store instances and classes as columns. See [`pipeline`] for the
//! end-to-end entry points and [`io`] for file formats.

pub mod clustering;
pub mod error;
pub mod eval;
pub mod io;
pub mod joint;
pub mod mapper;
mod par;
pub mod pipeline;
pub mod types;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Result, ZslError};
pub use types::{
    class_means, normalize_l1, Assignment, CentroidSet, FeatureMatrix, Hyperparams,
    MappingMatrix, Orientation, SignatureMatrix,
};
