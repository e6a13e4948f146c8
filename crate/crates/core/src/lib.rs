//! Turning-movement count estimation by transfer learning.
//!
//! Boosted regression trees are trained on instrumented intersections and
//! adapted to uninstrumented ones: Lasso feature selection, profile-based
//! intersection matching, substitution of the most target-like source
//! instances, and two-stage TrAdaBoost.R2.

pub mod boosting;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod folds;
pub mod io;
pub mod lasso;
pub mod schema;
pub mod transfer;
pub mod tree;

pub use error::{Error, ErrorClass, Result};
pub use schema::{Counts, Dataset, Feature, FeatureVector, Instance, InstanceKey, Movement};
