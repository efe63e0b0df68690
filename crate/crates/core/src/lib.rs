//! Causal discrimination discovery over tabular decision records.
//!
//! Pipeline: load a schema-described table, normalize numeric covariates,
//! fit a propensity model for group membership, score every record by its
//! propensity-weighted kNN risk difference, flag discriminated and favored
//! individuals, and summarize them with regression-tree rules.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision for callers that do not care.

pub mod dataset;
pub mod discovery;
pub mod error;
pub mod harness;
pub mod measures;
pub mod neighborhood;
pub mod propensity;
mod scalar;

pub use dataset::{
    load_dataset, load_dataset_str, AttributeKind, Decision, Group, Role, SchemaConfig,
};
pub use discovery::{classify, learn_tree, Flag, TreeParams};
pub use error::{Error, Result};
pub use measures::{ContingencyTable, FallbackMode};
pub use scalar::Scalar;

pub type Dataset64 = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type Record64 = dataset::Record<f64>;
pub type Record32 = dataset::Record<f32>;
pub type LogisticModel64 = propensity::LogisticModel<f64>;
pub type LogisticModel32 = propensity::LogisticModel<f32>;
pub type IndividualScore64 = discovery::IndividualScore<f64>;
pub type IndividualScore32 = discovery::IndividualScore<f32>;
pub type RegressionTree64 = discovery::RegressionTree<f64>;
pub type RegressionTree32 = discovery::RegressionTree<f32>;
pub type Rule64 = discovery::Rule<f64>;
pub type Rule32 = discovery::Rule<f32>;
pub type TrendRow64 = harness::TrendRow<f64>;
pub type TrendRow32 = harness::TrendRow<f32>;
