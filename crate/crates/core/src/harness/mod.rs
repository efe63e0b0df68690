//! Trend reports, tampering experiments and the end-to-end pipeline.

pub mod pipeline;
pub mod tamper;
pub mod trends;

pub use pipeline::{
    run_pipeline, Analysis, Manifest, PipelineConfig, PipelineReport, TreeMode, TreeStudy,
};
pub use tamper::{tamper, TamperSpec, Tampered};
pub use trends::{bin_trends, trend_table, Population, Subset, TrendFilter, TrendRow};
