//! Experiment workbench: corpus ingestion, synthetic reference lexicon,
//! manifests, run orchestration, aggregate reports, plots.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod manifest;
pub mod oracle;
pub mod pca;
pub mod plots;
pub mod split;

pub use error::{Result, WorkbenchError};
pub use experiment::{run_experiment, Aggregate};
pub use manifest::ExperimentManifest;
