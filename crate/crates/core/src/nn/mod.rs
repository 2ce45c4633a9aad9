//! Minimal neural substrate with hand-derived backward passes.

pub mod adam;
pub mod checkpoint;
pub mod fnn;
pub mod gradcheck;
pub mod loss;
pub mod param;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, TensorRecord};
pub use fnn::{FnnBlock, FnnCache, Mode, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
pub use loss::{argmax, categorical_sample, log_softmax, softmax, softmax_cross_entropy, CategoricalSample};
pub use param::{Linear, Param, Parameterized};
