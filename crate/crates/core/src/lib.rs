//! Color reference games between neural speaker and listener agents, and
//! the lexicon measurements used to study them.

pub mod agents;
pub mod color;
pub mod context;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod stats;
pub mod training;

pub use agents::{AgentConfig, Listener, Speaker, Vocabulary};
pub use color::{ciede2000, hsl_to_lab, lab_euclidean, rgb_to_lab, HslColor, LabColor, RgbColor};
pub use context::{ColorContext, Condition, ConditionCounts, ContextDistribution, GenerationSpec};
pub use error::{Error, Result};
pub use metrics::ProductionRecord;
pub use training::{PipelineConfig, TrainConfig};
