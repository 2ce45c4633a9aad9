//! Experiment manifest (TOML).
//!
//! ```toml
//! name = "desk"
//! output_dir = "runs/desk"      # relative to the manifest file
//! seeds = [0, 1, 2]
//!
//! [data]
//! source = "synthetic"          # or "human" with human_csv = "colors.csv"
//! sl_train = 2000
//!
//! [train]
//! epochs_sl = 30
//! rl_lr = 1e-4
//! adam = { lr = 1e-3 }
//! agent = { hidden = 64, dropout = 0.1 }
//!
//! [[pipeline]]
//! sl_context_aware = true
//! rl_context_aware = true       # omit to skip RL
//! rl_distribution = "AllClose"  # distH, AllFar, HalfHalf, AllClose
//! eval = "dist50"               # distH or dist50
//! ```
//!
//! Every field except `name`, `output_dir` and the pipelines has a default.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use lexcom_core::context::ContextDistribution;
use lexcom_core::training::{PipelineConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{read_string, Result, WorkbenchError};
use crate::ingest::ColumnMap;
use crate::oracle::{DEFAULT_NOISE, DEFAULT_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Human,
}

/// Evaluation set a pipeline is tested on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvalSet {
    /// Corpus proportions of far/split/close.
    #[serde(rename = "distH")]
    DistH,
    /// Half far, half close.
    #[serde(rename = "dist50")]
    Dist50,
}

impl EvalSet {
    pub fn name(self) -> &'static str {
        match self {
            EvalSet::DistH => "distH",
            EvalSet::Dist50 => "dist50",
        }
    }

    pub fn distribution(self) -> ContextDistribution {
        match self {
            EvalSet::DistH => ContextDistribution::DistH,
            EvalSet::Dist50 => ContextDistribution::HalfHalf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub human_csv: Option<PathBuf>,
    pub column_map: ColumnMap,
    pub split_seed: u64,
    /// Seed for every generated context set.
    pub data_seed: u64,
    pub oracle_seed: u64,
    pub oracle_noise: f64,
    pub oracle_samples: usize,
    /// Synthetic contexts offered to the oracle; unsolved rounds are dropped.
    pub sl_pool: usize,
    pub sl_train: usize,
    pub sl_test: usize,
    pub rl_contexts: usize,
    /// Generated evaluation sets: distinct targets and contexts per target.
    pub eval_targets: usize,
    pub eval_repeats: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            human_csv: None,
            column_map: ColumnMap::default(),
            split_seed: 0,
            data_seed: 11,
            oracle_seed: 1,
            oracle_noise: DEFAULT_NOISE,
            oracle_samples: DEFAULT_SAMPLES,
            sl_pool: 4000,
            sl_train: 2000,
            sl_test: 500,
            rl_contexts: 2000,
            eval_targets: 150,
            eval_repeats: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    /// Defaults to the `SL±` / `SL±RL±` name.
    #[serde(default)]
    pub name: Option<String>,
    pub sl_context_aware: bool,
    /// Awareness during RL; absent means no RL phase.
    #[serde(default)]
    pub rl_context_aware: Option<bool>,
    #[serde(default = "default_distribution")]
    pub rl_distribution: ContextDistribution,
    #[serde(default = "default_eval")]
    pub eval: EvalSet,
}

fn default_distribution() -> ContextDistribution {
    ContextDistribution::DistH
}

fn default_eval() -> EvalSet {
    EvalSet::DistH
}

impl PipelineSpec {
    pub fn config(&self) -> PipelineConfig {
        let mut p = PipelineConfig::standard(self.sl_context_aware, self.rl_context_aware);
        if let Some(name) = &self.name {
            p.name = name.clone();
        }
        p.rl_distribution = self.rl_distribution;
        p
    }

    /// Pipelines trained on a non-corpus context distribution belong to the
    /// context-distribution table; all others to the pipeline table.
    pub fn in_distribution_table(&self) -> bool {
        self.rl_context_aware.is_some() && self.rl_distribution != ContextDistribution::DistH
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub name: String,
    pub output_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(rename = "pipeline")]
    pub pipelines: Vec<PipelineSpec>,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

impl ExperimentManifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| WorkbenchError::Config(e.to_string()))?;
        m.validate_fields()?;
        Ok(m)
    }

    /// Parse, then resolve relative paths against the manifest's directory
    /// and check that referenced inputs exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_string(path).map_err(|e| WorkbenchError::Config(e.to_string()))?;
        let mut m = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.output_dir = base.join(&m.output_dir);
        if let Some(p) = &m.data.human_csv {
            m.data.human_csv = Some(base.join(p));
        }
        m.check_paths()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| WorkbenchError::Config(e.to_string()))
    }

    pub fn pipeline_configs(&self) -> Vec<PipelineConfig> {
        self.pipelines.iter().map(PipelineSpec::config).collect()
    }

    pub fn eval_sets(&self) -> BTreeSet<EvalSet> {
        self.pipelines.iter().map(|p| p.eval).collect()
    }

    /// RL distributions used by pipelines that have an RL phase, in first-use order.
    pub fn rl_distributions(&self) -> Vec<ContextDistribution> {
        let mut out = Vec::new();
        for p in self.pipelines.iter().filter(|p| p.rl_context_aware.is_some()) {
            if !out.contains(&p.rl_distribution) {
                out.push(p.rl_distribution);
            }
        }
        out
    }

    pub fn check_paths(&self) -> Result<()> {
        if self.data.source == DataSource::Human {
            match &self.data.human_csv {
                Some(p) if p.is_file() => {}
                Some(p) => return Err(WorkbenchError::Config(format!("human_csv {} does not exist", p.display()))),
                None => return Err(WorkbenchError::Config("source = \"human\" needs human_csv".into())),
            }
        }
        Ok(())
    }

    fn validate_fields(&self) -> Result<()> {
        let bad = |m: String| Err(WorkbenchError::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("duplicate seeds".into());
        }
        if self.pipelines.is_empty() {
            return bad("at least one [[pipeline]] is required".into());
        }
        let mut names = BTreeSet::new();
        for p in self.pipeline_configs() {
            if p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || "+-_".contains(c)) {
                return bad(format!("pipeline name {:?} must use letters, digits, '+', '-' or '_'", p.name));
            }
            if !names.insert(p.name.clone()) {
                return bad(format!("duplicate pipeline name {:?}", p.name));
            }
        }
        let d = &self.data;
        if d.source == DataSource::Synthetic && d.sl_train + d.sl_test > d.sl_pool {
            return bad(format!("sl_train + sl_test = {} exceeds sl_pool {}", d.sl_train + d.sl_test, d.sl_pool));
        }
        if !(0.0..=1.0).contains(&d.oracle_noise) {
            return bad(format!("oracle_noise {} outside [0, 1]", d.oracle_noise));
        }
        if d.rl_contexts < 2 || d.eval_targets == 0 || d.eval_repeats == 0 {
            return bad("rl_contexts must be at least 2 and evaluation sizes positive".into());
        }
        let t = &self.train;
        if t.batch_size < 2 || t.agent.hidden == 0 || !(0.0..1.0).contains(&t.agent.dropout) {
            return bad("train: batch_size >= 2, hidden > 0 and dropout in [0, 1) required".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
output_dir = "out"

[[pipeline]]
sl_context_aware = true
rl_context_aware = true
rl_distribution = "AllClose"
eval = "dist50"

[[pipeline]]
sl_context_aware = false
"#;

    #[test]
    fn defaults_and_names() {
        let m = ExperimentManifest::from_toml(MINIMAL).unwrap();
        assert_eq!(m.seeds, vec![0, 1, 2]);
        assert_eq!(m.train, TrainConfig::default());
        let names: Vec<String> = m.pipeline_configs().into_iter().map(|p| p.name).collect();
        assert_eq!(names, ["SL+RL+", "SL-"]);
        assert!(m.pipelines[0].in_distribution_table());
        assert!(!m.pipelines[1].in_distribution_table());
        assert_eq!(m.rl_distributions(), vec![ContextDistribution::AllClose]);
        let again = ExperimentManifest::from_toml(&m.to_toml().unwrap()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn invalid_manifests_are_config_errors() {
        for text in [
            "name = 1",
            "name = \"x\"\noutput_dir = \"o\"\npipeline = []",
            "name = \"x\"\noutput_dir = \"o\"\nbogus = 3\n[[pipeline]]\nsl_context_aware = true",
            "name = \"x\"\noutput_dir = \"o\"\n[[pipeline]]\nsl_context_aware = true\n[[pipeline]]\nsl_context_aware = true",
            "name = \"x\"\noutput_dir = \"o\"\nseeds = []\n[[pipeline]]\nsl_context_aware = true",
        ] {
            let err = ExperimentManifest::from_toml(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn human_source_needs_an_existing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.toml");
        std::fs::write(&path, format!("{MINIMAL}\n[data]\nsource = \"human\"\nhuman_csv = \"missing.csv\"\n")).unwrap();
        assert_eq!(ExperimentManifest::load(&path).unwrap_err().exit_code(), 2);
    }
}
