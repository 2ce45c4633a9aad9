//! Run orchestration and persistence.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.toml
//! data/        vocabulary.json, sl_train.csv, sl_test.csv, rl_<dist>.csv,
//!              eval_<set>.csv, reference_<set>.csv, summary.json, rejects.csv
//! runs/<pipeline>/seed_<n>/
//!              config.json, curves.csv, trials*.csv, productions*.csv,
//!              accuracy.json, metrics.json, checkpoints/*.ckpt
//! aggregate/   table1.*, table2.*, metrics.csv, curves_aggregate.csv,
//!              diversity.csv, slope_comparison.json, failures.csv
//! plots/       *.svg
//! ```
//!
//! Each stage reads only what earlier stages wrote, so the CLI can run them
//! separately and get the same bytes as a full `run`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use lexcom_core::agents::{Listener, Speaker, Vocabulary};
use lexcom_core::context::{
    generate_dataset, generate_repeated_targets, ColorContext, Condition, ContextDistribution, GenerationSpec,
};
use lexcom_core::metrics::{
    informativeness_entropy, lexical_diversity, lexical_diversity_by_condition, rarefied_diversity, semantic_drift,
    system_informativeness_with, InformativenessTable, ProductionRecord,
};
use lexcom_core::stats::{
    adaptation_observations, compare_slopes, fit_adaptation_slope, fit_single_lexicon_slope, SlopeComparison, SlopeFit,
};
use lexcom_core::training::{
    evaluate, productions, run_pipeline, stream_rng, CurvePoint, EvalReport, LabeledContext, PipelineData, RunArtifact,
    Stream, SubsetAccuracy, TrialOutcome,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    productions_from_labels, read_contexts, read_csv, read_productions, write_contexts, write_csv, write_productions,
};
use crate::error::{create_dir, read_json, write_file, write_json, Result, WorkbenchError};
use crate::ingest::{ingest_colors_csv, write_rejects, IngestReport};
use crate::manifest::{DataSource, EvalSet, ExperimentManifest, PipelineSpec};
use crate::oracle::OracleLanguage;
use crate::split::split_human_data;

/// Offsets from `data_seed` for each generated set, so that sets never share a stream.
mod salt {
    pub const POOL: u64 = 0;
    pub const LABEL: u64 = 1;
    pub const REFERENCE: u64 = 2;
    pub const EVAL_DIST_H: u64 = 3;
    pub const EVAL_DIST_50: u64 = 4;
    pub const RL_BASE: u64 = 10;
}

pub const DATA_DIR: &str = "data";
pub const RUNS_DIR: &str = "runs";
pub const AGGREGATE_DIR: &str = "aggregate";
pub const PLOTS_DIR: &str = "plots";
/// Subsets in report order: overall, far, split, close.
pub const SUBSETS: [&str; 4] = ["O", "F", "S", "C"];

fn subset_code(c: Condition) -> &'static str {
    match c {
        Condition::Far => "F",
        Condition::Split => "S",
        Condition::Close => "C",
    }
}

fn distribution_salt(d: ContextDistribution) -> u64 {
    salt::RL_BASE
        + match d {
            ContextDistribution::DistH => 0,
            ContextDistribution::AllFar => 1,
            ContextDistribution::HalfHalf => 2,
            ContextDistribution::AllClose => 3,
        }
}

pub fn run_dir(out: &Path, pipeline: &str, seed: u64) -> PathBuf {
    out.join(RUNS_DIR).join(pipeline).join(format!("seed_{seed}"))
}

// ---------------------------------------------------------------------------
// Data

/// Everything the runs share, as written to and read from `data/`.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub vocab: Vocabulary,
    pub sl_train: Vec<LabeledContext>,
    pub sl_test: Vec<LabeledContext>,
    pub rl: BTreeMap<String, Vec<ColorContext>>,
    pub eval: BTreeMap<EvalSet, Vec<ColorContext>>,
    /// Reference-lexicon productions on each evaluation set, where available.
    pub reference: BTreeMap<EvalSet, Vec<ProductionRecord>>,
}

impl PreparedData {
    /// Reference lexicon for drift: the SL training words.
    pub fn lexicon(&self) -> Result<Vec<ProductionRecord>> {
        let words: Vec<&str> = self.sl_train.iter().map(|l| self.vocab.word(l.word)).collect::<Result<_, _>>()?;
        Ok(productions_from_labels(self.sl_train.iter().map(|l| &l.context).zip(words), 0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub source: DataSource,
    pub vocabulary_size: usize,
    pub sl_train: usize,
    pub sl_test: usize,
    /// Synthetic source: pooled contexts offered to the oracle and how many it solved.
    pub oracle_pool: Option<usize>,
    pub oracle_solved: Option<usize>,
    pub ingest: Option<IngestReport>,
    pub rl: BTreeMap<String, usize>,
    pub eval: BTreeMap<String, usize>,
}

fn label(vocab: &Vocabulary, rows: impl IntoIterator<Item = (ColorContext, String)>) -> Result<Vec<LabeledContext>> {
    rows.into_iter()
        .map(|(context, w)| Ok(LabeledContext { context, word: vocab.index_of(&w)? }))
        .collect::<Result<_, lexcom_core::Error>>()
        .map_err(|e: lexcom_core::Error| WorkbenchError::Data(e.to_string()))
}

fn eval_set_contexts(m: &ExperimentManifest, set: EvalSet) -> Result<Vec<ColorContext>> {
    let seed = m.data.data_seed.wrapping_add(match set {
        EvalSet::DistH => salt::EVAL_DIST_H,
        EvalSet::Dist50 => salt::EVAL_DIST_50,
    });
    let spec = GenerationSpec { seed, ..GenerationSpec::default() };
    Ok(generate_repeated_targets(&spec, m.data.eval_targets, m.data.eval_repeats, set.distribution().proportions())?)
}

/// Generate or ingest the shared data and write it under `out/data`.
pub fn prepare_data(m: &ExperimentManifest, out: &Path) -> Result<DataSummary> {
    let d = &m.data;
    let dir = out.join(DATA_DIR);
    create_dir(&dir)?;
    let mut eval = BTreeMap::new();
    let mut reference = BTreeMap::new();
    let (vocab, sl_train, sl_test, oracle_pool, oracle_solved, ingest) = match d.source {
        DataSource::Synthetic => {
            let lang = OracleLanguage::build(d.oracle_seed, d.oracle_samples, d.oracle_noise);
            let vocab = lang.vocabulary();
            let pool_counts = ContextDistribution::DistH.proportions().scaled_to(d.sl_pool);
            let pool =
                generate_dataset(&GenerationSpec::with_counts(pool_counts, d.data_seed.wrapping_add(salt::POOL)))?;
            let mut rng = ChaCha8Rng::seed_from_u64(d.data_seed.wrapping_add(salt::LABEL));
            let solved = lang.label(&pool, &mut rng);
            if solved.len() < d.sl_train + d.sl_test {
                return Err(WorkbenchError::Data(format!(
                    "oracle solved {} of {} pooled contexts; {} needed",
                    solved.len(),
                    pool.len(),
                    d.sl_train + d.sl_test
                )));
            }
            let labeled = label(&vocab, solved)?;
            let train = labeled[..d.sl_train].to_vec();
            let test = labeled[d.sl_train..d.sl_train + d.sl_test].to_vec();
            let mut rng = ChaCha8Rng::seed_from_u64(d.data_seed.wrapping_add(salt::REFERENCE));
            for set in m.eval_sets() {
                let contexts = eval_set_contexts(m, set)?;
                let words: Vec<String> = contexts.iter().map(|c| lang.name(c, &mut rng)).collect();
                reference
                    .insert(set, productions_from_labels(contexts.iter().zip(words.iter().map(String::as_str)), 0));
                eval.insert(set, contexts);
            }
            (vocab, train, test, Some(pool.len()), Some(labeled.len()), None)
        }
        DataSource::Human => {
            let path = d.human_csv.as_ref().ok_or_else(|| WorkbenchError::Config("human_csv missing".into()))?;
            let ingested = ingest_colors_csv(path, &d.column_map)?;
            write_rejects(&dir.join("rejects.csv"), &ingested.rejects)?;
            if ingested.rows.is_empty() {
                return Err(WorkbenchError::Data(format!("{} has no usable rows", path.display())));
            }
            let vocab = Vocabulary::new(ingested.vocabulary()).map_err(|e| WorkbenchError::Data(e.to_string()))?;
            let (train, test) = split_human_data(&ingested.rows, d.split_seed);
            let train = label(&vocab, train.into_iter().map(|r| (r.context, r.word)))?;
            let test = label(&vocab, test.into_iter().map(|r| (r.context, r.word)))?;
            for set in m.eval_sets() {
                match set {
                    EvalSet::DistH => {
                        let contexts: Vec<ColorContext> = test.iter().map(|l| l.context).collect();
                        let words: Vec<&str> = test.iter().map(|l| vocab.word(l.word)).collect::<Result<_, _>>()?;
                        reference.insert(set, productions_from_labels(contexts.iter().zip(words), 0));
                        eval.insert(set, contexts);
                    }
                    EvalSet::Dist50 => {
                        eval.insert(set, eval_set_contexts(m, set)?);
                    }
                }
            }
            (vocab, train, test, None, None, Some(ingested.report))
        }
    };
    let mut rl = BTreeMap::new();
    for dist in m.rl_distributions() {
        let counts = dist.proportions().scaled_to(d.rl_contexts);
        let spec = GenerationSpec::with_counts(counts, d.data_seed.wrapping_add(distribution_salt(dist)));
        rl.insert(dist.name().to_string(), generate_dataset(&spec)?);
    }

    write_json(&dir.join("vocabulary.json"), &vocab)?;
    let labeled_rows = |data: &[LabeledContext]| -> Result<Vec<(ColorContext, String)>> {
        data.iter().map(|l| Ok((l.context, vocab.word(l.word)?.to_string()))).collect()
    };
    let train_rows = labeled_rows(&sl_train)?;
    write_contexts(&dir.join("sl_train.csv"), train_rows.iter().map(|(c, w)| (c, Some(w.as_str()))))?;
    let test_rows = labeled_rows(&sl_test)?;
    write_contexts(&dir.join("sl_test.csv"), test_rows.iter().map(|(c, w)| (c, Some(w.as_str()))))?;
    for (name, contexts) in &rl {
        write_contexts(&dir.join(format!("rl_{name}.csv")), contexts.iter().map(|c| (c, None)))?;
    }
    for (set, contexts) in &eval {
        write_contexts(&dir.join(format!("eval_{}.csv", set.name())), contexts.iter().map(|c| (c, None)))?;
    }
    for (set, records) in &reference {
        write_productions(&dir.join(format!("reference_{}.csv", set.name())), records)?;
    }
    let summary = DataSummary {
        source: d.source,
        vocabulary_size: vocab.len(),
        sl_train: sl_train.len(),
        sl_test: sl_test.len(),
        oracle_pool,
        oracle_solved,
        ingest,
        rl: rl.iter().map(|(k, v)| (k.clone(), v.len())).collect(),
        eval: eval.iter().map(|(k, v)| (k.name().to_string(), v.len())).collect(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn load_data(m: &ExperimentManifest, out: &Path) -> Result<PreparedData> {
    let dir = out.join(DATA_DIR);
    let vocab: Vocabulary = read_json(&dir.join("vocabulary.json"))?;
    let labeled = |name: &str| -> Result<Vec<LabeledContext>> {
        read_contexts(&dir.join(name))?
            .into_iter()
            .map(|r| {
                let word = vocab.index_of(&r.word).map_err(|e| WorkbenchError::Data(format!("{name}: {e}")))?;
                Ok(LabeledContext { context: r.context(), word })
            })
            .collect()
    };
    let contexts = |name: String| -> Result<Vec<ColorContext>> {
        Ok(read_contexts(&dir.join(name))?.iter().map(|r| r.context()).collect())
    };
    let mut rl = BTreeMap::new();
    for dist in m.rl_distributions() {
        rl.insert(dist.name().to_string(), contexts(format!("rl_{}.csv", dist.name()))?);
    }
    let mut eval = BTreeMap::new();
    let mut reference = BTreeMap::new();
    for set in m.eval_sets() {
        eval.insert(set, contexts(format!("eval_{}.csv", set.name()))?);
        let path = dir.join(format!("reference_{}.csv", set.name()));
        if path.is_file() {
            reference.insert(set, read_productions(&path)?);
        }
    }
    Ok(PreparedData {
        sl_train: labeled("sl_train.csv")?,
        sl_test: labeled("sl_test.csv")?,
        vocab,
        rl,
        eval,
        reference,
    })
}

// ---------------------------------------------------------------------------
// Runs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrialRow {
    context_id: u64,
    condition: Condition,
    word: String,
    target_position: usize,
    choice: usize,
    success: bool,
    reward: f64,
    human_word: String,
    human_word_choice: Option<usize>,
}

fn trial_rows(trials: &[TrialOutcome], vocab: &Vocabulary) -> Result<Vec<TrialRow>> {
    trials
        .iter()
        .map(|t| {
            Ok(TrialRow {
                context_id: t.context_id,
                condition: t.condition,
                word: vocab.word(t.word)?.to_string(),
                target_position: t.target_position,
                choice: t.choice,
                success: t.success,
                reward: t.reward,
                human_word: t.human_word.map(|w| vocab.word(w).map(str::to_string)).transpose()?.unwrap_or_default(),
                human_word_choice: t.human_word_choice,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfigSnapshot {
    pub experiment: String,
    pub seed: u64,
    pub pipeline: PipelineSpec,
    pub train: lexcom_core::training::TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySnapshot {
    /// SL test-set report: speaker and listener accuracy against reference words.
    pub sl_test: Vec<SubsetAccuracy>,
    pub eval_after_sl: Vec<SubsetAccuracy>,
    pub eval_final: Vec<SubsetAccuracy>,
}

fn write_checkpoint(path: &Path, ckpt: &lexcom_core::nn::Checkpoint) -> Result<()> {
    let file = File::create(path).map_err(|e| WorkbenchError::io(path, e))?;
    ckpt.write_to(BufWriter::new(file)).map_err(|e| WorkbenchError::Run(format!("{}: {e}", path.display())))
}

fn read_checkpoint(path: &Path) -> Result<lexcom_core::nn::Checkpoint> {
    let file = File::open(path).map_err(|e| WorkbenchError::Data(format!("{}: {e}", path.display())))?;
    lexcom_core::nn::Checkpoint::read_from(std::io::BufReader::new(file))
        .map_err(|e| WorkbenchError::Data(format!("{}: {e}", path.display())))
}

fn write_artifact(
    dir: &Path,
    m: &ExperimentManifest,
    spec: &PipelineSpec,
    vocab: &Vocabulary,
    a: &RunArtifact,
) -> Result<()> {
    create_dir(&dir.join("checkpoints"))?;
    let snapshot =
        RunConfigSnapshot { experiment: m.name.clone(), seed: a.seed, pipeline: spec.clone(), train: m.train };
    write_json(&dir.join("config.json"), &snapshot)?;
    write_csv(&dir.join("curves.csv"), &a.curves)?;
    write_csv(&dir.join("trials_after_sl.csv"), trial_rows(&a.eval_after_sl.trials, vocab)?)?;
    write_csv(&dir.join("trials.csv"), trial_rows(&a.eval_final.trials, vocab)?)?;
    write_csv(&dir.join("trials_sl_test.csv"), trial_rows(&a.sl_report.trials, vocab)?)?;
    write_productions(&dir.join("productions_after_sl.csv"), &a.productions_after_sl)?;
    write_productions(&dir.join("productions.csv"), &a.productions_final)?;
    let acc = AccuracySnapshot {
        sl_test: a.sl_report.subsets.clone(),
        eval_after_sl: a.eval_after_sl.subsets.clone(),
        eval_final: a.eval_final.subsets.clone(),
    };
    write_json(&dir.join("accuracy.json"), &acc)?;
    let ck = dir.join("checkpoints");
    write_checkpoint(&ck.join("speaker_after_sl.ckpt"), &a.after_sl.speaker.to_checkpoint(vocab, None))?;
    write_checkpoint(&ck.join("listener_after_sl.ckpt"), &a.after_sl.listener.to_checkpoint(vocab, None))?;
    write_checkpoint(&ck.join("speaker_final.ckpt"), &a.last.speaker.to_checkpoint(vocab, None))?;
    write_checkpoint(&ck.join("listener_final.ckpt"), &a.last.listener.to_checkpoint(vocab, None))?;
    Ok(())
}

/// Train and evaluate one pipeline for one seed, writing its run directory.
pub fn run_one(m: &ExperimentManifest, data: &PreparedData, spec: &PipelineSpec, seed: u64, out: &Path) -> Result<()> {
    let pipeline = spec.config();
    let empty = Vec::new();
    let rl_train = if spec.rl_context_aware.is_some() {
        data.rl
            .get(spec.rl_distribution.name())
            .ok_or_else(|| WorkbenchError::Data(format!("no RL set for {}", spec.rl_distribution.name())))?
    } else {
        &empty
    };
    let eval =
        data.eval.get(&spec.eval).ok_or_else(|| WorkbenchError::Data(format!("no eval set {}", spec.eval.name())))?;
    let pd = PipelineData { sl_train: &data.sl_train, sl_test: &data.sl_test, rl_train, eval };
    let artifact = run_pipeline(&pipeline, &m.train, &data.vocab, pd, seed)?;
    let dir = run_dir(out, &pipeline.name, seed);
    create_dir(&dir)?;
    write_artifact(&dir, m, spec, &data.vocab, &artifact)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub pipeline: String,
    pub seed: u64,
    pub error: String,
}

/// Selected (pipeline, seed) jobs in manifest order.
pub fn jobs(m: &ExperimentManifest, seed: Option<u64>) -> Vec<(&PipelineSpec, u64)> {
    let seeds: Vec<u64> = match seed {
        Some(s) => vec![s],
        None => m.seeds.clone(),
    };
    m.pipelines.iter().flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect()
}

/// Train every selected run in parallel; failures are isolated and returned.
pub fn train_runs(m: &ExperimentManifest, out: &Path, seed: Option<u64>) -> Result<Vec<RunFailure>> {
    let data = load_data(m, out)?;
    let results: Vec<Option<RunFailure>> = jobs(m, seed)
        .par_iter()
        .map(|&(spec, s)| {
            run_one(m, &data, spec, s, out).err().map(|e| RunFailure {
                pipeline: spec.config().name,
                seed: s,
                error: e.to_string(),
            })
        })
        .collect();
    Ok(results.into_iter().flatten().collect())
}

/// Re-evaluate the final checkpoints of one run on its evaluation set.
pub fn evaluate_run(m: &ExperimentManifest, out: &Path, spec: &PipelineSpec, seed: u64) -> Result<EvalReport> {
    let data = load_data(m, out)?;
    let dir = run_dir(out, &spec.config().name, seed).join("checkpoints");
    let (speaker, svocab, _) = Speaker::from_checkpoint(&read_checkpoint(&dir.join("speaker_final.ckpt"))?)?;
    let (listener, lvocab, _) = Listener::from_checkpoint(&read_checkpoint(&dir.join("listener_final.ckpt"))?)?;
    if svocab != data.vocab || lvocab != data.vocab {
        return Err(WorkbenchError::Data("checkpoint vocabulary differs from data/vocabulary.json".into()));
    }
    let eval = &data.eval[&spec.eval];
    let mut rng = stream_rng(seed, Stream::Eval);
    Ok(evaluate(&speaker, &listener, eval, None, m.train.sample_eval, &mut rng)?)
}

/// Write a re-evaluation next to the run: `reeval_trials.csv`, `reeval.json`.
pub fn write_reevaluation(
    m: &ExperimentManifest,
    out: &Path,
    spec: &PipelineSpec,
    seed: u64,
    dest: &Path,
) -> Result<()> {
    let data = load_data(m, out)?;
    let report = evaluate_run(m, out, spec, seed)?;
    create_dir(dest)?;
    write_csv(&dest.join("reeval_trials.csv"), trial_rows(&report.trials, &data.vocab)?)?;
    let records = productions(&report, &data.eval[&spec.eval], &data.vocab, seed)?;
    write_productions(&dest.join("reeval_productions.csv"), &records)?;
    write_json(&dest.join("reeval.json"), &report.subsets)
}

// ---------------------------------------------------------------------------
// Metrics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconMetrics {
    /// System informativeness per subset; a subset is absent when undefined.
    pub informativeness: BTreeMap<String, f64>,
    pub diversity: BTreeMap<String, usize>,
    /// Far and close diversity at the smaller of the two subset sizes.
    pub diversity_matched: BTreeMap<String, f64>,
    pub drift: Option<f64>,
    pub entropy: Option<f64>,
}

fn lexicon_metrics(records: &[ProductionRecord], lexicon: &[ProductionRecord]) -> LexiconMetrics {
    let table = InformativenessTable::from_records(records);
    let mut informativeness = BTreeMap::new();
    let mut diversity = BTreeMap::new();
    if let Ok((v, _)) = system_informativeness_with(&table, records) {
        informativeness.insert("O".to_string(), v);
    }
    diversity.insert("O".to_string(), lexical_diversity(records));
    for c in Condition::ALL {
        let sub: Vec<ProductionRecord> = records.iter().filter(|r| r.condition == c).cloned().collect();
        if let Ok((v, _)) = system_informativeness_with(&table, &sub) {
            informativeness.insert(subset_code(c).to_string(), v);
        }
    }
    for (c, n) in lexical_diversity_by_condition(records) {
        diversity.insert(subset_code(c).to_string(), n);
    }
    let far: Vec<ProductionRecord> = records.iter().filter(|r| r.condition == Condition::Far).cloned().collect();
    let close: Vec<ProductionRecord> = records.iter().filter(|r| r.condition == Condition::Close).cloned().collect();
    let mut diversity_matched = BTreeMap::new();
    if !far.is_empty() && !close.is_empty() {
        let m = far.len().min(close.len());
        diversity_matched.insert("F".to_string(), rarefied_diversity(&far, m));
        diversity_matched.insert("C".to_string(), rarefied_diversity(&close, m));
    }
    let values: Vec<f64> = table.values.values().copied().collect();
    LexiconMetrics {
        informativeness,
        diversity,
        diversity_matched,
        drift: semantic_drift(records, lexicon).ok(),
        entropy: informativeness_entropy(&values).ok(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub pipeline: String,
    pub seed: u64,
    pub eval: EvalSet,
    pub acc_spk: Option<f64>,
    pub acc_lst: Option<f64>,
    pub acc_comm_after_sl: f64,
    pub acc_comm_final: f64,
    pub acc_comm_final_by_subset: BTreeMap<String, f64>,
    /// Evaluation-set communication accuracy at RL epoch 0 and at the last RL epoch.
    pub rl_acc_comm_start: Option<f64>,
    pub rl_acc_comm_end: Option<f64>,
    pub after_sl: LexiconMetrics,
    #[serde(rename = "final")]
    pub last: LexiconMetrics,
}

fn rl_endpoints(curves: &[CurvePoint]) -> (Option<f64>, Option<f64>) {
    let rl: Vec<&CurvePoint> =
        curves.iter().filter(|c| c.phase == "rl" && c.split == "eval" && c.metric == "acc_comm").collect();
    let start = rl.iter().find(|c| c.epoch == 0).map(|c| c.value);
    let end = rl.iter().max_by_key(|c| c.epoch).map(|c| c.value);
    (start, end)
}

/// Compute and write `metrics.json` for one run from its files.
pub fn compute_run_metrics(
    out: &Path,
    lexicon: &[ProductionRecord],
    spec: &PipelineSpec,
    seed: u64,
) -> Result<RunMetrics> {
    let name = spec.config().name;
    let dir = run_dir(out, &name, seed);
    let acc: AccuracySnapshot = read_json(&dir.join("accuracy.json"))?;
    let curves: Vec<CurvePoint> = read_csv(&dir.join("curves.csv"))?;
    let after = read_productions(&dir.join("productions_after_sl.csv"))?;
    let last = read_productions(&dir.join("productions.csv"))?;
    let overall = |s: &[SubsetAccuracy]| s.iter().find(|a| a.subset == "O").cloned();
    let sl = overall(&acc.sl_test);
    let (rl_acc_comm_start, rl_acc_comm_end) = rl_endpoints(&curves);
    let metrics = RunMetrics {
        pipeline: name,
        seed,
        eval: spec.eval,
        acc_spk: sl.as_ref().and_then(|s| s.acc_spk),
        acc_lst: sl.as_ref().and_then(|s| s.acc_lst),
        acc_comm_after_sl: overall(&acc.eval_after_sl).map_or(f64::NAN, |s| s.acc_comm),
        acc_comm_final: overall(&acc.eval_final).map_or(f64::NAN, |s| s.acc_comm),
        acc_comm_final_by_subset: acc.eval_final.iter().map(|s| (s.subset.clone(), s.acc_comm)).collect(),
        rl_acc_comm_start,
        rl_acc_comm_end,
        after_sl: lexicon_metrics(&after, lexicon),
        last: lexicon_metrics(&last, lexicon),
    };
    write_json(&dir.join("metrics.json"), &metrics)?;
    Ok(metrics)
}

/// Metrics for every selected run; runs whose files are missing are reported as failures.
pub fn compute_metrics(m: &ExperimentManifest, out: &Path, seed: Option<u64>) -> Result<Vec<RunFailure>> {
    let data = load_data(m, out)?;
    let lexicon = data.lexicon()?;
    let mut failures = Vec::new();
    for (spec, s) in jobs(m, seed) {
        if let Err(e) = compute_run_metrics(out, &lexicon, spec, s) {
            failures.push(RunFailure { pipeline: spec.config().name, seed: s, error: e.to_string() });
        }
    }
    Ok(failures)
}

// ---------------------------------------------------------------------------
// Aggregation

/// Mean with a 95% interval: mean ± 1.96·SD/√n, SD with n−1 denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl MeanCi {
    pub fn of(values: &[f64]) -> Option<Self> {
        let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Some(Self { mean, half_width: 1.96 * sd / n.sqrt(), n: v.len() })
    }

    pub fn low(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn high(&self) -> f64 {
        self.mean + self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub row: String,
    /// `reference` for the reference lexicon, otherwise `pipeline`.
    pub kind: String,
    pub eval: EvalSet,
    pub seeds: usize,
    pub missing_seeds: Vec<u64>,
    pub acc_spk: Option<MeanCi>,
    pub acc_lst: Option<MeanCi>,
    pub acc_comm: Option<MeanCi>,
    pub informativeness: Option<MeanCi>,
    pub diversity: Option<MeanCi>,
    pub drift: Option<MeanCi>,
    pub entropy: Option<MeanCi>,
    pub slope: Option<SlopeFit>,
    pub slope_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableCsvRow {
    row: String,
    kind: String,
    eval: String,
    seeds: usize,
    missing_seeds: String,
    acc_spk: Option<f64>,
    acc_spk_ci: Option<f64>,
    acc_lst: Option<f64>,
    acc_lst_ci: Option<f64>,
    acc_comm: Option<f64>,
    acc_comm_ci: Option<f64>,
    informativeness: Option<f64>,
    informativeness_ci: Option<f64>,
    diversity: Option<f64>,
    diversity_ci: Option<f64>,
    drift: Option<f64>,
    drift_ci: Option<f64>,
    entropy: Option<f64>,
    entropy_ci: Option<f64>,
    beta: Option<f64>,
    beta_se: Option<f64>,
    beta_p: Option<f64>,
    beta_n: Option<usize>,
}

impl From<&TableRow> for TableCsvRow {
    fn from(r: &TableRow) -> Self {
        let m = |s: &Option<MeanCi>| s.map(|s| s.mean);
        let h = |s: &Option<MeanCi>| s.map(|s| s.half_width);
        Self {
            row: r.row.clone(),
            kind: r.kind.clone(),
            eval: r.eval.name().to_string(),
            seeds: r.seeds,
            missing_seeds: r.missing_seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
            acc_spk: m(&r.acc_spk),
            acc_spk_ci: h(&r.acc_spk),
            acc_lst: m(&r.acc_lst),
            acc_lst_ci: h(&r.acc_lst),
            acc_comm: m(&r.acc_comm),
            acc_comm_ci: h(&r.acc_comm),
            informativeness: m(&r.informativeness),
            informativeness_ci: h(&r.informativeness),
            diversity: m(&r.diversity),
            diversity_ci: h(&r.diversity),
            drift: m(&r.drift),
            drift_ci: h(&r.drift),
            entropy: m(&r.entropy),
            entropy_ci: h(&r.entropy),
            beta: r.slope.as_ref().map(|s| s.beta),
            beta_se: r.slope.as_ref().map(|s| s.std_error),
            beta_p: r.slope.as_ref().map(|s| s.p_value),
            beta_n: r.slope.as_ref().map(|s| s.n_obs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MetricsCsvRow {
    pipeline: String,
    seed: u64,
    eval: String,
    acc_spk: Option<f64>,
    acc_lst: Option<f64>,
    acc_comm_after_sl: f64,
    acc_comm_final: f64,
    rl_acc_comm_start: Option<f64>,
    rl_acc_comm_end: Option<f64>,
    informativeness_after_sl: Option<f64>,
    informativeness_final: Option<f64>,
    diversity_after_sl: usize,
    diversity_final: usize,
    drift_after_sl: Option<f64>,
    drift_final: Option<f64>,
    entropy_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CurveAggregateRow {
    pipeline: String,
    phase: String,
    epoch: usize,
    split: String,
    metric: String,
    n: usize,
    mean: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DiversityRow {
    pipeline: String,
    stage: String,
    subset: String,
    n: usize,
    mean: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeComparisons {
    /// Context-distribution pipelines, when there are at least two.
    pub distribution_table: Option<SlopeComparison>,
    /// Every pipeline whose final speaker is context-aware.
    pub context_aware: Option<SlopeComparison>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub table1: Vec<TableRow>,
    pub table2: Vec<TableRow>,
    pub slopes: SlopeComparisons,
    pub failures: Vec<RunFailure>,
}

/// Pipeline name, in the distribution table, final speaker context-aware, productions.
type SlopeGroup = (String, bool, bool, Vec<ProductionRecord>);

fn mean_of(metrics: &[RunMetrics], f: impl Fn(&RunMetrics) -> Option<f64>) -> Option<MeanCi> {
    MeanCi::of(&metrics.iter().filter_map(f).collect::<Vec<_>>())
}

fn pipeline_row(
    spec: &PipelineSpec,
    m: &ExperimentManifest,
    metrics: &[RunMetrics],
    records: &[ProductionRecord],
) -> TableRow {
    let present: Vec<u64> = metrics.iter().map(|r| r.seed).collect();
    let (slope, slope_error) = match fit_adaptation_slope(records) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    TableRow {
        row: spec.config().name,
        kind: "pipeline".into(),
        eval: spec.eval,
        seeds: metrics.len(),
        missing_seeds: m.seeds.iter().copied().filter(|s| !present.contains(s)).collect(),
        acc_spk: mean_of(metrics, |r| r.acc_spk),
        acc_lst: mean_of(metrics, |r| r.acc_lst),
        acc_comm: mean_of(metrics, |r| Some(r.acc_comm_final)),
        informativeness: mean_of(metrics, |r| r.last.informativeness.get("O").copied()),
        diversity: mean_of(metrics, |r| Some(r.last.diversity["O"] as f64)),
        drift: mean_of(metrics, |r| r.last.drift),
        entropy: mean_of(metrics, |r| r.last.entropy),
        slope,
        slope_error,
    }
}

fn reference_row(set: EvalSet, records: &[ProductionRecord], lexicon: &[ProductionRecord]) -> TableRow {
    let lm = lexicon_metrics(records, lexicon);
    let one = |v: Option<f64>| v.and_then(|x| MeanCi::of(&[x]));
    let (slope, slope_error) = match fit_single_lexicon_slope(&adaptation_observations(records)) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    TableRow {
        row: "reference".into(),
        kind: "reference".into(),
        eval: set,
        seeds: 1,
        missing_seeds: Vec::new(),
        acc_spk: None,
        acc_lst: None,
        acc_comm: None,
        informativeness: one(lm.informativeness.get("O").copied()),
        diversity: one(Some(lm.diversity["O"] as f64)),
        drift: None,
        entropy: one(lm.entropy),
        slope,
        slope_error,
    }
}

fn write_table(dir: &Path, stem: &str, rows: &[TableRow]) -> Result<()> {
    write_csv(&dir.join(format!("{stem}.csv")), rows.iter().map(TableCsvRow::from))?;
    write_json(&dir.join(format!("{stem}.json")), &rows)
}

/// Aggregate every run into tables, curves and slope comparisons under `aggregate/`.
pub fn report(m: &ExperimentManifest, out: &Path, earlier_failures: &[RunFailure]) -> Result<Aggregate> {
    let data = load_data(m, out)?;
    let lexicon = data.lexicon()?;
    let dir = out.join(AGGREGATE_DIR);
    create_dir(&dir)?;
    let mut failures: Vec<RunFailure> = earlier_failures.to_vec();
    let mut table1 = Vec::new();
    let mut table2 = Vec::new();
    let mut metrics_rows = Vec::new();
    let mut curve_rows = Vec::new();
    let mut diversity_rows = Vec::new();
    let mut slope_groups: Vec<SlopeGroup> = Vec::new();

    for set in m.eval_sets() {
        if let Some(records) = data.reference.get(&set) {
            let row = reference_row(set, records, &lexicon);
            let in_t2 = m.pipelines.iter().any(|p| p.eval == set && p.in_distribution_table());
            let in_t1 = m.pipelines.iter().any(|p| p.eval == set && !p.in_distribution_table());
            if in_t1 {
                table1.push(row.clone());
            }
            if in_t2 {
                table2.push(row);
            }
        }
    }

    for spec in &m.pipelines {
        let name = spec.config().name;
        let mut metrics = Vec::new();
        let mut records = Vec::new();
        let mut curves: BTreeMap<(String, usize, String, String), Vec<f64>> = BTreeMap::new();
        for &seed in &m.seeds {
            let rdir = run_dir(out, &name, seed);
            let loaded = (|| -> Result<(RunMetrics, Vec<ProductionRecord>, Vec<CurvePoint>)> {
                Ok((
                    read_json(&rdir.join("metrics.json"))?,
                    read_productions(&rdir.join("productions.csv"))?,
                    read_csv(&rdir.join("curves.csv"))?,
                ))
            })();
            match loaded {
                Ok((rm, recs, cs)) => {
                    for c in cs {
                        curves.entry((c.phase, c.epoch, c.split, c.metric)).or_default().push(c.value);
                    }
                    metrics.push(rm);
                    records.extend(recs);
                }
                Err(e) => {
                    if !failures.iter().any(|f| f.pipeline == name && f.seed == seed) {
                        failures.push(RunFailure { pipeline: name.clone(), seed, error: e.to_string() });
                    }
                }
            }
        }
        let mut keys: Vec<_> = curves.keys().cloned().collect();
        // Phase order: sl before rl; then epoch, split, metric.
        keys.sort_by(|a, b| (a.0 != "sl", a.1, &a.2, &a.3).cmp(&(b.0 != "sl", b.1, &b.2, &b.3)));
        for key in keys {
            if let Some(s) = MeanCi::of(&curves[&key]) {
                curve_rows.push(CurveAggregateRow {
                    pipeline: name.clone(),
                    phase: key.0.clone(),
                    epoch: key.1,
                    split: key.2.clone(),
                    metric: key.3.clone(),
                    n: s.n,
                    mean: s.mean,
                    ci_low: s.low(),
                    ci_high: s.high(),
                });
            }
        }
        for rm in &metrics {
            metrics_rows.push(MetricsCsvRow {
                pipeline: name.clone(),
                seed: rm.seed,
                eval: rm.eval.name().to_string(),
                acc_spk: rm.acc_spk,
                acc_lst: rm.acc_lst,
                acc_comm_after_sl: rm.acc_comm_after_sl,
                acc_comm_final: rm.acc_comm_final,
                rl_acc_comm_start: rm.rl_acc_comm_start,
                rl_acc_comm_end: rm.rl_acc_comm_end,
                informativeness_after_sl: rm.after_sl.informativeness.get("O").copied(),
                informativeness_final: rm.last.informativeness.get("O").copied(),
                diversity_after_sl: rm.after_sl.diversity["O"],
                diversity_final: rm.last.diversity["O"],
                drift_after_sl: rm.after_sl.drift,
                drift_final: rm.last.drift,
                entropy_final: rm.last.entropy,
            });
        }
        for stage in ["after_sl", "final", "final_matched"] {
            for subset in SUBSETS {
                let values: Vec<f64> = metrics
                    .iter()
                    .filter_map(|r| match stage {
                        "after_sl" => r.after_sl.diversity.get(subset).map(|&n| n as f64),
                        "final" => r.last.diversity.get(subset).map(|&n| n as f64),
                        _ => r.last.diversity_matched.get(subset).copied(),
                    })
                    .collect();
                if let Some(s) = MeanCi::of(&values) {
                    diversity_rows.push(DiversityRow {
                        pipeline: name.clone(),
                        stage: stage.into(),
                        subset: subset.into(),
                        n: s.n,
                        mean: s.mean,
                        ci_low: s.low(),
                        ci_high: s.high(),
                    });
                }
            }
        }
        let row = pipeline_row(spec, m, &metrics, &records);
        if spec.in_distribution_table() {
            table2.push(row);
        } else {
            table1.push(row);
        }
        slope_groups.push((name, spec.in_distribution_table(), spec.config().final_context_aware(), records));
    }

    let mut errors = Vec::new();
    let mut compare = |label: &str, pick: &dyn Fn(&SlopeGroup) -> bool| {
        let groups: Vec<(String, Vec<_>)> =
            slope_groups.iter().filter(|g| pick(g)).map(|g| (g.0.clone(), adaptation_observations(&g.3))).collect();
        if groups.len() < 2 {
            return None;
        }
        compare_slopes(&groups).map_err(|e| errors.push(format!("{label}: {e}"))).ok()
    };
    let distribution_table = compare("distribution_table", &|g| g.1);
    let context_aware = compare("context_aware", &|g| g.2);
    let slopes = SlopeComparisons { distribution_table, context_aware, errors };

    write_table(&dir, "table1", &table1)?;
    if !table2.is_empty() {
        write_table(&dir, "table2", &table2)?;
    }
    write_csv(&dir.join("metrics.csv"), &metrics_rows)?;
    write_csv(&dir.join("curves_aggregate.csv"), &curve_rows)?;
    write_csv(&dir.join("diversity.csv"), &diversity_rows)?;
    write_json(&dir.join("slope_comparison.json"), &slopes)?;
    failures.sort_by(|a, b| (&a.pipeline, a.seed).cmp(&(&b.pipeline, b.seed)));
    if failures.is_empty() {
        write_file(&dir.join("failures.csv"), "pipeline,seed,error\n")?;
    } else {
        write_csv(&dir.join("failures.csv"), &failures)?;
    }
    Ok(Aggregate { table1, table2, slopes, failures })
}

// ---------------------------------------------------------------------------
// Whole experiment

/// Write the manifest as used, without the resolved output directory, so the
/// copy is identical wherever the experiment is written.
pub fn write_manifest_copy(m: &ExperimentManifest, out: &Path) -> Result<()> {
    let mut copy = m.clone();
    copy.output_dir = PathBuf::from(".");
    if let Some(p) = &copy.data.human_csv {
        copy.data.human_csv = p.file_name().map(PathBuf::from);
    }
    write_file(&out.join("manifest.toml"), copy.to_toml()?)
}

/// Data, every run, metrics, aggregate tables and plots.
pub fn run_experiment(m: &ExperimentManifest, out: &Path) -> Result<Aggregate> {
    m.check_paths()?;
    create_dir(out)?;
    write_manifest_copy(m, out)?;
    prepare_data(m, out)?;
    let mut failures = train_runs(m, out, None)?;
    let metric_failures = compute_metrics(m, out, None)?;
    for f in metric_failures {
        if !failures.iter().any(|g| g.pipeline == f.pipeline && g.seed == f.seed) {
            failures.push(f);
        }
    }
    let aggregate = report(m, out, &failures)?;
    crate::plots::emit_plots(m, out)?;
    Ok(aggregate)
}
