//! Supervised grounding, REINFORCE fine-tuning, evaluation and the pipeline
//! variants that chain them.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, Listener, Speaker, Vocabulary};
use crate::color::LabColor;
use crate::context::{context_ease, ColorContext, Condition, ContextDistribution};
use crate::error::{Error, Result};
use crate::metrics::ProductionRecord;
use crate::nn::loss::{entropy_grad, softmax_cross_entropy};
use crate::nn::{argmax, categorical_sample, log_softmax, AdamConfig, AdamState, Mode, Parameterized};

pub const DEFAULT_ENTROPY_COEF: f64 = 0.15;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_EPOCHS: usize = 30;

/// Independent RNG streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    SpeakerInit = 0,
    ListenerInit = 1,
    SlSpeaker = 2,
    SlListener = 3,
    Rl = 4,
    Eval = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Running mean of batch-mean rewards seen so far.
    Mean,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs_sl: usize,
    pub epochs_rl: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Learning rate for the RL phase; `None` reuses `adam.lr`.
    pub rl_lr: Option<f64>,
    pub entropy_coef: f64,
    pub baseline: Baseline,
    /// Sample the speaker's word at evaluation instead of taking the argmax.
    pub sample_eval: bool,
    pub agent: AgentConfig,
}

impl TrainConfig {
    pub fn rl_adam(&self) -> AdamConfig {
        AdamConfig { lr: self.rl_lr.unwrap_or(self.adam.lr), ..self.adam }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_sl: DEFAULT_EPOCHS,
            epochs_rl: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            adam: AdamConfig::default(),
            rl_lr: None,
            entropy_coef: DEFAULT_ENTROPY_COEF,
            baseline: Baseline::Mean,
            sample_eval: false,
            agent: AgentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub name: String,
    pub sl_context_aware: bool,
    pub rl_enabled: bool,
    /// Ignored when `rl_enabled` is false.
    pub rl_context_aware: bool,
    pub rl_distribution: ContextDistribution,
}

impl PipelineConfig {
    /// Name in the `SL±` / `SL±RL±` notation.
    pub fn standard(sl_context_aware: bool, rl: Option<bool>) -> Self {
        let sign = |b: bool| if b { '+' } else { '-' };
        let name = match rl {
            Some(r) => format!("SL{}RL{}", sign(sl_context_aware), sign(r)),
            None => format!("SL{}", sign(sl_context_aware)),
        };
        Self {
            name,
            sl_context_aware,
            rl_enabled: rl.is_some(),
            rl_context_aware: rl.unwrap_or(false),
            rl_distribution: ContextDistribution::DistH,
        }
    }

    /// SL−, SL+, SL−RL−, SL−RL+, SL+RL+.
    pub fn five_pipelines() -> Vec<Self> {
        vec![
            Self::standard(false, None),
            Self::standard(true, None),
            Self::standard(false, Some(false)),
            Self::standard(false, Some(true)),
            Self::standard(true, Some(true)),
        ]
    }

    /// Context awareness of the speaker after the last phase.
    pub fn final_context_aware(&self) -> bool {
        if self.rl_enabled {
            self.rl_context_aware
        } else {
            self.sl_context_aware
        }
    }
}

/// A context with the human (or oracle) word for its target, as a vocabulary index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledContext {
    pub context: ColorContext,
    pub word: usize,
}

/// Shuffled mini-batches covering `0..n`. A trailing single-row batch is
/// merged into its predecessor; a one-row dataset is padded by repetition so
/// that batch statistics stay defined.
pub fn batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    if n == 1 {
        return vec![vec![0, 0]];
    }
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size.max(2)).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(last);
    }
    out
}

/// Random presentation order of a context's colors; returns the candidates
/// and the target's position.
pub fn shuffle_candidates<R: Rng + ?Sized>(ctx: &ColorContext, rng: &mut R) -> ([LabColor; 3], usize) {
    let mut order = [0usize, 1, 2];
    order.shuffle(rng);
    let colors = ctx.colors();
    let candidates = order.map(|k| colors[k]);
    let target = order.iter().position(|&k| k == 0).expect("target present");
    (candidates, target)
}

fn check_words(words: impl Iterator<Item = usize>, size: usize) -> Result<()> {
    for index in words {
        if index >= size {
            return Err(Error::WordIndex { index, size });
        }
    }
    Ok(())
}

/// One epoch of cross-entropy training on human words; returns the mean batch loss.
pub fn sl_speaker_epoch<R: Rng + ?Sized>(
    speaker: &mut Speaker,
    adam: &mut AdamState,
    data: &[LabeledContext],
    batch_size: usize,
    rng: &mut R,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    check_words(data.iter().map(|d| d.word), speaker.vocab_size())?;
    speaker.set_mode(Mode::Train);
    let mut total = 0.0;
    let plan = batches(data.len(), batch_size, rng);
    for batch in &plan {
        let contexts: Vec<ColorContext> = batch.iter().map(|&i| data[i].context).collect();
        let targets: Vec<usize> = batch.iter().map(|&i| data[i].word).collect();
        let (logits, cache) = speaker.forward(&contexts, rng)?;
        let (loss, grad) = softmax_cross_entropy(&logits, &targets)?;
        speaker.backward(&cache, &grad)?;
        adam.step(speaker.params_mut())?;
        total += loss;
    }
    Ok(total / plan.len() as f64)
}

pub fn train_sl_speaker<R: Rng + ?Sized>(
    speaker: &mut Speaker,
    adam: &mut AdamState,
    data: &[LabeledContext],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    (0..config.epochs_sl).map(|_| sl_speaker_epoch(speaker, adam, data, config.batch_size, rng)).collect()
}

/// One epoch of listener training on (word, shuffled triplet); the triplet
/// order is redrawn every epoch.
pub fn sl_listener_epoch<R: Rng + ?Sized>(
    listener: &mut Listener,
    adam: &mut AdamState,
    data: &[LabeledContext],
    batch_size: usize,
    rng: &mut R,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    check_words(data.iter().map(|d| d.word), listener.vocab_size())?;
    listener.set_mode(Mode::Train);
    let presented: Vec<([LabColor; 3], usize)> = data.iter().map(|d| shuffle_candidates(&d.context, rng)).collect();
    let mut total = 0.0;
    let plan = batches(data.len(), batch_size, rng);
    for batch in &plan {
        let words: Vec<usize> = batch.iter().map(|&i| data[i].word).collect();
        let candidates: Vec<[LabColor; 3]> = batch.iter().map(|&i| presented[i].0).collect();
        let targets: Vec<usize> = batch.iter().map(|&i| presented[i].1).collect();
        let (scores, cache) = listener.forward(&words, &candidates, rng)?;
        let (loss, grad) = softmax_cross_entropy(&scores, &targets)?;
        listener.backward(&cache, &grad)?;
        adam.step(listener.params_mut())?;
        total += loss;
    }
    Ok(total / plan.len() as f64)
}

pub fn train_sl_listener<R: Rng + ?Sized>(
    listener: &mut Listener,
    adam: &mut AdamState,
    data: &[LabeledContext],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    (0..config.epochs_sl).map(|_| sl_listener_epoch(listener, adam, data, config.batch_size, rng)).collect()
}

/// Cumulative mean of batch-mean rewards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanBaseline {
    pub mean: f64,
    pub count: u64,
}

impl MeanBaseline {
    pub fn update(&mut self, batch_mean: f64) {
        self.count += 1;
        self.mean += (batch_mean - self.mean) / self.count as f64;
    }
}

/// Gradient of the speaker's REINFORCE-with-entropy loss w.r.t. its logits:
/// `-(1/B) (r - b) (onehot - p) - (lambda/B) dH/dz` per row.
pub fn reinforce_logit_grad(
    logits: &Array2<f64>,
    sampled: &[usize],
    advantages: &[f64],
    entropy_coef: f64,
) -> Array2<f64> {
    let log_probs = log_softmax(logits);
    let n = logits.nrows() as f64;
    let mut grad = entropy_grad(&log_probs) * (-entropy_coef / n);
    for (b, (&w, &adv)) in sampled.iter().zip(advantages).enumerate() {
        for (v, (g, lp)) in grad.row_mut(b).iter_mut().zip(log_probs.row(b).iter()).enumerate() {
            let onehot = if v == w { 1.0 } else { 0.0 };
            *g -= adv * (onehot - lp.exp()) / n;
        }
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlEpochStats {
    pub mean_reward: f64,
    /// Fraction of training trials where the listener's argmax hit the target.
    pub accuracy: f64,
}

/// One epoch of joint optimization: the speaker samples a word, the
/// listener's log-probability of the target is the reward.
pub fn rl_epoch<R: Rng + ?Sized>(
    speaker: &mut Speaker,
    listener: &mut Listener,
    adams: (&mut AdamState, &mut AdamState),
    baseline: &mut MeanBaseline,
    contexts: &[ColorContext],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<RlEpochStats> {
    if contexts.is_empty() {
        return Err(Error::EmptyData);
    }
    if speaker.vocab_size() != listener.vocab_size() {
        return Err(Error::VocabularyMismatch(format!(
            "speaker has {} words, listener {}",
            speaker.vocab_size(),
            listener.vocab_size()
        )));
    }
    speaker.set_mode(Mode::Train);
    listener.set_mode(Mode::Train);
    let (speaker_adam, listener_adam) = adams;
    let lambda = config.entropy_coef;
    let (mut reward_sum, mut hits, mut trials) = (0.0, 0usize, 0usize);
    for batch in batches(contexts.len(), config.batch_size, rng) {
        let ctxs: Vec<ColorContext> = batch.iter().map(|&i| contexts[i]).collect();
        let n = ctxs.len() as f64;
        let (logits, s_cache) = speaker.forward(&ctxs, rng)?;
        let words: Vec<usize> = logits.axis_iter(Axis(0)).map(|row| categorical_sample(rng, row).index).collect();
        let presented: Vec<([LabColor; 3], usize)> = ctxs.iter().map(|c| shuffle_candidates(c, rng)).collect();
        let candidates: Vec<[LabColor; 3]> = presented.iter().map(|p| p.0).collect();
        let targets: Vec<usize> = presented.iter().map(|p| p.1).collect();
        let (scores, l_cache) = listener.forward(&words, &candidates, rng)?;
        let log_probs = log_softmax(&scores);
        let rewards: Vec<f64> = targets.iter().enumerate().map(|(b, &t)| log_probs[[b, t]]).collect();
        let batch_mean = rewards.iter().sum::<f64>() / n;
        let b = match config.baseline {
            Baseline::Mean => baseline.mean,
            Baseline::None => 0.0,
        };
        let advantages: Vec<f64> = rewards.iter().map(|r| r - b).collect();
        baseline.update(batch_mean);

        let d_logits = reinforce_logit_grad(&logits, &words, &advantages, lambda);
        let (_, mut d_scores) = softmax_cross_entropy(&scores, &targets)?;
        d_scores -= &(entropy_grad(&log_probs) * (lambda / n));
        speaker.backward(&s_cache, &d_logits)?;
        listener.backward(&l_cache, &d_scores)?;
        speaker_adam.step(speaker.params_mut())?;
        listener_adam.step(listener.params_mut())?;

        reward_sum += rewards.iter().sum::<f64>();
        for (row, &t) in log_probs.axis_iter(Axis(0)).zip(&targets) {
            hits += usize::from(argmax(row) == t);
        }
        trials += ctxs.len();
    }
    Ok(RlEpochStats { mean_reward: reward_sum / trials as f64, accuracy: hits as f64 / trials as f64 })
}

pub fn train_rl<R: Rng + ?Sized>(
    speaker: &mut Speaker,
    listener: &mut Listener,
    contexts: &[ColorContext],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<RlEpochStats>> {
    let mut sa = AdamState::new(config.rl_adam());
    let mut la = AdamState::new(config.rl_adam());
    let mut baseline = MeanBaseline::default();
    (0..config.epochs_rl)
        .map(|_| rl_epoch(speaker, listener, (&mut sa, &mut la), &mut baseline, contexts, config, rng))
        .collect()
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub context_id: u64,
    pub condition: Condition,
    pub word: usize,
    pub target_position: usize,
    pub choice: usize,
    pub success: bool,
    /// Listener log-probability of the target given the produced word.
    pub reward: f64,
    pub human_word: Option<usize>,
    /// Listener's choice given the human word.
    pub human_word_choice: Option<usize>,
}

/// Accuracies over one subset: `O` (all), `F`, `S`, `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetAccuracy {
    pub subset: String,
    pub n: usize,
    pub acc_comm: f64,
    pub acc_spk: Option<f64>,
    pub acc_lst: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub subsets: Vec<SubsetAccuracy>,
    pub trials: Vec<TrialOutcome>,
}

impl EvalReport {
    pub fn subset(&self, name: &str) -> Option<&SubsetAccuracy> {
        self.subsets.iter().find(|s| s.subset == name)
    }

    pub fn overall(&self) -> &SubsetAccuracy {
        self.subset("O").expect("overall subset always present")
    }
}

fn summarize(name: &str, trials: &[&TrialOutcome]) -> Option<SubsetAccuracy> {
    if trials.is_empty() {
        return None;
    }
    let frac = |hits: usize, n: usize| hits as f64 / n as f64;
    let labeled: Vec<&&TrialOutcome> = trials.iter().filter(|t| t.human_word.is_some()).collect();
    let (acc_spk, acc_lst) = if labeled.is_empty() {
        (None, None)
    } else {
        let spk = labeled.iter().filter(|t| t.human_word == Some(t.word)).count();
        let lst = labeled.iter().filter(|t| t.human_word_choice == Some(t.target_position)).count();
        (Some(frac(spk, labeled.len())), Some(frac(lst, labeled.len())))
    };
    Some(SubsetAccuracy {
        subset: name.to_string(),
        n: trials.len(),
        acc_comm: frac(trials.iter().filter(|t| t.success).count(), trials.len()),
        acc_spk,
        acc_lst,
    })
}

/// Evaluate both agents in eval mode. `labels`, when given, holds the human
/// word index per context. Presentation order comes from `rng`.
pub fn evaluate<R: Rng + ?Sized>(
    speaker: &Speaker,
    listener: &Listener,
    contexts: &[ColorContext],
    labels: Option<&[usize]>,
    sample_speaker: bool,
    rng: &mut R,
) -> Result<EvalReport> {
    if let Some(l) = labels {
        if l.len() != contexts.len() {
            return Err(Error::VocabularyMismatch(format!("{} labels for {} contexts", l.len(), contexts.len())));
        }
        check_words(l.iter().copied(), listener.vocab_size())?;
    }
    if contexts.is_empty() {
        return Err(Error::EmptyData);
    }
    let presented: Vec<([LabColor; 3], usize)> = contexts.iter().map(|c| shuffle_candidates(c, rng)).collect();
    let words: Vec<usize> = if sample_speaker {
        speaker.sample(contexts, rng)?.into_iter().map(|s| s.index).collect()
    } else {
        speaker.name(contexts)?
    };
    let candidates: Vec<[LabColor; 3]> = presented.iter().map(|p| p.0).collect();
    let lp = listener.infer_log_probs(&words, &candidates)?;
    let human_choices = match labels {
        Some(l) => Some(listener.choose(l, &candidates)?),
        None => None,
    };
    let trials: Vec<TrialOutcome> = contexts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let target = presented[i].1;
            let choice = argmax(lp.row(i));
            TrialOutcome {
                context_id: c.id,
                condition: c.condition,
                word: words[i],
                target_position: target,
                choice,
                success: choice == target,
                reward: lp[[i, target]],
                human_word: labels.map(|l| l[i]),
                human_word_choice: human_choices.as_ref().map(|h| h[i]),
            }
        })
        .collect();
    let mut subsets = vec![summarize("O", &trials.iter().collect::<Vec<_>>()).expect("non-empty")];
    for cond in Condition::ALL {
        let sub: Vec<&TrialOutcome> = trials.iter().filter(|t| t.condition == cond).collect();
        let name = match cond {
            Condition::Far => "F",
            Condition::Split => "S",
            Condition::Close => "C",
        };
        subsets.extend(summarize(name, &sub));
    }
    Ok(EvalReport { subsets, trials })
}

/// Production records for metric computation.
pub fn productions(
    report: &EvalReport,
    contexts: &[ColorContext],
    vocab: &Vocabulary,
    seed: u64,
) -> Result<Vec<ProductionRecord>> {
    report
        .trials
        .iter()
        .zip(contexts)
        .map(|(t, c)| {
            Ok(ProductionRecord {
                seed,
                context_id: c.id,
                target: c.target,
                word: vocab.word(t.word)?.to_string(),
                ease: context_ease(c),
                condition: c.condition,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Pipelines

#[derive(Debug, Clone, Copy)]
pub struct PipelineData<'a> {
    pub sl_train: &'a [LabeledContext],
    /// Held-out labeled contexts for speaking/listening accuracy.
    pub sl_test: &'a [LabeledContext],
    pub rl_train: &'a [ColorContext],
    /// Contexts whose productions feed the lexicon metrics.
    pub eval: &'a [ColorContext],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub phase: String,
    pub epoch: usize,
    pub split: String,
    pub metric: String,
    pub value: f64,
}

fn point(phase: &str, epoch: usize, split: &str, metric: &str, value: f64) -> CurvePoint {
    CurvePoint { phase: phase.into(), epoch, split: split.into(), metric: metric.into(), value }
}

#[derive(Debug, Clone)]
pub struct AgentSnapshot {
    pub speaker: Speaker,
    pub listener: Listener,
}

#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub pipeline: PipelineConfig,
    pub seed: u64,
    pub curves: Vec<CurvePoint>,
    /// Labeled test evaluation after SL, SL awareness.
    pub sl_report: EvalReport,
    /// Evaluation of the metric contexts after SL, SL awareness.
    pub eval_after_sl: EvalReport,
    pub eval_final: EvalReport,
    pub productions_after_sl: Vec<ProductionRecord>,
    pub productions_final: Vec<ProductionRecord>,
    pub after_sl: AgentSnapshot,
    pub last: AgentSnapshot,
}

fn labels_of(data: &[LabeledContext]) -> (Vec<ColorContext>, Vec<usize>) {
    data.iter().map(|d| (d.context, d.word)).unzip()
}

fn comm_points(phase: &str, epoch: usize, split: &str, report: &EvalReport, out: &mut Vec<CurvePoint>) {
    for s in &report.subsets {
        let split = if s.subset == "O" { split.to_string() } else { format!("{split}:{}", s.subset) };
        out.push(point(phase, epoch, &split, "acc_comm", s.acc_comm));
        if let Some(v) = s.acc_spk {
            out.push(point(phase, epoch, &split, "acc_spk", v));
        }
        if let Some(v) = s.acc_lst {
            out.push(point(phase, epoch, &split, "acc_lst", v));
        }
    }
}

/// SL, then optionally RL, recording per-epoch curves and the evaluations
/// that the lexicon metrics need.
pub fn run_pipeline(
    pipeline: &PipelineConfig,
    config: &TrainConfig,
    vocab: &Vocabulary,
    data: PipelineData<'_>,
    seed: u64,
) -> Result<RunArtifact> {
    let v = vocab.len();
    let mut speaker =
        Speaker::new(&mut stream_rng(seed, Stream::SpeakerInit), v, config.agent, pipeline.sl_context_aware);
    let mut listener = Listener::new(&mut stream_rng(seed, Stream::ListenerInit), v, config.agent);
    let mut speaker_rng = stream_rng(seed, Stream::SlSpeaker);
    let mut listener_rng = stream_rng(seed, Stream::SlListener);
    let eval_rng = || stream_rng(seed, Stream::Eval);
    let (test_contexts, test_labels) = labels_of(data.sl_test);
    let labeled_eval = |s: &Speaker, l: &Listener| -> Result<EvalReport> {
        evaluate(s, l, &test_contexts, Some(&test_labels), config.sample_eval, &mut eval_rng())
    };

    let mut curves = Vec::new();
    let mut speaker_adam = AdamState::new(config.adam);
    let mut listener_adam = AdamState::new(config.adam);
    let mut report = labeled_eval(&speaker, &listener)?;
    comm_points("sl", 0, "test", &report, &mut curves);
    for epoch in 1..=config.epochs_sl {
        let ls = sl_speaker_epoch(&mut speaker, &mut speaker_adam, data.sl_train, config.batch_size, &mut speaker_rng)?;
        let ll =
            sl_listener_epoch(&mut listener, &mut listener_adam, data.sl_train, config.batch_size, &mut listener_rng)?;
        curves.push(point("sl", epoch, "train", "speaker_loss", ls));
        curves.push(point("sl", epoch, "train", "listener_loss", ll));
        report = labeled_eval(&speaker, &listener)?;
        comm_points("sl", epoch, "test", &report, &mut curves);
    }
    let sl_report = report;
    let eval_after_sl = evaluate(&speaker, &listener, data.eval, None, config.sample_eval, &mut eval_rng())?;
    let productions_after_sl = productions(&eval_after_sl, data.eval, vocab, seed)?;
    let after_sl = AgentSnapshot { speaker: speaker.clone(), listener: listener.clone() };

    if pipeline.rl_enabled {
        speaker.set_context_aware(pipeline.rl_context_aware);
        let mut rl_rng = stream_rng(seed, Stream::Rl);
        let mut sa = AdamState::new(config.rl_adam());
        let mut la = AdamState::new(config.rl_adam());
        let mut baseline = MeanBaseline::default();
        let e0 = evaluate(&speaker, &listener, data.eval, None, config.sample_eval, &mut eval_rng())?;
        comm_points("rl", 0, "eval", &e0, &mut curves);
        for epoch in 1..=config.epochs_rl {
            let stats = rl_epoch(
                &mut speaker,
                &mut listener,
                (&mut sa, &mut la),
                &mut baseline,
                data.rl_train,
                config,
                &mut rl_rng,
            )?;
            curves.push(point("rl", epoch, "train", "mean_reward", stats.mean_reward));
            curves.push(point("rl", epoch, "train", "acc_comm", stats.accuracy));
            let e = evaluate(&speaker, &listener, data.eval, None, config.sample_eval, &mut eval_rng())?;
            comm_points("rl", epoch, "eval", &e, &mut curves);
        }
    }
    speaker.set_mode(Mode::Eval);
    listener.set_mode(Mode::Eval);
    let eval_final = evaluate(&speaker, &listener, data.eval, None, config.sample_eval, &mut eval_rng())?;
    let productions_final = productions(&eval_final, data.eval, vocab, seed)?;
    Ok(RunArtifact {
        pipeline: pipeline.clone(),
        seed,
        curves,
        sl_report,
        eval_after_sl,
        eval_final,
        productions_after_sl,
        productions_final,
        after_sl,
        last: AgentSnapshot { speaker, listener },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_cover_and_avoid_singletons() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n in [1usize, 2, 3, 31, 32, 33, 65, 100] {
            let plan = batches(n, 32, &mut rng);
            assert!(plan.iter().all(|b| b.len() >= 2), "n={n}");
            let mut seen: Vec<usize> = plan.concat();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
        assert_eq!(batches(33, 32, &mut rng).len(), 1);
    }

    #[test]
    fn shuffled_candidates_keep_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lab = |l: f64| LabColor::new(l, 0.0, 0.0);
        let ctx =
            ColorContext { id: 0, target: lab(10.0), distractors: [lab(50.0), lab(90.0)], condition: Condition::Far };
        let mut positions = [0usize; 3];
        for _ in 0..300 {
            let (c, t) = shuffle_candidates(&ctx, &mut rng);
            assert_eq!(c[t], ctx.target);
            positions[t] += 1;
        }
        assert!(positions.iter().all(|&p| p > 60));
    }

    #[test]
    fn pipeline_names() {
        let names: Vec<String> = PipelineConfig::five_pipelines().into_iter().map(|p| p.name).collect();
        assert_eq!(names, ["SL-", "SL+", "SL-RL-", "SL-RL+", "SL+RL+"]);
    }

    #[test]
    fn mean_baseline_is_cumulative() {
        let mut b = MeanBaseline::default();
        for r in [-1.0, -2.0, -3.0] {
            b.update(r);
        }
        assert!((b.mean + 2.0).abs() < 1e-15);
    }
}
