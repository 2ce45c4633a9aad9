//! Speaker and listener agents.
//!
//! The speaker encodes target and distractors through separate feed-forward
//! blocks, fuses them in a joint block and classifies over the vocabulary.
//! The listener embeds the three candidates with one shared block and scores
//! each by a dot product with the word embedding.

use std::collections::HashMap;

use ndarray::{s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::color::LabColor;
use crate::context::ColorContext;
use crate::error::{Error, NnError, Result};
use crate::nn::checkpoint::{adam_from_records, adam_to_records, Checkpoint, TensorRecord};
use crate::nn::param::prefixed;
use crate::nn::{
    argmax, categorical_sample, log_softmax, AdamState, CategoricalSample, FnnBlock, FnnCache, Linear, Mode, Param,
    Parameterized, DEFAULT_DROPOUT, DEFAULT_HIDDEN,
};

/// Colors enter the networks as CIELAB divided by this factor.
pub const INPUT_SCALE: f64 = 100.0;

/// Closed, ordered set of single-symbol color names.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::default();
        for w in words {
            let w = w.into();
            if vocab.index.contains_key(&w) {
                return Err(Error::DuplicateWord(w));
            }
            vocab.index.insert(w.clone(), vocab.words.len());
            vocab.words.push(w);
        }
        Ok(vocab)
    }

    /// Sorted distinct words from a token stream.
    pub fn from_tokens<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> Self {
        let mut words: Vec<&str> = tokens.into_iter().collect();
        words.sort_unstable();
        words.dedup();
        Self::new(words).expect("deduplicated")
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Result<usize> {
        self.index.get(word).copied().ok_or_else(|| Error::UnknownWord(word.to_string()))
    }

    pub fn word(&self, index: usize) -> Result<&str> {
        self.words.get(index).map(String::as_str).ok_or(Error::WordIndex { index, size: self.words.len() })
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(words: Vec<String>) -> Result<Self> {
        Vocabulary::new(words)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self { hidden: DEFAULT_HIDDEN, dropout: DEFAULT_DROPOUT }
    }
}

fn color_rows(colors: impl ExactSizeIterator<Item = LabColor>) -> Array2<f64> {
    let n = colors.len();
    let mut out = Array2::zeros((n, 3));
    for (i, c) in colors.enumerate() {
        out[[i, 0]] = c.l / INPUT_SCALE;
        out[[i, 1]] = c.a / INPUT_SCALE;
        out[[i, 2]] = c.b / INPUT_SCALE;
    }
    out
}

fn block_records(prefix: &str, block: &FnnBlock) -> Vec<TensorRecord> {
    let mut out: Vec<TensorRecord> = prefixed(prefix, block.named_params())
        .into_iter()
        .map(|(n, p)| TensorRecord::from_array(n, &p.value))
        .collect();
    out.push(TensorRecord::from_array(format!("{prefix}.bn.running_mean"), &block.running_mean));
    out.push(TensorRecord::from_array(format!("{prefix}.bn.running_var"), &block.running_var));
    out
}

fn load_block(prefix: &str, block: &mut FnnBlock, ckpt: &Checkpoint) -> Result<()> {
    let fetch = |name: &str, like: &Array2<f64>| -> Result<Array2<f64>> {
        let a = ckpt.tensor(&format!("{prefix}.{name}"))?.to_array()?;
        if a.dim() != like.dim() {
            return Err(NnError::Checkpoint(format!(
                "{prefix}.{name}: shape {:?}, expected {:?}",
                a.dim(),
                like.dim()
            ))
            .into());
        }
        Ok(a)
    };
    block.linear.weight = Param::new(fetch("linear.weight", &block.linear.weight.value)?);
    block.linear.bias = Param::new(fetch("linear.bias", &block.linear.bias.value)?);
    block.bn_scale = Param::new(fetch("bn.scale", &block.bn_scale.value)?);
    block.bn_shift = Param::new(fetch("bn.shift", &block.bn_shift.value)?);
    block.running_mean = fetch("bn.running_mean", &block.running_mean)?;
    block.running_var = fetch("bn.running_var", &block.running_var)?;
    Ok(())
}

fn metadata_field<T: serde::de::DeserializeOwned>(ckpt: &Checkpoint, key: &str) -> Result<T> {
    let v = ckpt.metadata.get(key).cloned().ok_or_else(|| NnError::Checkpoint(format!("missing metadata {key:?}")))?;
    serde_json::from_value(v).map_err(|e| NnError::Checkpoint(format!("metadata {key:?}: {e}")).into())
}

// ---------------------------------------------------------------------------
// Speaker

#[derive(Debug, Clone, PartialEq)]
pub struct Speaker {
    /// Per-slot encoders: target, distractor 1, distractor 2.
    pub slots: [FnnBlock; 3],
    pub joint: FnnBlock,
    pub output: Linear,
    pub context_aware: bool,
    pub config: AgentConfig,
}

#[derive(Debug, Clone)]
pub struct SpeakerCache {
    slots: Vec<Option<FnnCache>>,
    joint: FnnCache,
    joint_out: Array2<f64>,
}

impl Speaker {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, vocab_size: usize, config: AgentConfig, context_aware: bool) -> Self {
        let h = config.hidden;
        let slots = [
            FnnBlock::new(rng, 3, h, config.dropout),
            FnnBlock::new(rng, 3, h, config.dropout),
            FnnBlock::new(rng, 3, h, config.dropout),
        ];
        let joint = FnnBlock::new(rng, 3 * h, h, config.dropout);
        let output = Linear::new(rng, h, vocab_size);
        Self { slots, joint, output, context_aware, config }
    }

    pub fn vocab_size(&self) -> usize {
        self.output.out_dim()
    }

    pub fn set_mode(&mut self, mode: Mode) {
        for b in &mut self.slots {
            b.set_mode(mode);
        }
        self.joint.set_mode(mode);
    }

    /// Switch context awareness. Turning it on for a speaker that was
    /// trained without context zeroes the joint weights reading the
    /// distractor slots, so the function is unchanged at the moment of the
    /// switch and distractor features enter only through further training.
    pub fn set_context_aware(&mut self, aware: bool) {
        if aware && !self.context_aware {
            let h = self.config.hidden;
            self.joint.linear.weight.value.slice_mut(s![h.., ..]).fill(0.0);
        }
        self.context_aware = aware;
    }

    fn slot_inputs(contexts: &[ColorContext]) -> [Array2<f64>; 3] {
        [0, 1, 2].map(|k| color_rows(contexts.iter().map(|c| c.colors()[k])))
    }

    /// Logits over the vocabulary for a batch, keeping what backward needs.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        contexts: &[ColorContext],
        rng: &mut R,
    ) -> Result<(Array2<f64>, SpeakerCache)> {
        let h = self.config.hidden;
        let b = contexts.len();
        let inputs = Self::slot_inputs(contexts);
        let mut concat = Array2::zeros((b, 3 * h));
        let mut slot_caches = Vec::with_capacity(3);
        for (k, x) in inputs.iter().enumerate() {
            if k > 0 && !self.context_aware {
                slot_caches.push(None);
                continue;
            }
            let (out, cache) = self.slots[k].forward(x, rng)?;
            concat.slice_mut(s![.., k * h..(k + 1) * h]).assign(&out);
            slot_caches.push(Some(cache));
        }
        let (joint_out, joint_cache) = self.joint.forward(&concat, rng)?;
        let logits = self.output.forward(&joint_out)?;
        Ok((logits, SpeakerCache { slots: slot_caches, joint: joint_cache, joint_out }))
    }

    pub fn backward(&mut self, cache: &SpeakerCache, dlogits: &Array2<f64>) -> Result<()> {
        let h = self.config.hidden;
        let d_joint_out = self.output.backward(&cache.joint_out, dlogits);
        let d_concat = self.joint.backward(&cache.joint, &d_joint_out)?;
        for (k, slot_cache) in cache.slots.iter().enumerate() {
            if let Some(c) = slot_cache {
                let d = d_concat.slice(s![.., k * h..(k + 1) * h]).to_owned();
                self.slots[k].backward(c, &d)?;
            }
        }
        Ok(())
    }

    /// Eval-mode logits; does not touch any state.
    pub fn infer_logits(&self, contexts: &[ColorContext]) -> Result<Array2<f64>> {
        let h = self.config.hidden;
        let inputs = Self::slot_inputs(contexts);
        let mut concat = Array2::zeros((contexts.len(), 3 * h));
        for (k, x) in inputs.iter().enumerate() {
            if k > 0 && !self.context_aware {
                continue;
            }
            concat.slice_mut(s![.., k * h..(k + 1) * h]).assign(&self.slots[k].infer(x)?);
        }
        let joint = self.joint.infer(&concat)?;
        Ok(self.output.forward(&joint)?)
    }

    /// Greedy word index per context.
    pub fn name(&self, contexts: &[ColorContext]) -> Result<Vec<usize>> {
        let logits = self.infer_logits(contexts)?;
        Ok(logits.axis_iter(Axis(0)).map(argmax).collect())
    }

    /// One categorical draw per context from eval-mode logits.
    pub fn sample<R: Rng + ?Sized>(&self, contexts: &[ColorContext], rng: &mut R) -> Result<Vec<CategoricalSample>> {
        let logits = self.infer_logits(contexts)?;
        Ok(logits.axis_iter(Axis(0)).map(|row| categorical_sample(rng, row)).collect())
    }

    /// Output word vectors, one row per vocabulary entry.
    pub fn word_embeddings(&self) -> Array2<f64> {
        self.output.weight.value.t().to_owned()
    }

    pub fn to_checkpoint(&self, vocab: &Vocabulary, adam: Option<&AdamState>) -> Checkpoint {
        let mut tensors = Vec::new();
        for (k, block) in self.slots.iter().enumerate() {
            tensors.extend(block_records(&format!("slot{k}"), block));
        }
        tensors.extend(block_records("joint", &self.joint));
        tensors.push(TensorRecord::from_array("output.weight", &self.output.weight.value));
        tensors.push(TensorRecord::from_array("output.bias", &self.output.bias.value));
        let mut metadata = serde_json::json!({
            "vocabulary": vocab,
            "config": self.config,
            "context_aware": self.context_aware,
        });
        if let Some(adam) = adam {
            let (meta, records) = adam_to_records("adam", adam);
            metadata["optimizer"] = meta;
            tensors.extend(records);
        }
        Checkpoint { kind: "speaker".into(), metadata, tensors }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Self, Vocabulary, Option<AdamState>)> {
        if ckpt.kind != "speaker" {
            return Err(NnError::Checkpoint(format!("expected speaker checkpoint, got {:?}", ckpt.kind)).into());
        }
        let vocab: Vocabulary = metadata_field(ckpt, "vocabulary")?;
        let config: AgentConfig = metadata_field(ckpt, "config")?;
        let context_aware: bool = metadata_field(ckpt, "context_aware")?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut speaker = Speaker::new(&mut rng, vocab.len(), config, context_aware);
        for (k, block) in speaker.slots.iter_mut().enumerate() {
            load_block(&format!("slot{k}"), block, ckpt)?;
        }
        load_block("joint", &mut speaker.joint, ckpt)?;
        speaker.output.weight = Param::new(ckpt.tensor("output.weight")?.to_array()?);
        speaker.output.bias = Param::new(ckpt.tensor("output.bias")?.to_array()?);
        if speaker.output.weight.value.dim() != (config.hidden, vocab.len()) {
            return Err(NnError::Checkpoint("output layer shape does not match vocabulary".into()).into());
        }
        let adam = match ckpt.metadata.get("optimizer") {
            Some(meta) => Some(adam_from_records("adam", meta, ckpt)?),
            None => None,
        };
        Ok((speaker, vocab, adam))
    }
}

impl Parameterized for Speaker {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = Vec::new();
        for (k, block) in self.slots.iter().enumerate() {
            out.extend(prefixed(&format!("slot{k}"), block.named_params()));
        }
        out.extend(prefixed("joint", self.joint.named_params()));
        out.extend(prefixed("output", self.output.named_params()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for block in &mut self.slots {
            out.extend(block.params_mut());
        }
        out.extend(self.joint.params_mut());
        out.extend(self.output.params_mut());
        out
    }
}

// ---------------------------------------------------------------------------
// Listener

#[derive(Debug, Clone, PartialEq)]
pub struct Listener {
    pub color_block: FnnBlock,
    /// One row per vocabulary word.
    pub embedding: Param,
    pub config: AgentConfig,
}

#[derive(Debug, Clone)]
pub struct ListenerCache {
    words: Vec<usize>,
    block: FnnCache,
    encoded: Array2<f64>,
}

impl Listener {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, vocab_size: usize, config: AgentConfig) -> Self {
        let bound = 1.0 / (config.hidden as f64).sqrt();
        Self {
            color_block: FnnBlock::new(rng, 3, config.hidden, config.dropout),
            embedding: Param::uniform(rng, vocab_size, config.hidden, bound),
            config,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.value.nrows()
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.color_block.set_mode(mode);
    }

    fn check_words(&self, words: &[usize]) -> Result<()> {
        let size = self.vocab_size();
        match words.iter().find(|&&w| w >= size) {
            Some(&index) => Err(Error::WordIndex { index, size }),
            None => Ok(()),
        }
    }

    fn candidate_rows(candidates: &[[LabColor; 3]]) -> Array2<f64> {
        color_rows(candidates.iter().flat_map(|c| c.iter().copied()).collect::<Vec<_>>().into_iter())
    }

    fn scores(&self, words: &[usize], encoded: &Array2<f64>) -> Array2<f64> {
        let mut scores = Array2::zeros((words.len(), 3));
        for (b, &w) in words.iter().enumerate() {
            let e = self.embedding.value.row(w);
            for k in 0..3 {
                let h = encoded.row(3 * b + k);
                scores[[b, k]] = e.iter().zip(h.iter()).map(|(x, y)| x * y).sum();
            }
        }
        scores
    }

    /// Candidate scores (pre-softmax) for a batch, keeping what backward needs.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        words: &[usize],
        candidates: &[[LabColor; 3]],
        rng: &mut R,
    ) -> Result<(Array2<f64>, ListenerCache)> {
        self.check_words(words)?;
        if words.len() != candidates.len() {
            return Err(NnError::Shape(format!("{} words for {} candidate sets", words.len(), candidates.len())).into());
        }
        let x = Self::candidate_rows(candidates);
        let (encoded, block) = self.color_block.forward(&x, rng)?;
        let scores = self.scores(words, &encoded);
        Ok((scores, ListenerCache { words: words.to_vec(), block, encoded }))
    }

    pub fn backward(&mut self, cache: &ListenerCache, dscores: &Array2<f64>) -> Result<()> {
        let mut d_encoded = Array2::zeros(cache.encoded.raw_dim());
        for (b, &w) in cache.words.iter().enumerate() {
            for k in 0..3 {
                let g = dscores[[b, k]];
                let row = 3 * b + k;
                d_encoded.row_mut(row).scaled_add(g, &self.embedding.value.row(w));
                self.embedding.grad.row_mut(w).scaled_add(g, &cache.encoded.row(row));
            }
        }
        self.color_block.backward(&cache.block, &d_encoded)?;
        Ok(())
    }

    /// Eval-mode log-probabilities over the three positions.
    pub fn infer_log_probs(&self, words: &[usize], candidates: &[[LabColor; 3]]) -> Result<Array2<f64>> {
        self.check_words(words)?;
        let encoded = self.color_block.infer(&Self::candidate_rows(candidates))?;
        Ok(log_softmax(&self.scores(words, &encoded)))
    }

    /// Chosen position per trial; ties go to the lowest index.
    pub fn choose(&self, words: &[usize], candidates: &[[LabColor; 3]]) -> Result<Vec<usize>> {
        let lp = self.infer_log_probs(words, candidates)?;
        Ok(lp.axis_iter(Axis(0)).map(argmax).collect())
    }

    pub fn to_checkpoint(&self, vocab: &Vocabulary, adam: Option<&AdamState>) -> Checkpoint {
        let mut tensors = block_records("color", &self.color_block);
        tensors.push(TensorRecord::from_array("embedding", &self.embedding.value));
        let mut metadata = serde_json::json!({ "vocabulary": vocab, "config": self.config });
        if let Some(adam) = adam {
            let (meta, records) = adam_to_records("adam", adam);
            metadata["optimizer"] = meta;
            tensors.extend(records);
        }
        Checkpoint { kind: "listener".into(), metadata, tensors }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Self, Vocabulary, Option<AdamState>)> {
        if ckpt.kind != "listener" {
            return Err(NnError::Checkpoint(format!("expected listener checkpoint, got {:?}", ckpt.kind)).into());
        }
        let vocab: Vocabulary = metadata_field(ckpt, "vocabulary")?;
        let config: AgentConfig = metadata_field(ckpt, "config")?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut listener = Listener::new(&mut rng, vocab.len(), config);
        load_block("color", &mut listener.color_block, ckpt)?;
        let emb = ckpt.tensor("embedding")?.to_array()?;
        if emb.dim() != (vocab.len(), config.hidden) {
            return Err(NnError::Checkpoint("embedding shape does not match vocabulary".into()).into());
        }
        listener.embedding = Param::new(emb);
        let adam = match ckpt.metadata.get("optimizer") {
            Some(meta) => Some(adam_from_records("adam", meta, ckpt)?),
            None => None,
        };
        Ok((listener, vocab, adam))
    }
}

impl Parameterized for Listener {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = prefixed("color", self.color_block.named_params());
        out.push(("embedding".into(), &self.embedding));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.color_block.params_mut();
        out.push(&mut self.embedding);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::Condition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(t: [f64; 3], d1: [f64; 3], d2: [f64; 3]) -> ColorContext {
        let lab = |v: [f64; 3]| LabColor::new(v[0], v[1], v[2]);
        ColorContext { id: 0, target: lab(t), distractors: [lab(d1), lab(d2)], condition: Condition::Far }
    }

    fn small() -> AgentConfig {
        AgentConfig { hidden: 6, dropout: 0.1 }
    }

    #[test]
    fn vocabulary_rejects_duplicates() {
        assert!(matches!(Vocabulary::new(["red", "red"]), Err(Error::DuplicateWord(_))));
        let v = Vocabulary::new(["red", "blue"]).unwrap();
        assert_eq!(v.index_of("blue").unwrap(), 1);
        assert!(v.index_of("teal").is_err());
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocabulary>(&json).unwrap(), v);
    }

    #[test]
    fn speaker_logit_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = Speaker::new(&mut rng, 7, small(), true);
        let contexts = vec![ctx([50.0, 0.0, 0.0], [20.0, 5.0, 5.0], [80.0, -30.0, 10.0]); 4];
        let (logits, _) = s.forward(&contexts, &mut rng).unwrap();
        assert_eq!(logits.dim(), (4, 7));
        assert_eq!(s.infer_logits(&contexts[..1]).unwrap().dim(), (1, 7));
    }

    #[test]
    fn context_unaware_ignores_distractors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = Speaker::new(&mut rng, 5, small(), false);
        let a = s.infer_logits(&[ctx([50.0, 10.0, 10.0], [0.0, 0.0, 0.0], [90.0, 0.0, 0.0])]).unwrap();
        let b = s.infer_logits(&[ctx([50.0, 10.0, 10.0], [30.0, 60.0, -40.0], [10.0, 0.0, 20.0])]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn enabling_context_preserves_the_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut s = Speaker::new(&mut rng, 5, small(), false);
        let contexts = vec![
            ctx([50.0, 10.0, 10.0], [0.0, 0.0, 0.0], [90.0, 0.0, 0.0]),
            ctx([20.0, -30.0, 5.0], [60.0, 60.0, -40.0], [10.0, 0.0, 20.0]),
        ];
        let before = s.infer_logits(&contexts).unwrap();
        s.set_context_aware(true);
        assert!(s.context_aware);
        let after = s.infer_logits(&contexts).unwrap();
        for (x, y) in before.iter().zip(after.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn listener_probabilities_normalized_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = Listener::new(&mut rng, 4, small());
        let a = LabColor::new(40.0, 20.0, -10.0);
        let b = LabColor::new(70.0, -5.0, 30.0);
        let lp = l.infer_log_probs(&[2], &[[a, b, b]]).unwrap();
        let total: f64 = lp.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(lp[[0, 1]], lp[[0, 2]]);
        assert!(l.infer_log_probs(&[4], &[[a, b, b]]).is_err());
    }

    #[test]
    fn listener_ties_choose_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = Listener::new(&mut rng, 3, small());
        let c = LabColor::new(40.0, 20.0, -10.0);
        assert_eq!(l.choose(&[0], &[[c, c, c]]).unwrap(), vec![0]);
    }

    #[test]
    fn checkpoints_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vocab = Vocabulary::new(["a", "b", "c"]).unwrap();
        let s = Speaker::new(&mut rng, 3, small(), true);
        let (s2, v2, adam) = Speaker::from_checkpoint(&s.to_checkpoint(&vocab, None)).unwrap();
        assert_eq!(v2, vocab);
        assert!(adam.is_none());
        assert_eq!(s2.named_params(), s.named_params());
        assert_eq!(s2.joint.running_var, s.joint.running_var);

        let l = Listener::new(&mut rng, 3, small());
        let mut adam = AdamState::new(Default::default());
        let mut l_train = l.clone();
        l_train.embedding.grad.fill(0.5);
        adam.step(l_train.params_mut()).unwrap();
        let (l2, _, adam2) = Listener::from_checkpoint(&l_train.to_checkpoint(&vocab, Some(&adam))).unwrap();
        assert_eq!(l2.named_params(), l_train.named_params());
        assert_eq!(adam2.unwrap(), adam);
    }
}
