//! Lexicon- and behavior-level measurements over production records.
//!
//! All functions here treat their input as the productions of a single
//! lexicon (one agent seed, or the human corpus). Multi-seed aggregation is
//! the caller's job; [`crate::stats`] handles the per-seed grouping needed for
//! slope fits.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::color::{lab_euclidean, LabColor};
use crate::context::Condition;
use crate::error::MetricsError;

/// One evaluated production: which word was used for which target, and how
/// hard the context was.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionRecord {
    pub seed: u64,
    pub context_id: u64,
    pub target: LabColor,
    pub word: String,
    pub ease: f64,
    pub condition: Condition,
}

/// The distinct chips a word was produced for, and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordDenotation {
    pub word: String,
    pub chips: Vec<LabColor>,
    pub prototype: LabColor,
}

impl WordDenotation {
    /// Deduplicates chips (bit-exact) and computes the prototype.
    pub fn new(word: impl Into<String>, chips: impl IntoIterator<Item = LabColor>) -> Option<Self> {
        let mut seen = BTreeSet::new();
        let chips: Vec<LabColor> = chips.into_iter().filter(|c| seen.insert(c.key())).collect();
        if chips.is_empty() {
            return None;
        }
        let n = chips.len() as f64;
        let sum = chips.iter().fold([0.0; 3], |acc, c| [acc[0] + c.l, acc[1] + c.a, acc[2] + c.b]);
        let prototype = LabColor::new(sum[0] / n, sum[1] / n, sum[2] / n);
        Some(Self { word: word.into(), chips, prototype })
    }
}

/// Denotation of every produced word, keyed by word.
pub fn denotations(records: &[ProductionRecord]) -> BTreeMap<String, WordDenotation> {
    let mut by_word: BTreeMap<&str, Vec<LabColor>> = BTreeMap::new();
    for r in records {
        by_word.entry(&r.word).or_default().push(r.target);
    }
    by_word.into_iter().filter_map(|(w, chips)| WordDenotation::new(w, chips).map(|d| (w.to_string(), d))).collect()
}

/// Mean Euclidean distance over all unordered pairs of distinct chips.
pub fn word_spread(d: &WordDenotation) -> Result<f64, MetricsError> {
    let n = d.chips.len();
    if n < 2 {
        return Err(MetricsError::TooFewChips(d.word.clone()));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += lab_euclidean(d.chips[i], d.chips[j]);
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

/// Reciprocal of the spread.
pub fn word_informativeness(d: &WordDenotation) -> Result<f64, MetricsError> {
    let spread = word_spread(d)?;
    if spread == 0.0 {
        return Err(MetricsError::ZeroSpread(d.word.clone()));
    }
    Ok(1.0 / spread)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedWord {
    pub word: String,
    pub reason: String,
    pub productions: usize,
}

/// Per-word informativeness for one lexicon, plus the words it could not be
/// computed for.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InformativenessTable {
    pub values: BTreeMap<String, f64>,
    pub excluded: Vec<ExcludedWord>,
}

impl InformativenessTable {
    pub fn from_records(records: &[ProductionRecord]) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in records {
            *counts.entry(&r.word).or_default() += 1;
        }
        let mut table = InformativenessTable::default();
        for (word, d) in denotations(records) {
            match word_informativeness(&d) {
                Ok(v) => {
                    table.values.insert(word, v);
                }
                Err(e) => table.excluded.push(ExcludedWord {
                    productions: counts[word.as_str()],
                    word,
                    reason: e.to_string(),
                }),
            }
        }
        table
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.values.get(word).copied()
    }
}

/// Usage-weighted mean informativeness over `subset`, with denotations taken
/// from `table`. Returns the mean and the number of records skipped because
/// their word has no defined informativeness.
pub fn system_informativeness_with(
    table: &InformativenessTable,
    subset: &[ProductionRecord],
) -> Result<(f64, usize), MetricsError> {
    let mut sum = 0.0;
    let mut used = 0usize;
    for r in subset {
        if let Some(v) = table.get(&r.word) {
            sum += v;
            used += 1;
        }
    }
    if used == 0 {
        return Err(MetricsError::EmptyRecords);
    }
    Ok((sum / used as f64, subset.len() - used))
}

/// Mean per-interaction word informativeness.
pub fn system_informativeness(records: &[ProductionRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let table = InformativenessTable::from_records(records);
    system_informativeness_with(&table, records).map(|(v, _)| v)
}

/// Number of distinct words produced.
pub fn lexical_diversity(records: &[ProductionRecord]) -> usize {
    records.iter().map(|r| r.word.as_str()).collect::<BTreeSet<_>>().len()
}

pub fn lexical_diversity_by_condition(records: &[ProductionRecord]) -> BTreeMap<Condition, usize> {
    let mut sets: BTreeMap<Condition, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        sets.entry(r.condition).or_default().insert(&r.word);
    }
    sets.into_iter().map(|(c, s)| (c, s.len())).collect()
}

/// Expected number of distinct words in a uniform draw of `m` records
/// without replacement: the sum over words of `1 - C(N - n_w, m) / C(N, m)`.
/// Puts subsets of different sizes on an equal footing.
pub fn rarefied_diversity(records: &[ProductionRecord], m: usize) -> f64 {
    let n = records.len();
    if m >= n {
        return lexical_diversity(records) as f64;
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.word.as_str()).or_default() += 1;
    }
    counts
        .values()
        .map(|&k| {
            if n - k < m {
                return 1.0;
            }
            // C(n-k, m) / C(n, m) = prod_{i<m} (n-k-i) / (n-i)
            let log_ratio: f64 = (0..m).map(|i| ((n - k - i) as f64).ln() - ((n - i) as f64).ln()).sum();
            1.0 - log_ratio.exp()
        })
        .sum()
}

/// Mean prototype distance over words shared by the agent and the reference
/// lexicon.
pub fn semantic_drift(agent: &[ProductionRecord], human: &[ProductionRecord]) -> Result<f64, MetricsError> {
    let agent = denotations(agent);
    let human = denotations(human);
    let distances: Vec<f64> =
        agent.iter().filter_map(|(w, d)| human.get(w).map(|h| lab_euclidean(d.prototype, h.prototype))).collect();
    if distances.is_empty() {
        return Err(MetricsError::EmptyIntersection);
    }
    Ok(distances.iter().sum::<f64>() / distances.len() as f64)
}

/// Shannon entropy (nats) of informativeness normalized into a distribution
/// over word types.
pub fn informativeness_entropy(values: &[f64]) -> Result<f64, MetricsError> {
    let total: f64 = values.iter().sum();
    if values.is_empty() || total <= 0.0 {
        return Err(MetricsError::EmptyRecords);
    }
    Ok(values.iter().map(|&v| v / total).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum())
}
