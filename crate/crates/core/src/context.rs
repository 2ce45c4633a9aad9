//! Referential contexts: a target color plus two distractors, classified by
//! how perceptually close the distractors are to the target.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::{ciede2000, lab_euclidean, rgb_to_lab, LabColor, RgbColor};
use crate::error::ContextError;

pub const DEFAULT_THETA: f64 = 20.0;
pub const DEFAULT_JND: f64 = 5.0;
pub const DEFAULT_MAX_REJECTIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Far,
    Split,
    Close,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Far, Condition::Split, Condition::Close];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Far => "far",
            Condition::Split => "split",
            Condition::Close => "close",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "far" => Ok(Condition::Far),
            "split" => Ok(Condition::Split),
            "close" => Ok(Condition::Close),
            other => Err(format!("unknown condition {other:?}")),
        }
    }
}

/// One trial's world state. The target is always slot 0 of the speaker's view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorContext {
    pub id: u64,
    pub target: LabColor,
    pub distractors: [LabColor; 2],
    pub condition: Condition,
}

impl ColorContext {
    /// Colors in speaker order: target, distractor 1, distractor 2.
    pub fn colors(&self) -> [LabColor; 3] {
        [self.target, self.distractors[0], self.distractors[1]]
    }
}

/// Per-condition context counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConditionCounts {
    pub far: usize,
    pub split: usize,
    pub close: usize,
}

impl ConditionCounts {
    pub fn new(far: usize, split: usize, close: usize) -> Self {
        Self { far, split, close }
    }

    pub fn get(&self, c: Condition) -> usize {
        match c {
            Condition::Far => self.far,
            Condition::Split => self.split,
            Condition::Close => self.close,
        }
    }

    pub fn get_mut(&mut self, c: Condition) -> &mut usize {
        match c {
            Condition::Far => &mut self.far,
            Condition::Split => &mut self.split,
            Condition::Close => &mut self.close,
        }
    }

    pub fn total(&self) -> usize {
        self.far + self.split + self.close
    }

    /// Split `total` in these proportions, rounding by largest remainder.
    pub fn scaled_to(&self, total: usize) -> ConditionCounts {
        let sum = self.total();
        if sum == 0 {
            return ConditionCounts::default();
        }
        let mut out = ConditionCounts::default();
        let mut remainders = Vec::with_capacity(3);
        let mut assigned = 0;
        for c in Condition::ALL {
            let exact = self.get(c) as f64 * total as f64 / sum as f64;
            let floor = exact.floor() as usize;
            *out.get_mut(c) = floor;
            assigned += floor;
            remainders.push((exact - floor as f64, c));
        }
        remainders.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (_, c) in remainders.into_iter().take(total - assigned) {
            *out.get_mut(c) += 1;
        }
        out
    }
}

/// Distributions of context types used for communication training and testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContextDistribution {
    /// Proportions of the human corpus (9,309 far / 3,886 split / 2,239 close).
    #[serde(rename = "distH", alias = "disth")]
    DistH,
    #[serde(rename = "AllFar", alias = "allfar")]
    AllFar,
    #[serde(rename = "HalfHalf", alias = "halfhalf")]
    HalfHalf,
    #[serde(rename = "AllClose", alias = "allclose")]
    AllClose,
}

impl ContextDistribution {
    pub fn proportions(self) -> ConditionCounts {
        match self {
            ContextDistribution::DistH => ConditionCounts::new(9309, 3886, 2239),
            ContextDistribution::AllFar => ConditionCounts::new(1, 0, 0),
            ContextDistribution::HalfHalf => ConditionCounts::new(1, 0, 1),
            ContextDistribution::AllClose => ConditionCounts::new(0, 0, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ContextDistribution::DistH => "distH",
            ContextDistribution::AllFar => "AllFar",
            ContextDistribution::HalfHalf => "HalfHalf",
            ContextDistribution::AllClose => "AllClose",
        }
    }
}

impl FromStr for ContextDistribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "disth" => Ok(Self::DistH),
            "allfar" => Ok(Self::AllFar),
            "halfhalf" => Ok(Self::HalfHalf),
            "allclose" => Ok(Self::AllClose),
            _ => Err(format!("unknown context distribution {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    pub counts: ConditionCounts,
    pub theta: f64,
    pub jnd: f64,
    pub seed: u64,
    pub max_rejections: usize,
}

impl Default for GenerationSpec {
    fn default() -> Self {
        Self {
            counts: ConditionCounts::default(),
            theta: DEFAULT_THETA,
            jnd: DEFAULT_JND,
            seed: 0,
            max_rejections: DEFAULT_MAX_REJECTIONS,
        }
    }
}

impl GenerationSpec {
    pub fn with_counts(counts: ConditionCounts, seed: u64) -> Self {
        Self { counts, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ContextError> {
        if !(self.jnd > 0.0 && self.theta > self.jnd) {
            return Err(ContextError::InvalidSpec(format!(
                "need theta > jnd > 0 (theta={}, jnd={})",
                self.theta, self.jnd
            )));
        }
        if self.max_rejections == 0 {
            return Err(ContextError::InvalidSpec("max_rejections must be positive".into()));
        }
        Ok(())
    }
}

/// Classify a triplet by its pairwise CIEDE2000 distances. `None` means the
/// triplet satisfies no condition (or violates the JND floor).
pub fn classify_condition(t: LabColor, d1: LabColor, d2: LabColor, theta: f64, jnd: f64) -> Option<Condition> {
    classify_distances(ciede2000(t, d1), ciede2000(t, d2), ciede2000(d1, d2), theta, jnd)
}

/// Classification from precomputed distances (target-d1, target-d2, d1-d2).
pub fn classify_distances(td1: f64, td2: f64, dd: f64, theta: f64, jnd: f64) -> Option<Condition> {
    if td1 < jnd || td2 < jnd || dd < jnd {
        return None;
    }
    let near1 = td1 < theta;
    let near2 = td2 < theta;
    if near1 && near2 && dd < theta {
        Some(Condition::Close)
    } else if !near1 && !near2 && dd >= theta {
        Some(Condition::Far)
    } else if near1 != near2 {
        Some(Condition::Split)
    } else {
        None
    }
}

/// Distance from the target to its nearest distractor (Euclidean CIELAB).
pub fn context_ease(ctx: &ColorContext) -> f64 {
    lab_euclidean(ctx.target, ctx.distractors[0]).min(lab_euclidean(ctx.target, ctx.distractors[1]))
}

pub fn random_lab<R: Rng + ?Sized>(rng: &mut R) -> LabColor {
    rgb_to_lab(RgbColor { r: rng.random(), g: rng.random(), b: rng.random() })
}

/// Which side of theta a distractor must fall relative to one reference color.
#[derive(Clone, Copy)]
enum Band {
    Near,
    Far,
}

impl Band {
    fn admits(self, d: f64, theta: f64, jnd: f64) -> bool {
        match self {
            Band::Near => d >= jnd && d < theta,
            Band::Far => d >= theta,
        }
    }
}

/// Sample a context of the requested type around a fixed target.
///
/// Distractors are rejection-sampled uniformly in RGB one at a time, each
/// against the constraints it shares with the colors already placed. The
/// near distractor of a split context lands in either slot with equal
/// probability.
pub fn sample_context_for_target<R: Rng + ?Sized>(
    rng: &mut R,
    target: LabColor,
    condition: Condition,
    spec: &GenerationSpec,
) -> Result<ColorContext, ContextError> {
    let (theta, jnd) = (spec.theta, spec.jnd);
    // (band w.r.t. target, band w.r.t. the first distractor)
    let (first, second) = match condition {
        Condition::Close => (Band::Near, (Band::Near, Band::Near)),
        Condition::Far => (Band::Far, (Band::Far, Band::Far)),
        Condition::Split => (Band::Near, (Band::Far, Band::Far)),
    };
    let mut rejections = 0usize;
    let mut draw = |rng: &mut R, accept: &dyn Fn(LabColor) -> bool| -> Result<LabColor, ContextError> {
        loop {
            let c = random_lab(rng);
            if accept(c) {
                return Ok(c);
            }
            rejections += 1;
            if rejections >= spec.max_rejections {
                return Err(ContextError::SamplingExhausted { condition, rejections });
            }
        }
    };
    let d1 = draw(rng, &|c| first.admits(ciede2000(target, c), theta, jnd))?;
    let d2 = draw(rng, &|c| {
        let (to_target, to_d1) = second;
        let dd = ciede2000(d1, c);
        // Split leaves the distractor pair unconstrained beyond the JND floor.
        let pair_ok = match condition {
            Condition::Split => dd >= jnd,
            _ => to_d1.admits(dd, theta, jnd),
        };
        to_target.admits(ciede2000(target, c), theta, jnd) && pair_ok
    })?;
    let distractors = if condition == Condition::Split && rng.random::<bool>() { [d2, d1] } else { [d1, d2] };
    let ctx = ColorContext { id: 0, target, distractors, condition };
    debug_assert_eq!(classify_condition(target, distractors[0], distractors[1], theta, jnd), Some(condition));
    Ok(ctx)
}

/// Sample one context of the requested condition with a uniformly drawn target.
pub fn sample_context<R: Rng + ?Sized>(
    rng: &mut R,
    condition: Condition,
    spec: &GenerationSpec,
) -> Result<ColorContext, ContextError> {
    let target = random_lab(rng);
    sample_context_for_target(rng, target, condition, spec)
}

/// Fraction of independent uniform triplets that classify as `condition`.
pub fn estimate_acceptance_rate<R: Rng + ?Sized>(
    rng: &mut R,
    condition: Condition,
    spec: &GenerationSpec,
    draws: usize,
) -> f64 {
    let mut hits = 0usize;
    for _ in 0..draws {
        let (t, d1, d2) = (random_lab(rng), random_lab(rng), random_lab(rng));
        if classify_condition(t, d1, d2, spec.theta, spec.jnd) == Some(condition) {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

fn assign_ids(contexts: &mut [ColorContext]) {
    for (i, c) in contexts.iter_mut().enumerate() {
        c.id = i as u64;
    }
}

/// Exactly `spec.counts` contexts per condition, shuffled, with ids `0..n`.
pub fn generate_dataset(spec: &GenerationSpec) -> Result<Vec<ColorContext>, ContextError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.counts.total());
    for condition in Condition::ALL {
        for _ in 0..spec.counts.get(condition) {
            out.push(sample_context(&mut rng, condition, spec)?);
        }
    }
    out.shuffle(&mut rng);
    assign_ids(&mut out);
    Ok(out)
}

/// Contexts built around `n_targets` uniformly drawn targets; each target
/// appears once per entry of `conditions` (e.g. `[Far, Close]` gives the
/// balanced half-far/half-close test design).
pub fn generate_balanced_targets(
    spec: &GenerationSpec,
    n_targets: usize,
    conditions: &[Condition],
) -> Result<Vec<ColorContext>, ContextError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(n_targets * conditions.len());
    for _ in 0..n_targets {
        let target = random_lab(&mut rng);
        for &condition in conditions {
            out.push(sample_context_for_target(&mut rng, target, condition, spec)?);
        }
    }
    out.shuffle(&mut rng);
    assign_ids(&mut out);
    Ok(out)
}

/// Contexts around `n_targets` targets, `per_target` contexts each, with
/// conditions drawn independently in the given proportions.
pub fn generate_repeated_targets(
    spec: &GenerationSpec,
    n_targets: usize,
    per_target: usize,
    proportions: ConditionCounts,
) -> Result<Vec<ColorContext>, ContextError> {
    spec.validate()?;
    let total = proportions.total();
    if total == 0 {
        return Err(ContextError::InvalidSpec("proportions sum to zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(n_targets * per_target);
    for _ in 0..n_targets {
        let target = random_lab(&mut rng);
        for _ in 0..per_target {
            let mut pick = rng.random_range(0..total);
            let mut condition = Condition::Far;
            for c in Condition::ALL {
                let n = proportions.get(c);
                if pick < n {
                    condition = c;
                    break;
                }
                pick -= n;
            }
            out.push(sample_context_for_target(&mut rng, target, condition, spec)?);
        }
    }
    out.shuffle(&mut rng);
    assign_ids(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_from_distances() {
        assert_eq!(classify_distances(30.0, 30.0, 30.0, 20.0, 5.0), Some(Condition::Far));
        assert_eq!(classify_distances(10.0, 30.0, 25.0, 20.0, 5.0), Some(Condition::Split));
        assert_eq!(classify_distances(30.0, 10.0, 5.0, 20.0, 5.0), Some(Condition::Split));
        assert_eq!(classify_distances(10.0, 12.0, 15.0, 20.0, 5.0), Some(Condition::Close));
        assert_eq!(classify_distances(4.0, 30.0, 30.0, 20.0, 5.0), None);
        assert_eq!(classify_distances(30.0, 30.0, 4.0, 20.0, 5.0), None);
        // both near but distractors apart: no condition
        assert_eq!(classify_distances(10.0, 12.0, 21.0, 20.0, 5.0), None);
        // both far but distractors together: no condition
        assert_eq!(classify_distances(30.0, 30.0, 10.0, 20.0, 5.0), None);
    }

    #[test]
    fn ease_is_min_of_target_distances() {
        let ctx = ColorContext {
            id: 0,
            target: LabColor::new(50.0, 0.0, 0.0),
            distractors: [LabColor::new(50.0, 10.0, 0.0), LabColor::new(50.0, 0.0, 30.0)],
            condition: Condition::Split,
        };
        assert_eq!(context_ease(&ctx), 10.0);
        let tie = ColorContext { distractors: [ctx.distractors[0]; 2], ..ctx };
        assert_eq!(context_ease(&tie), 10.0);
    }

    #[test]
    fn distribution_counts() {
        let counts = ContextDistribution::DistH.proportions();
        assert_eq!(counts.total(), 15_434);
        let scaled = counts.scaled_to(2000);
        assert_eq!(scaled.total(), 2000);
        assert_eq!(ContextDistribution::HalfHalf.proportions().scaled_to(7), ConditionCounts::new(4, 0, 3));
    }

    #[test]
    fn invalid_spec() {
        let spec = GenerationSpec { theta: 4.0, ..GenerationSpec::default() };
        assert!(generate_dataset(&spec).is_err());
    }

    #[test]
    fn rejection_cap_reported() {
        let spec = GenerationSpec { max_rejections: 1, ..GenerationSpec::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = (0..20).find_map(|_| sample_context(&mut rng, Condition::Close, &spec).err());
        assert!(matches!(err, Some(ContextError::SamplingExhausted { condition: Condition::Close, .. })));
    }

    #[test]
    fn small_dataset_is_deterministic() {
        let spec = GenerationSpec::with_counts(ConditionCounts::new(1, 1, 1), 42);
        let a = generate_dataset(&spec).unwrap();
        let b = generate_dataset(&spec).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a, b);
        for c in &a {
            assert_eq!(classify_condition(c.target, c.distractors[0], c.distractors[1], 20.0, 5.0), Some(c.condition));
        }
    }
}
