//! Effect of context ease on word informativeness.
//!
//! The slope is estimated with seed and target-chip effects absorbed by
//! alternating within-group de-meaning (a two-way fixed-effects stand-in for
//! crossed random intercepts), then OLS on the residuals. Standard errors are
//! the larger of the seed-clustered and the conventional estimate. Condition comparisons add per-condition slope
//! terms and test them jointly with an F-test.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::MetricsError;
use crate::metrics::{InformativenessTable, ProductionRecord};

pub const WITHIN_OLS_METHOD: &str =
    "within-OLS approximation (seed and target effects absorbed; SE = max of seed-clustered and conventional)";
pub const SINGLE_LEXICON_METHOD: &str = "within-OLS approximation (target effects absorbed; conventional SE)";
pub const INTERACTION_F_METHOD: &str = "within-OLS interaction F-test (approximates likelihood-ratio test)";

const DEMEAN_TOL: f64 = 1e-13;
const DEMEAN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeObservation {
    pub seed: u64,
    pub target: [u64; 3],
    pub informativeness: f64,
    pub ease: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub beta: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub n_obs: usize,
    pub n_seeds: usize,
    pub n_targets: usize,
    pub mean_ease: f64,
    pub mean_informativeness: f64,
    pub method: String,
}

impl SlopeFit {
    /// Fitted line through the sample means.
    pub fn predict(&self, ease: f64) -> f64 {
        self.mean_informativeness + self.beta * (ease - self.mean_ease)
    }
}

/// Slope observations from production records: informativeness per seed's
/// own lexicon, keeping only targets produced at least twice within a seed.
pub fn adaptation_observations(records: &[ProductionRecord]) -> Vec<SlopeObservation> {
    let mut by_seed: BTreeMap<u64, Vec<ProductionRecord>> = BTreeMap::new();
    for r in records {
        by_seed.entry(r.seed).or_default().push(r.clone());
    }
    let mut out = Vec::new();
    for (seed, recs) in by_seed {
        let table = InformativenessTable::from_records(&recs);
        let mut counts: HashMap<[u64; 3], usize> = HashMap::new();
        for r in &recs {
            *counts.entry(r.target.key()).or_default() += 1;
        }
        for r in &recs {
            let key = r.target.key();
            if counts[&key] < 2 {
                continue;
            }
            if let Some(v) = table.get(&r.word) {
                out.push(SlopeObservation { seed, target: key, informativeness: v, ease: r.ease });
            }
        }
    }
    out
}

pub fn fit_adaptation_slope(records: &[ProductionRecord]) -> Result<SlopeFit, MetricsError> {
    fit_within_slope(&adaptation_observations(records))
}

fn codes<K: std::hash::Hash + Eq + Clone>(keys: impl Iterator<Item = K>) -> (Vec<usize>, usize) {
    let mut map: HashMap<K, usize> = HashMap::new();
    let codes = keys
        .map(|k| {
            let next = map.len();
            *map.entry(k).or_insert(next)
        })
        .collect();
    (codes, map.len())
}

/// Remove both sets of group means from every column by alternating projections.
fn demean(columns: &mut [Vec<f64>], groups: [(&[usize], usize); 2]) {
    for col in columns.iter_mut() {
        let scale = 1.0 + col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for _ in 0..DEMEAN_MAX_ITER {
            let mut largest = 0.0f64;
            for (codes, n) in groups {
                let mut sum = vec![0.0; n];
                let mut count = vec![0usize; n];
                for (&g, &v) in codes.iter().zip(col.iter()) {
                    sum[g] += v;
                    count[g] += 1;
                }
                let means: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
                largest = largest.max(means.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                for (&g, v) in codes.iter().zip(col.iter_mut()) {
                    *v -= means[g];
                }
            }
            if largest < DEMEAN_TOL * scale {
                break;
            }
        }
    }
}

struct OlsFit {
    beta: DVector<f64>,
    residuals: Vec<f64>,
    rss: f64,
    /// Cluster-robust covariance with the CR1 small-sample factor.
    covariance: DMatrix<f64>,
    /// Homoskedastic covariance, residual variance net of absorbed effects.
    conventional: DMatrix<f64>,
}

impl OlsFit {
    /// Variance of `w . beta`, the larger of the cluster-robust and
    /// conventional estimates. With a handful of clusters the robust estimate
    /// alone is too noisy to trust.
    fn variance(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        let robust = (w.transpose() * &self.covariance * &w)[(0, 0)];
        let plain = (w.transpose() * &self.conventional * &w)[(0, 0)];
        robust.max(plain).max(0.0)
    }
}

fn ols(
    y: &[f64],
    xs: &[Vec<f64>],
    clusters: &[usize],
    n_clusters: usize,
    absorbed: usize,
) -> Result<OlsFit, MetricsError> {
    let n = y.len();
    let k = xs.len();
    let x = DMatrix::from_fn(n, k, |i, j| xs[j][i]);
    let xtx = x.transpose() * &x;
    for j in 0..k {
        if xtx[(j, j)] <= 1e-20 {
            return Err(MetricsError::DegenerateVariance);
        }
    }
    let inv = xtx.clone().try_inverse().ok_or(MetricsError::DegenerateVariance)?;
    let beta = &inv * (x.transpose() * DVector::from_column_slice(y));
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - (0..k).map(|j| x[(i, j)] * beta[j]).sum::<f64>()).collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    let mut scores = DMatrix::<f64>::zeros(n_clusters, k);
    for i in 0..n {
        for j in 0..k {
            scores[(clusters[i], j)] += x[(i, j)] * residuals[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let g = n_clusters as f64;
    let factor = if n_clusters > 1 && n > k { g / (g - 1.0) * (n as f64 - 1.0) / (n - k) as f64 } else { 1.0 };
    let covariance = &inv * meat * &inv * factor;
    let dof = n.saturating_sub(k + absorbed).max(1);
    let conventional = &inv * (rss / dof as f64);
    Ok(OlsFit { beta, residuals, rss, covariance, conventional })
}

fn two_sided_t(estimate: f64, se: f64, df: f64) -> f64 {
    if se == 0.0 || !se.is_finite() {
        return if estimate == 0.0 { 1.0 } else { 0.0 };
    }
    let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - t.cdf((estimate / se).abs()))).clamp(0.0, 1.0)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Slope of informativeness on ease with seed and target effects absorbed.
pub fn fit_within_slope(obs: &[SlopeObservation]) -> Result<SlopeFit, MetricsError> {
    if obs.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let (seeds, n_seeds) = codes(obs.iter().map(|o| o.seed));
    if n_seeds < 2 {
        return Err(MetricsError::TooFewSeeds(n_seeds));
    }
    let (targets, n_targets) = codes(obs.iter().map(|o| o.target));
    let mut cols =
        vec![obs.iter().map(|o| o.informativeness).collect::<Vec<_>>(), obs.iter().map(|o| o.ease).collect::<Vec<_>>()];
    demean(&mut cols, [(&seeds, n_seeds), (&targets, n_targets)]);
    let [y, x]: [Vec<f64>; 2] = cols.try_into().expect("two columns");
    let fit = ols(&y, &[x], &seeds, n_seeds, n_seeds + n_targets - 1)?;
    let beta = fit.beta[0];
    let std_error = fit.variance(&[1.0]).sqrt();
    Ok(SlopeFit {
        beta,
        std_error,
        p_value: two_sided_t(beta, std_error, (n_seeds - 1) as f64),
        n_obs: obs.len(),
        n_seeds,
        n_targets,
        mean_ease: mean(obs.iter().map(|o| o.ease)),
        mean_informativeness: mean(obs.iter().map(|o| o.informativeness)),
        method: WITHIN_OLS_METHOD.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSlope {
    pub label: String,
    pub beta: f64,
    pub std_error: f64,
    pub p_value: f64,
}

/// Difference `beta(to) - beta(from)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeContrast {
    pub from: String,
    pub to: String,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
}

/// Slope for one lexicon (a reference speaker with no seeds): target effects
/// absorbed, conventional standard error, every observation from seed 0.
pub fn fit_single_lexicon_slope(obs: &[SlopeObservation]) -> Result<SlopeFit, MetricsError> {
    if obs.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let (targets, n_targets) = codes(obs.iter().map(|o| o.target));
    let single = vec![0usize; obs.len()];
    let mut cols =
        vec![obs.iter().map(|o| o.informativeness).collect::<Vec<_>>(), obs.iter().map(|o| o.ease).collect::<Vec<_>>()];
    demean(&mut cols, [(&single, 1), (&targets, n_targets)]);
    let [y, x]: [Vec<f64>; 2] = cols.try_into().expect("two columns");
    let fit = ols(&y, &[x], &single, 1, n_targets)?;
    let beta = fit.beta[0];
    let std_error = fit.variance(&[1.0]).sqrt();
    let df = obs.len().saturating_sub(1 + n_targets).max(1);
    Ok(SlopeFit {
        beta,
        std_error,
        p_value: two_sided_t(beta, std_error, df as f64),
        n_obs: obs.len(),
        n_seeds: 1,
        n_targets,
        mean_ease: mean(obs.iter().map(|o| o.ease)),
        mean_informativeness: mean(obs.iter().map(|o| o.informativeness)),
        method: SINGLE_LEXICON_METHOD.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeComparison {
    pub slopes: Vec<ConditionSlope>,
    pub f_statistic: f64,
    pub df_numerator: usize,
    pub df_denominator: usize,
    pub p_value: f64,
    pub contrasts: Vec<SlopeContrast>,
    pub method: String,
}

/// Joint test that the ease slope differs across conditions, plus all
/// pairwise slope contrasts.
pub fn compare_slopes(groups: &[(String, Vec<SlopeObservation>)]) -> Result<SlopeComparison, MetricsError> {
    let c = groups.len();
    if c < 2 {
        return Err(MetricsError::SingletonCondition);
    }
    let obs: Vec<(usize, &SlopeObservation)> =
        groups.iter().enumerate().flat_map(|(g, (_, o))| o.iter().map(move |x| (g, x))).collect();
    if obs.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let n = obs.len();
    let (clusters, n_clusters) = codes(obs.iter().map(|(g, o)| (*g, o.seed)));
    let (targets, n_targets) = codes(obs.iter().map(|(_, o)| o.target));
    if n_clusters < 2 {
        return Err(MetricsError::TooFewSeeds(n_clusters));
    }

    // Columns: y, pooled ease, then ease interacted with each condition.
    let mut cols = Vec::with_capacity(c + 2);
    cols.push(obs.iter().map(|(_, o)| o.informativeness).collect::<Vec<_>>());
    cols.push(obs.iter().map(|(_, o)| o.ease).collect::<Vec<_>>());
    for k in 0..c {
        cols.push(obs.iter().map(|(g, o)| if *g == k { o.ease } else { 0.0 }).collect());
    }
    demean(&mut cols, [(&clusters, n_clusters), (&targets, n_targets)]);
    let y = cols[0].clone();
    let absorbed = n_clusters + n_targets - 1;
    let restricted = ols(&y, &cols[1..2], &clusters, n_clusters, absorbed)?;
    let full = ols(&y, &cols[2..], &clusters, n_clusters, absorbed)?;
    debug_assert_eq!(full.residuals.len(), n);

    let df_num = c - 1;
    let df_den = n.saturating_sub(c + absorbed).max(1);
    let f_statistic = ((restricted.rss - full.rss).max(0.0) / df_num as f64) / (full.rss / df_den as f64);
    let p_value = if f_statistic.is_finite() {
        let f = FisherSnedecor::new(df_num as f64, df_den as f64).expect("positive degrees of freedom");
        (1.0 - f.cdf(f_statistic)).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let t_df = (n_clusters - 1) as f64;
    let slopes = groups
        .iter()
        .enumerate()
        .map(|(k, (label, _))| {
            let mut w = vec![0.0; c];
            w[k] = 1.0;
            let se = full.variance(&w).sqrt();
            ConditionSlope {
                label: label.clone(),
                beta: full.beta[k],
                std_error: se,
                p_value: two_sided_t(full.beta[k], se, t_df),
            }
        })
        .collect();
    let mut contrasts = Vec::new();
    for a in 0..c {
        for b in a + 1..c {
            let estimate = full.beta[b] - full.beta[a];
            let mut w = vec![0.0; c];
            w[a] = -1.0;
            w[b] = 1.0;
            let se = full.variance(&w).sqrt();
            contrasts.push(SlopeContrast {
                from: groups[a].0.clone(),
                to: groups[b].0.clone(),
                estimate,
                std_error: se,
                p_value: two_sided_t(estimate, se, t_df),
            });
        }
    }
    Ok(SlopeComparison {
        slopes,
        f_statistic,
        df_numerator: df_num,
        df_denominator: df_den,
        p_value,
        contrasts,
        method: INTERACTION_F_METHOD.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(beta: f64, seeds: u64, per_seed: usize, noise: f64, rng: &mut ChaCha8Rng) -> Vec<SlopeObservation> {
        let targets: Vec<f64> = (0..50).map(|_| rng.random_range(-0.05..0.05)).collect();
        let mut out = Vec::new();
        for seed in 0..seeds {
            let seed_offset = rng.random_range(-0.1..0.1);
            for _ in 0..per_seed {
                let t = rng.random_range(0..targets.len());
                let ease = rng.random_range(5.0..80.0);
                let e: f64 = rng.random_range(-1.0..1.0) * noise;
                out.push(SlopeObservation {
                    seed,
                    target: [t as u64, 0, 0],
                    informativeness: 0.5 + beta * ease + seed_offset + targets[t] + e,
                    ease,
                });
            }
        }
        out
    }

    #[test]
    fn constant_informativeness_gives_zero_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut obs = synthetic(0.0, 3, 100, 0.0, &mut rng);
        for o in &mut obs {
            o.informativeness = 0.25;
        }
        let fit = fit_within_slope(&obs).unwrap();
        assert!(fit.beta.abs() < 1e-12);
        assert!(fit.p_value > 0.5);
    }

    #[test]
    fn recovers_planted_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let obs = synthetic(-0.005, 5, 400, 0.02, &mut rng);
        let fit = fit_within_slope(&obs).unwrap();
        assert!((fit.beta + 0.005).abs() < 2.0 * fit.std_error, "{fit:?}");
        assert!(fit.p_value < 0.001);
        assert_eq!(fit.method, WITHIN_OLS_METHOD);
    }

    #[test]
    fn single_lexicon_recovers_planted_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let obs: Vec<SlopeObservation> =
            synthetic(-0.004, 1, 3000, 0.01, &mut rng).into_iter().map(|o| SlopeObservation { seed: 0, ..o }).collect();
        let fit = fit_single_lexicon_slope(&obs).unwrap();
        assert!((fit.beta + 0.004).abs() < 3.0 * fit.std_error, "{fit:?}");
        assert!(fit.p_value < 0.05);
        assert!(fit_single_lexicon_slope(&[]).is_err());
    }

    #[test]
    fn degenerate_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut obs = synthetic(-0.005, 3, 50, 0.02, &mut rng);
        assert!(matches!(
            fit_within_slope(&obs[..10].iter().map(|o| SlopeObservation { seed: 0, ..*o }).collect::<Vec<_>>()),
            Err(MetricsError::TooFewSeeds(1))
        ));
        for o in &mut obs {
            o.ease = 12.0;
        }
        assert_eq!(fit_within_slope(&obs), Err(MetricsError::DegenerateVariance));
        assert_eq!(compare_slopes(&[("a".into(), obs)]), Err(MetricsError::SingletonCondition));
    }

    #[test]
    fn identical_slopes_not_significant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = synthetic(-0.004, 5, 300, 0.02, &mut rng);
        let b = synthetic(-0.004, 5, 300, 0.02, &mut rng);
        let cmp = compare_slopes(&[("a".into(), a), ("b".into(), b)]).unwrap();
        assert!(cmp.p_value > 0.01, "{cmp:?}");
    }

    #[test]
    fn different_slopes_detected_with_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let far = synthetic(-0.003, 5, 500, 0.02, &mut rng);
        let close = synthetic(-0.005, 5, 500, 0.02, &mut rng);
        let cmp = compare_slopes(&[("AllFar".into(), far), ("AllClose".into(), close)]).unwrap();
        assert!(cmp.p_value < 0.05);
        let c = &cmp.contrasts[0];
        assert_eq!((c.from.as_str(), c.to.as_str()), ("AllFar", "AllClose"));
        assert!(c.estimate < 0.0 && c.p_value < 0.05, "{c:?}");
        assert!((c.estimate + 0.002).abs() < 3.0 * c.std_error);
    }
}
