use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use crate::error::NnError;

/// Row-wise log-softmax via log-sum-exp.
pub fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let lse = log_sum_exp(row.view());
        row.mapv_inplace(|v| v - lse);
    }
    out
}

pub fn log_sum_exp(row: ArrayView1<f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    log_softmax(logits).mapv(f64::exp)
}

/// Mean cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Array2<f64>, targets: &[usize]) -> Result<(f64, Array2<f64>), NnError> {
    let (batch, classes) = logits.dim();
    if targets.len() != batch {
        return Err(NnError::Shape(format!("{} targets for {} rows", targets.len(), batch)));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= classes) {
        return Err(NnError::TargetOutOfRange { target: t, classes });
    }
    let logp = log_softmax(logits);
    let mut grad = logp.mapv(f64::exp);
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        loss -= logp[[i, t]];
        grad[[i, t]] -= 1.0;
    }
    let n = batch as f64;
    grad /= n;
    Ok((loss / n, grad))
}

/// Shannon entropy (nats) of each row's softmax distribution.
pub fn entropy_rows(log_probs: &Array2<f64>) -> Array1<f64> {
    log_probs.map_axis(Axis(1), |row| row.iter().map(|&lp| if lp.is_finite() { -lp.exp() * lp } else { 0.0 }).sum())
}

/// Gradient of each row's entropy w.r.t. its logits: `-p (log p + H)`.
pub fn entropy_grad(log_probs: &Array2<f64>) -> Array2<f64> {
    let h = entropy_rows(log_probs);
    let mut out = log_probs.clone();
    for (mut row, &hi) in out.axis_iter_mut(Axis(0)).zip(h.iter()) {
        row.mapv_inplace(|lp| {
            let p = lp.exp();
            if p == 0.0 {
                0.0
            } else {
                -p * (lp + hi)
            }
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoricalSample {
    pub index: usize,
    pub log_prob: f64,
    pub entropy: f64,
}

/// Draw from `softmax(logits)`; returns the index, its log-probability and
/// the distribution's entropy in nats.
pub fn categorical_sample<R: Rng + ?Sized>(rng: &mut R, logits: ArrayView1<f64>) -> CategoricalSample {
    let lse = log_sum_exp(logits);
    let log_probs: Vec<f64> = logits.iter().map(|&v| v - lse).collect();
    let entropy = log_probs.iter().map(|&lp| if lp.is_finite() { -lp.exp() * lp } else { 0.0 }).sum();
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut index = log_probs.len() - 1;
    for (i, &lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            index = i;
            break;
        }
    }
    // Rounding can leave u past the accumulated mass; fall back to the last
    // index with nonzero probability.
    if log_probs[index].exp() == 0.0 {
        index = log_probs.iter().rposition(|lp| lp.exp() > 0.0).unwrap_or(0);
    }
    CategoricalSample { index, log_prob: log_probs[index], entropy }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_give_ln_k() {
        let (loss, _) = softmax_cross_entropy(&array![[0.3, 0.3, 0.3]], &[1]).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn peaked_logits_give_zero_loss() {
        let (loss, grad) = softmax_cross_entropy(&array![[0.0, 60.0, 0.0]], &[1]).unwrap();
        assert!(loss < 1e-20);
        assert!(grad.iter().all(|g| g.abs() < 1e-20));
    }

    #[test]
    fn out_of_range_target() {
        let err = softmax_cross_entropy(&array![[0.0, 1.0]], &[2]).unwrap_err();
        assert_eq!(err, NnError::TargetOutOfRange { target: 2, classes: 2 });
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax(&array![[1000.0, -1000.0, 3.0], [0.1, 0.2, 0.3]]);
        for row in p.axis_iter(Axis(0)) {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let logits = array![-1e9, 0.0, -2e9];
        for _ in 0..100 {
            let s = categorical_sample(&mut rng, logits.view());
            assert_eq!(s.index, 1);
            assert_eq!(s.log_prob, 0.0);
            assert!(s.entropy.abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_sample_entropy_and_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let logits = array![0.5, 0.5, 0.5, 0.5];
        let n = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let s = categorical_sample(&mut rng, logits.view());
            assert!((s.entropy - 4f64.ln()).abs() < 1e-12);
            counts[s.index] += 1;
        }
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(array![1.0, 1.0, 1.0].view()), 0);
        assert_eq!(argmax(array![1.0, 3.0, 3.0].view()), 1);
    }
}
