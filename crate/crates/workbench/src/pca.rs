//! Two-component PCA by power iteration with deflation.

use ndarray::{Array1, Array2, Axis};

const MAX_ITER: usize = 100_000;
const TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// One `[pc1, pc2]` row per input row.
    pub coords: Vec<[f64; 2]>,
    /// Unit principal directions; a zero vector when the data has rank < 2.
    pub components: [Array1<f64>; 2],
    /// Variances along each component.
    pub explained: [f64; 2],
    /// Total variance (trace of the covariance).
    pub total: f64,
    pub mean: Array1<f64>,
}

impl Projection {
    pub fn project(&self, row: &[f64]) -> [f64; 2] {
        let x = Array1::from_vec(row.to_vec()) - &self.mean;
        [x.dot(&self.components[0]), x.dot(&self.components[1])]
    }
}

/// Dominant eigenpair of a symmetric positive semidefinite matrix.
fn power_iteration(c: &Array2<f64>) -> (f64, Array1<f64>) {
    let d = c.nrows();
    let scale = c.diag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return (0.0, Array1::zeros(d));
    }
    // A start vector with a nonzero component along every basis direction.
    let mut v = Array1::from_iter((0..d).map(|i| 1.0 + 0.1 * i as f64));
    v /= v.dot(&v).sqrt();
    let mut lambda = 0.0;
    for _ in 0..MAX_ITER {
        let w = c.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm <= TOL * scale {
            return (0.0, Array1::zeros(d));
        }
        let next = &w / norm;
        lambda = next.dot(&c.dot(&next));
        let diff = (&next - &v).mapv(f64::abs).sum();
        v = next;
        if diff < TOL.sqrt() * 1e-3 {
            break;
        }
    }
    // Sign convention: largest-magnitude entry positive.
    let idx = v.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map_or(0, |(i, _)| i);
    if v[idx] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
    (lambda, v)
}

/// Project rows onto their top two principal components.
pub fn pca_project(table: &Array2<f64>) -> Option<Projection> {
    let (n, d) = table.dim();
    if n < 2 || d == 0 {
        return None;
    }
    let mean = table.mean_axis(Axis(0))?;
    let centered = table - &mean;
    let mut cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let total = cov.diag().sum();
    let (l1, v1) = power_iteration(&cov);
    for i in 0..d {
        for j in 0..d {
            cov[[i, j]] -= l1 * v1[i] * v1[j];
        }
    }
    let (l2, v2) = match power_iteration(&cov) {
        // Deflation leaves rounding noise where the data has no second direction.
        (l, v) if l > TOL.sqrt() * l1 => (l, v),
        _ => (0.0, Array1::zeros(d)),
    };
    let coords = centered.rows().into_iter().map(|r| [r.dot(&v1), r.dot(&v2)]).collect();
    Some(Projection { coords, components: [v1, v2], explained: [l1.max(0.0), l2.max(0.0)], total, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn axis_aligned_2d_is_an_isometry() {
        let x = arr2(&[[0.0, 0.0], [4.0, 0.0], [0.0, 1.0], [4.0, 1.0], [2.0, 0.5]]);
        let p = pca_project(&x).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let a = ((x[[i, 0]] - x[[j, 0]]).powi(2) + (x[[i, 1]] - x[[j, 1]]).powi(2)).sqrt();
                let b = ((p.coords[i][0] - p.coords[j][0]).powi(2) + (p.coords[i][1] - p.coords[j][1]).powi(2)).sqrt();
                assert!((a - b).abs() < 1e-9);
            }
        }
        assert!(p.explained[0] >= p.explained[1]);
    }

    #[test]
    fn rank_one_input_has_zero_second_component() {
        let x = arr2(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [3.0, 6.0, 9.0]]);
        let p = pca_project(&x).unwrap();
        assert_eq!(p.explained[1], 0.0);
        assert!(p.components[1].iter().all(|&v| v == 0.0));
        assert!(p.coords.iter().all(|c| c[1] == 0.0));
    }

    #[test]
    fn needs_two_rows() {
        assert!(pca_project(&arr2(&[[1.0, 2.0]])).is_none());
    }
}
