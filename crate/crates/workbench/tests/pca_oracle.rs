use lexcom::pca::pca_project;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn top_components_match_a_dense_eigensolver() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, d) = (12, 5);
        // Distinct column scales keep the top eigenvalues well separated.
        let x = Array2::from_shape_fn((n, d), |(_, j)| rng.random_range(-1.0..1.0) * (d - j) as f64);
        let p = pca_project(&x).unwrap();

        let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
        let centered = DMatrix::from_fn(n, d, |i, j| x[[i, j]] - mean[j]);
        let cov = centered.transpose() * &centered / (n as f64 - 1.0);
        let eig = SymmetricEigen::new(cov.clone());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        assert!((p.total - cov.trace()).abs() < 1e-9);
        for (k, &axis) in order.iter().take(2).enumerate() {
            let lambda = eig.eigenvalues[axis];
            assert!((p.explained[k] - lambda).abs() < 1e-6 * lambda.max(1.0), "seed {seed} k {k}");
            let v = eig.eigenvectors.column(axis);
            let dot: f64 = (0..d).map(|j| v[j] * p.components[k][j]).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-6, "seed {seed} k {k}: |cos| = {}", dot.abs());
            for i in 0..n {
                let expected: f64 = (0..d).map(|j| centered[(i, j)] * p.components[k][j]).sum();
                assert!((p.coords[i][k] - expected).abs() < 1e-9);
            }
        }
    }
}
