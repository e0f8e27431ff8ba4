use firmprod::pca::*;
use firmprod::rng::substream;
use firmprod::{Error, Matrix};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_matrix(n: usize, p: usize, seed: u64) -> Matrix<f64> {
    let mut rng = substream(seed, "pca-test", 0);
    let data = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    Matrix::from_row_major(n, p, data)
}

fn covariance_eigen(m: &Matrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (n, p) = (m.nrows(), m.ncols());
    let x = DMatrix::from_row_slice(n, p, m.as_slice());
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, p, |r, c| x[(r, c)] - mean[c]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

fn assert_orthonormal(l: &Matrix<f64>) {
    let g = l.transpose().matmul(l);
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((g[(i, j)] - e).abs() < 1e-10, "gram[{i},{j}] = {}", g[(i, j)]);
        }
    }
}

#[test]
fn matches_covariance_eigendecomposition() {
    for seed in 0..25 {
        let mut rng = substream(seed, "pca-shape", 0);
        let p = rng.random_range(2..=6);
        let n = rng.random_range(p + 1..=p + 6);
        let m = random_matrix(n, p, seed);
        let s = (n - 1).min(p);
        let model = fit_pca(&m, s).unwrap();
        let (vals, vecs) = covariance_eigen(&m);
        for k in 0..s {
            assert!((model.eigenvalues[k] - vals[k]).abs() < 1e-10);
            for r in 0..p {
                assert!((model.loadings[(r, k)].abs() - vecs[(r, k)].abs()).abs() < 1e-10);
            }
        }
        assert_orthonormal(&model.loadings);
        assert!(model.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(model.variance_fractions.iter().sum::<f64>() <= 1.0 + 1e-12);
    }
}

#[test]
fn loadings_have_positive_largest_entry_and_are_deterministic() {
    let m = random_matrix(30, 5, 4);
    let a = fit_pca(&m, 3).unwrap();
    let b = fit_pca(&m, 3).unwrap();
    assert_eq!(a, b);
    for c in 0..3 {
        let col = a.loadings.column(c);
        let big = col.iter().copied().fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        assert!(big > 0.0);
    }
}

#[test]
fn score_variances_equal_eigenvalues_and_scores_are_orthogonal() {
    let m = random_matrix(40, 4, 7);
    let model = fit_pca(&m, 3).unwrap();
    let scores = project(&model, &m).unwrap();
    for k in 0..3 {
        let col = scores.column(k);
        let var = col.iter().map(|v| v * v).sum::<f64>() / 39.0;
        assert!((var - model.eigenvalues[k]).abs() < 1e-8);
        for j in (k + 1)..3 {
            let cross: f64 = col.iter().zip(scores.column(j)).map(|(a, b)| a * b).sum();
            assert!(cross.abs() < 1e-8);
        }
    }
}

#[test]
fn full_rank_reconstruction_reproduces_centered_matrix() {
    let m = random_matrix(12, 5, 9);
    let model = fit_pca(&m, 5).unwrap();
    let scores = project(&model, &m).unwrap();
    let back = scores.matmul(&model.loadings.transpose());
    for r in 0..12 {
        for c in 0..5 {
            assert!((back[(r, c)] - (m[(r, c)] - model.center[c])).abs() < 1e-8);
        }
    }
}

#[test]
fn single_feature_scores_are_centered_values() {
    let m = Matrix::from_columns(&[vec![1.0_f64, 4.0, 7.0]]);
    let model = fit_pca(&m, 1).unwrap();
    let s = project(&model, &m).unwrap();
    assert_eq!(s.column(0), vec![-3.0, 0.0, 3.0]);
}

#[test]
fn projection_checks_width() {
    let model = fit_pca(&random_matrix(10, 3, 1), 2).unwrap();
    assert!(matches!(project(&model, &random_matrix(4, 2, 1)), Err(Error::SchemaMismatch(_))));
}

#[test]
fn complete_matrix_is_returned_unchanged() {
    let m = random_matrix(10, 4, 2);
    let r = iterative_impute(&m, &ImputeSettings { n_components: 2, ..ImputeSettings::default() }).unwrap();
    assert_eq!(r.n_iterations, 0);
    assert_eq!(r.completed, m);
}

#[test]
fn rank_one_cell_is_recovered() {
    let u = [1.0, 2.0, -1.0, 0.5, 3.0, -2.0];
    let v = [2.0, -1.0, 0.5, 1.5];
    let mut m = Matrix::from_row_major(6, 4, u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect());
    let truth = m[(2, 1)];
    m[(2, 1)] = f64::NAN;
    let settings = ImputeSettings { n_components: 1, tol: 1e-24, max_iter: 100_000 };
    let r = iterative_impute(&m, &settings).unwrap();
    assert!(r.converged);
    assert!((r.completed[(2, 1)] - truth).abs() < 1e-6, "{} vs {truth}", r.completed[(2, 1)]);
}

#[test]
fn iteration_cap_is_reported() {
    let mut m = random_matrix(20, 5, 3);
    m[(0, 0)] = f64::NAN;
    m[(5, 3)] = f64::NAN;
    let r = iterative_impute(&m, &ImputeSettings { n_components: 2, tol: 0.0, max_iter: 1 }).unwrap();
    assert_eq!(r.n_iterations, 1);
    assert!(!r.converged);
    assert!(matches!(r.ensure_converged(), Err(Error::DidNotConverge { iterations: 1, .. })));
}

#[test]
fn observed_cells_are_bitwise_preserved() {
    let mut m = random_matrix(50, 6, 11);
    for (r, c) in [(0, 0), (3, 2), (10, 5), (49, 1)] {
        m[(r, c)] = f64::NAN;
    }
    let r = iterative_impute(&m, &ImputeSettings { n_components: 2, ..ImputeSettings::default() }).unwrap();
    for i in 0..50 {
        for j in 0..6 {
            if !m[(i, j)].is_nan() {
                assert_eq!(r.completed[(i, j)].to_bits(), m[(i, j)].to_bits());
            }
        }
    }
    assert!(!r.completed.has_missing());
}

#[test]
fn preconditions() {
    let mut m = random_matrix(5, 3, 1);
    for c in 0..3 {
        m[(2, c)] = f64::NAN;
    }
    let s = ImputeSettings { n_components: 1, ..ImputeSettings::default() };
    assert!(matches!(iterative_impute(&m, &s), Err(Error::AllMissingRow(2))));
    let s = ImputeSettings { n_components: 3, ..ImputeSettings::default() };
    assert!(matches!(iterative_impute(&random_matrix(5, 3, 1), &s), Err(Error::TooManyComponents { .. })));
}

#[test]
fn correlations_for_collinear_and_orthogonal_features() {
    // x2 = 2·x1; x3 orthogonal to x1 and centered
    let x1 = [-1.5_f64, -0.5, 0.5, 1.5];
    let m = Matrix::from_columns(&[
        x1.to_vec(),
        x1.iter().map(|v| 2.0 * v).collect(),
        vec![1.0, -1.0, -1.0, 1.0],
    ]);
    let mut m3 = m.clone();
    // shrink the orthogonal feature so PC1 lies in the (x1, x2) plane
    for r in 0..4 {
        m3[(r, 2)] *= 0.01;
    }
    let model = fit_pca(&m3, 1).unwrap().with_column_names(vec!["a".into(), "b".into(), "c".into()]).unwrap();
    let corr = loading_correlations(&model, &m3).unwrap();
    let c = &corr[0];
    assert!((c.correlations[0].1.abs() - 1.0).abs() < 1e-12);
    assert!((c.correlations[1].1.abs() - 1.0).abs() < 1e-12);
    assert!(c.correlations[2].1.abs() < 1e-10);
    let names: Vec<&str> = c.top_positive.iter().chain(&c.top_negative).map(|(n, _)| n.as_str()).collect();
    assert!(!names.contains(&"c"));
    assert_eq!(c.top_positive[0].0, "a");
}
