use firmprod::pca::{fit_pca, project};
use firmprod::prodest::ols;
use firmprod::regress::*;
use firmprod::rng::substream;
use firmprod::stats::incomplete_beta;
use firmprod::{Error, Matrix};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn normal_matrix(n: usize, d: usize, seed: u64, name: &str) -> Matrix<f64> {
    let mut rng = substream(seed, name, 0);
    Matrix::from_row_major(n, d, (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect())
}

fn pc_scores(n: usize, seed: u64) -> Matrix<f64> {
    let x = normal_matrix(n, 10, seed, "raw");
    let model = fit_pca(&x, 8).unwrap();
    project(&model, &x).unwrap()
}

fn noise(n: usize, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, "noise", 0);
    let d = Normal::new(0.0, sd).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn t_p_oracle(t: f64, df: f64) -> f64 {
    incomplete_beta(df / (df + t * t), df / 2.0, 0.5)
}

#[test]
fn planted_pc_model_is_recovered() {
    let s = pc_scores(500, 1);
    let e = noise(500, 0.01, 1);
    let y: Vec<f64> = (0..500).map(|i| 2.0 * s[(i, 0)] - s[(i, 2)] + e[i]).collect();
    let r = pcr(&y, &s, None).unwrap();
    assert_eq!(r.terms[1], "PC1");
    let truth = [2.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    for (j, &b) in truth.iter().enumerate() {
        assert!((r.coefficients[j + 1] - b).abs() < 0.02);
    }
    assert!(r.p_values.iter().all(|&p| (0.0..=1.0).contains(&p)));
    assert!(r.to_csv().contains("PC1,2.0"));
}

#[test]
fn orthogonal_scores_decouple() {
    let s = pc_scores(200, 2);
    let y = noise(200, 1.0, 2);
    let full = pcr(&y, &s, None).unwrap();
    let ybar = y.iter().sum::<f64>() / 200.0;
    for j in 0..8 {
        let col = s.column(j);
        let cov: f64 = col.iter().zip(&y).map(|(a, b)| a * (b - ybar)).sum();
        let var: f64 = col.iter().map(|a| a * a).sum();
        assert!((full.coefficients[j + 1] - cov / var).abs() < 1e-8);
        let alone = pcr(&y, &Matrix::from_columns(&[col]), None).unwrap();
        assert!((alone.coefficients[1] - full.coefficients[j + 1]).abs() < 1e-8);
    }
}

#[test]
fn null_model_slopes_are_within_three_se() {
    let s = pc_scores(400, 3);
    let y = noise(400, 1.0, 3);
    let r = pcr(&y, &s, None).unwrap();
    for j in 1..9 {
        assert!(r.t_stats[j].abs() < 3.0, "{}", r.t_stats[j]);
    }
}

#[test]
fn p_values_match_incomplete_beta_oracle() {
    for seed in 0..5 {
        let s = pc_scores(60, 10 + seed);
        let e = noise(60, 1.0, 10 + seed);
        let y: Vec<f64> = (0..60).map(|i| 0.3 * s[(i, 1)] + e[i]).collect();
        let r = pcr(&y, &s, None).unwrap();
        for j in 0..r.terms.len() {
            assert!((r.p_values[j] - t_p_oracle(r.t_stats[j], 51.0)).abs() < 1e-6);
        }
    }
}

#[test]
fn controls_add_dummies_and_detect_aliasing() {
    let n = 120;
    let s = pc_scores(n, 4);
    let y = noise(n, 1.0, 4);
    let countries: Vec<String> = (0..n).map(|i| ["DE", "FR", "IT"][i % 3].to_string()).collect();
    let c = vec![Categorical { name: "country".into(), values: countries }];
    let r = pcr(&y, &s, Some(&c)).unwrap();
    assert!(r.controls_included);
    assert_eq!(&r.terms[9..], &["country=FR", "country=IT"]);
    // a score column equal to the FR dummy
    let mut aliased = s.clone();
    for i in 0..n {
        aliased[(i, 7)] = if i % 3 == 1 { 1.0 } else { 0.0 };
    }
    assert!(matches!(pcr(&y, &aliased, Some(&c)), Err(Error::RankDeficient(_))));
    assert!(matches!(pcr(&y[..10], &s, None), Err(Error::LengthMismatch(_))));
}

#[test]
fn cluster_regressions() {
    let n = 300;
    let s = pc_scores(n, 5);
    let e = noise(n, 0.1, 5);
    let labels: Vec<usize> = (0..n).map(|i| if i < 150 { 0 } else { 1 }).collect();
    let y: Vec<f64> = (0..n).map(|i| if labels[i] == 0 { s[(i, 0)] } else { -s[(i, 0)] } + e[i]).collect();
    let out = pcr_by_cluster(&y, &s, &labels, None).unwrap();
    let b: Vec<f64> = out
        .iter()
        .map(|c| match c {
            ClusterRegression::Fitted(r) => {
                assert!(r.p_value("PC1").unwrap() < 0.001);
                r.coefficient("PC1").unwrap()
            }
            ClusterRegression::Skipped { reason, .. } => panic!("{reason}"),
        })
        .collect();
    assert!(b[0] > 0.9 && b[1] < -0.9);

    let single = pcr_by_cluster(&y, &s, &vec![0; n], None).unwrap();
    let ClusterRegression::Fitted(r) = &single[0] else { panic!() };
    let full = pcr(&y, &s, None).unwrap();
    assert_eq!(r.coefficients, full.coefficients);
    assert_eq!(r.subsample, Some(0));

    let mut small = vec![0; n];
    for l in small.iter_mut().take(6) {
        *l = 1;
    }
    let out = pcr_by_cluster(&y, &s, &small, None).unwrap();
    assert!(matches!(&out[1], ClusterRegression::Skipped { n: 6, reason, .. } if reason.contains("insufficient")));
}

fn standardized_design(n: usize, p: usize, seed: u64) -> Matrix<f64> {
    let mut x = normal_matrix(n, p, seed, "lasso-x");
    x.center_columns();
    for j in 0..p {
        let col = x.column(j);
        let sd = (col.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        x.set_column(j, &col.iter().map(|v| v / sd).collect::<Vec<_>>());
    }
    x
}

#[test]
fn zero_penalty_matches_ols() {
    let x = standardized_design(200, 6, 1);
    let e = noise(200, 1.0, 7);
    let mut y: Vec<f64> = (0..200).map(|i| x[(i, 0)] - 0.5 * x[(i, 3)] + e[i]).collect();
    let ybar = y.iter().sum::<f64>() / 200.0;
    y.iter_mut().for_each(|v| *v -= ybar);
    let b = lasso_coordinate_descent(&x, &y, 0.0).unwrap();
    let o = ols(&x, &y).unwrap();
    for j in 0..6 {
        assert!((b[j] - o.coefficients[j]).abs() < 1e-6);
    }
}

#[test]
fn penalty_above_lambda_max_zeroes_everything() {
    let x = standardized_design(100, 5, 2);
    let y: Vec<f64> = noise(100, 1.0, 2);
    let lm = lambda_max(&x, &y);
    assert!(lasso_coordinate_descent(&x, &y, lm).unwrap().iter().all(|&b| b == 0.0));
    assert!(lasso_coordinate_descent(&x, &y, lm * 3.0).unwrap().iter().all(|&b| b == 0.0));
    assert!(lasso_coordinate_descent(&x, &y, lm * 0.9).unwrap().iter().any(|&b| b != 0.0));
}

#[test]
fn objective_never_increases() {
    let x = standardized_design(150, 8, 3);
    let e = noise(150, 1.0, 3);
    let y: Vec<f64> = (0..150).map(|i| x[(i, 1)] + 0.5 * x[(i, 2)] + e[i]).collect();
    let fit = lasso_coordinate_descent_from(&x, &y, 0.05, &[0.0; 8], 1e-10, 10_000).unwrap();
    assert!(fit.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    assert!((lasso_objective(&x, &y, &fit.coefficients, 0.05) - fit.objective_history.last().unwrap()).abs() < 1e-12);
}

#[test]
fn nonzeros_shrink_with_penalty_on_orthonormal_design() {
    // Hadamard-type columns, orthogonal with xᵀx/n = 1
    let rows: Vec<[f64; 4]> = (0..8)
        .map(|i| {
            let s = |b: usize| if (i >> b) & 1 == 1 { -1.0 } else { 1.0 };
            [s(0), s(1), s(2), s(0) * s(1)]
        })
        .collect();
    let x = Matrix::from_rows(&rows);
    let y: Vec<f64> = x.rows_iter().map(|r| 3.0 * r[0] + 1.5 * r[1] - 0.7 * r[2] + 0.2 * r[3]).collect();
    let grid = log_grid(lambda_max(&x, &y), 1e-3, 100);
    let counts: Vec<usize> =
        grid.iter().map(|&l| lasso_coordinate_descent(&x, &y, l).unwrap().iter().filter(|&&b| b != 0.0).count()).collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(counts[0], 0);
    assert_eq!(*counts.last().unwrap(), 4);
}

fn planted_sparse(n: usize, seed: u64, signal: bool) -> (Matrix<f64>, Vec<f64>, Vec<String>) {
    let mut rng = substream(seed, "lasso-raw", 0);
    let scales: Vec<f64> = (0..20).map(|_| rng.random_range(0.5..5.0)).collect();
    let z = normal_matrix(n, 20, seed, "lasso-z");
    let x = Matrix::from_row_major(n, 20, z.as_slice().iter().enumerate().map(|(i, v)| 10.0 + v * scales[i % 20]).collect());
    let e = noise(n, 1.0, seed);
    let y = (0..n).map(|i| if signal { 3.0 * z[(i, 0)] - 2.0 * z[(i, 4)] } else { 0.0 } + e[i]).collect();
    let names = (1..=20).map(|j| format!("x{j}")).collect();
    (x, y, names)
}

#[test]
fn cross_validated_lasso_finds_planted_terms() {
    let (x, y, names) = planted_sparse(500, 1, true);
    let r = lasso_cv(&x, &y, &names, &LassoCvSettings { seed: 1, ..LassoCvSettings::default() }).unwrap();
    assert!(r.nonzero_terms.contains(&"x1".to_string()) && r.nonzero_terms.contains(&"x5".to_string()));
    assert!(r.nonzero_terms.len() <= 6, "{:?}", r.nonzero_terms);
    assert_eq!(r.cv_curve.len(), 100);
    for (t, &b) in r.terms.iter().zip(&r.coefficients) {
        assert_eq!(b != 0.0, r.nonzero_terms.contains(t));
    }
    let min = lasso_cv(&x, &y, &names, &LassoCvSettings { seed: 1, rule: SelectionRule::Min, ..LassoCvSettings::default() }).unwrap();
    assert!(min.lambda <= r.lambda);
    let table = lasso_table(&[("2015", &r), ("2019", &min)]);
    assert!(table.starts_with("| Variable | 2015 | 2019 |"));
}

#[test]
fn cross_validated_lasso_on_noise_selects_little() {
    let mut total = 0;
    for seed in 0..4 {
        let (x, y, names) = planted_sparse(300, 100 + seed, false);
        let r = lasso_cv(&x, &y, &names, &LassoCvSettings { seed, ..LassoCvSettings::default() }).unwrap();
        total += r.nonzero_terms.len();
    }
    assert!(total <= 8, "{total} spurious selections");
}

#[test]
fn lasso_cv_validation() {
    let (x, y, names) = planted_sparse(50, 1, true);
    let bad = LassoCvSettings { folds: 1, ..LassoCvSettings::default() };
    assert!(matches!(lasso_cv(&x, &y, &names, &bad), Err(Error::InvalidConfig { .. })));
    assert!(matches!(lasso_cv(&x, &y, &names[..3], &LassoCvSettings::default()), Err(Error::LengthMismatch(_))));
    assert_eq!("min".parse::<SelectionRule>().unwrap(), SelectionRule::Min);
}
