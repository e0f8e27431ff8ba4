//! Principal-component regression of TFP growth and cross-validated Lasso.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::prodest::ols;
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::stats::student_t_two_sided_p;

/// `***` p<0.001, `**` p<0.01, `*` p<0.05, `.` p<0.1.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "."
    } else {
        ""
    }
}

/// A categorical control such as country or sector, one value per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Categorical {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport<T> {
    pub terms: Vec<String>,
    pub coefficients: Vec<T>,
    pub standard_errors: Vec<T>,
    pub t_stats: Vec<T>,
    pub p_values: Vec<T>,
    pub n: usize,
    pub r_squared: T,
    pub subsample: Option<usize>,
    pub controls_included: bool,
}

impl<T: Scalar> RegressionReport<T> {
    pub fn coefficient(&self, term: &str) -> Option<T> {
        self.terms.iter().position(|t| t == term).map(|i| self.coefficients[i])
    }

    pub fn p_value(&self, term: &str) -> Option<T> {
        self.terms.iter().position(|t| t == term).map(|i| self.p_values[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,estimate,std_error,t_stat,p_value,stars\n");
        for i in 0..self.terms.len() {
            let p = self.p_values[i].as_f64();
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.4},{:.6},{}\n",
                self.terms[i],
                self.coefficients[i].as_f64(),
                self.standard_errors[i].as_f64(),
                self.t_stats[i].as_f64(),
                p,
                significance_stars(p)
            ));
        }
        out
    }
}

/// Dummy columns for each categorical, dropping the alphabetically first level.
fn dummies<T: Scalar>(controls: &[Categorical], rows: &[usize]) -> (Vec<String>, Vec<Vec<T>>) {
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for c in controls {
        let levels: BTreeSet<&str> = rows.iter().map(|&r| c.values[r].as_str()).collect();
        for level in levels.into_iter().skip(1) {
            names.push(format!("{}={}", c.name, level));
            columns.push(rows.iter().map(|&r| if c.values[r] == level { T::one() } else { T::zero() }).collect());
        }
    }
    (names, columns)
}

fn score_names(s: usize) -> Vec<String> {
    (1..=s).map(|j| format!("PC{j}")).collect()
}

fn check_lengths<T: Scalar>(tfp: &[T], scores: &Matrix<T>, controls: Option<&[Categorical]>) -> Result<()> {
    if tfp.len() != scores.nrows() {
        return Err(Error::LengthMismatch(format!("{} TFP values, {} score rows", tfp.len(), scores.nrows())));
    }
    for c in controls.unwrap_or_default() {
        if c.values.len() != tfp.len() {
            return Err(Error::LengthMismatch(format!("control {} has {} values for {} rows", c.name, c.values.len(), tfp.len())));
        }
    }
    Ok(())
}

fn fit_rows<T: Scalar>(
    tfp: &[T],
    scores: &Matrix<T>,
    controls: Option<&[Categorical]>,
    rows: &[usize],
    subsample: Option<usize>,
) -> Result<RegressionReport<T>> {
    let s = scores.ncols();
    let mut terms = vec!["(Intercept)".to_string()];
    terms.extend(score_names(s));
    let mut columns: Vec<Vec<T>> = vec![vec![T::one(); rows.len()]];
    columns.extend((0..s).map(|j| rows.iter().map(|&r| scores[(r, j)]).collect()));
    if let Some(c) = controls {
        let (names, cols) = dummies(c, rows);
        terms.extend(names);
        columns.extend(cols);
    }
    let x = Matrix::from_columns(&columns);
    let y: Vec<T> = rows.iter().map(|&r| tfp[r]).collect();
    let fit = ols(&x, &y)?;
    let df = T::from_usize_lossy(fit.df_resid);
    let t_stats: Vec<T> = fit.coefficients.iter().zip(&fit.standard_errors).map(|(&b, &se)| b / se).collect();
    let p_values = t_stats.iter().map(|&t| student_t_two_sided_p(t, df)).collect();
    Ok(RegressionReport {
        terms,
        coefficients: fit.coefficients,
        standard_errors: fit.standard_errors,
        t_stats,
        p_values,
        n: rows.len(),
        r_squared: fit.r_squared,
        subsample,
        controls_included: controls.is_some(),
    })
}

fn complete_rows<T: Scalar>(tfp: &[T], scores: &Matrix<T>) -> Vec<usize> {
    (0..tfp.len()).filter(|&r| !tfp[r].is_missing() && !scores.row(r).iter().any(|v| v.is_missing())).collect()
}

/// OLS of TFP growth on an intercept, the component scores and optional
/// categorical dummies. Rows with a missing response or score are skipped.
pub fn pcr<T: Scalar>(tfp_growth: &[T], scores: &Matrix<T>, controls: Option<&[Categorical]>) -> Result<RegressionReport<T>> {
    check_lengths(tfp_growth, scores, controls)?;
    fit_rows(tfp_growth, scores, controls, &complete_rows(tfp_growth, scores), None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ClusterRegression<T> {
    Fitted(RegressionReport<T>),
    Skipped { cluster: usize, n: usize, reason: String },
}

/// One regression per cluster. Clusters with fewer than `p + 5` usable rows,
/// `p` being the number of regressors, are skipped with a reason.
pub fn pcr_by_cluster<T: Scalar>(
    tfp_growth: &[T],
    scores: &Matrix<T>,
    labels: &[usize],
    controls: Option<&[Categorical]>,
) -> Result<Vec<ClusterRegression<T>>> {
    check_lengths(tfp_growth, scores, controls)?;
    if labels.len() != tfp_growth.len() {
        return Err(Error::LengthMismatch(format!("{} labels for {} rows", labels.len(), tfp_growth.len())));
    }
    let usable = complete_rows(tfp_growth, scores);
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    Ok((0..k)
        .map(|cluster| {
            let rows: Vec<usize> = usable.iter().copied().filter(|&r| labels[r] == cluster).collect();
            let n_dummies = controls.map_or(0, |c| dummies::<T>(c, &rows).0.len());
            let p = 1 + scores.ncols() + n_dummies;
            if rows.len() < p + 5 {
                let what = if controls.is_some() { "with controls" } else { "without controls" };
                return ClusterRegression::Skipped {
                    cluster,
                    n: rows.len(),
                    reason: format!("insufficient sample: {} observations for {p} regressors {what}", rows.len()),
                };
            }
            match fit_rows(tfp_growth, scores, controls, &rows, Some(cluster)) {
                Ok(r) => ClusterRegression::Fitted(r),
                Err(e) => ClusterRegression::Skipped { cluster, n: rows.len(), reason: e.to_string() },
            }
        })
        .collect())
}

pub const LASSO_TOL: f64 = 1e-7;
pub const LASSO_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateDescentFit<T> {
    pub coefficients: Vec<T>,
    pub sweeps: usize,
    /// Objective after each sweep.
    pub objective_history: Vec<T>,
}

fn soft_threshold<T: Scalar>(z: T, gamma: T) -> T {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        T::zero()
    }
}

/// `(1/2n)‖y − Xβ‖² + λ‖β‖₁`.
pub fn lasso_objective<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T], lambda: T) -> T {
    let n = T::from_usize_lossy(x.nrows());
    let fitted = x.mat_vec(beta);
    let rss: T = y.iter().zip(&fitted).map(|(&a, &b)| (a - b) * (a - b)).sum();
    rss / (T::lit(2.0) * n) + lambda * beta.iter().map(|b| b.abs()).sum::<T>()
}

/// Cyclic coordinate descent from `start`; stops when no coefficient moves by
/// more than `tol` in a sweep.
pub fn lasso_coordinate_descent_from<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    lambda: T,
    start: &[T],
    tol: T,
    max_sweeps: usize,
) -> Result<CoordinateDescentFit<T>> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::LengthMismatch(format!("design has {n} rows, response has {}", y.len())));
    }
    if start.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: start.len() });
    }
    if lambda < T::zero() || lambda.is_nan() {
        return Err(Error::InvalidConfig { field: "lambda".into(), reason: "must be non-negative".into() });
    }
    let nf = T::from_usize_lossy(n);
    let cols: Vec<Vec<T>> = (0..p).map(|j| x.column(j)).collect();
    let scale: Vec<T> = cols.iter().map(|c| c.iter().map(|&v| v * v).sum::<T>() / nf).collect();
    let mut beta = start.to_vec();
    let fitted = x.mat_vec(&beta);
    let mut resid: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let mut history = Vec::new();
    let mut last_change = f64::NAN;
    for sweep in 1..=max_sweeps {
        let mut max_change = T::zero();
        for j in 0..p {
            if scale[j] == T::zero() {
                continue;
            }
            let old = beta[j];
            let rho = cols[j].iter().zip(&resid).map(|(&a, &r)| a * r).sum::<T>() / nf + scale[j] * old;
            let new = soft_threshold(rho, lambda) / scale[j];
            if new != old {
                let delta = new - old;
                for (r, &a) in resid.iter_mut().zip(&cols[j]) {
                    *r -= a * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let rss: T = resid.iter().map(|&r| r * r).sum();
        history.push(rss / (T::lit(2.0) * nf) + lambda * beta.iter().map(|b| b.abs()).sum::<T>());
        if max_change < tol {
            return Ok(CoordinateDescentFit { coefficients: beta, sweeps: sweep, objective_history: history });
        }
        last_change = max_change.as_f64();
    }
    Err(Error::DidNotConverge { iterations: max_sweeps, last_change })
}

/// Cross-products of a design for repeated fits along a penalty path.
struct Gram<T> {
    xx: Matrix<T>,
    xy: Vec<T>,
}

impl<T: Scalar> Gram<T> {
    fn new(x: &Matrix<T>, y: &[T]) -> Self {
        let nf = T::from_usize_lossy(x.nrows());
        let mut xx = x.transpose().matmul(x);
        for v in xx.as_mut_slice() {
            *v = *v / nf;
        }
        let xy = x.tr_mat_vec(y).into_iter().map(|v| v / nf).collect();
        Self { xx, xy }
    }

    /// The sweeps of [`lasso_coordinate_descent_from`] on covariance updates:
    /// O(p) per coordinate instead of O(n), without the objective history.
    fn descend(&self, lambda: T, start: &[T], tol: T, max_sweeps: usize) -> Result<Vec<T>> {
        let p = self.xy.len();
        let mut beta = start.to_vec();
        let mut g = self.xx.mat_vec(&beta);
        let mut last_change = f64::NAN;
        for _ in 0..max_sweeps {
            let mut max_change = T::zero();
            for j in 0..p {
                let scale = self.xx[(j, j)];
                if scale == T::zero() {
                    continue;
                }
                let old = beta[j];
                let rho = self.xy[j] - g[j] + scale * old;
                let new = soft_threshold(rho, lambda) / scale;
                if new != old {
                    let delta = new - old;
                    for (k, gk) in g.iter_mut().enumerate() {
                        *gk += self.xx[(k, j)] * delta;
                    }
                    beta[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < tol {
                return Ok(beta);
            }
            last_change = max_change.as_f64();
        }
        Err(Error::DidNotConverge { iterations: max_sweeps, last_change })
    }
}

/// Lasso coefficients for a standardized design and centered response.
pub fn lasso_coordinate_descent<T: Scalar>(x: &Matrix<T>, y: &[T], lambda: T) -> Result<Vec<T>> {
    let zero = vec![T::zero(); x.ncols()];
    Ok(lasso_coordinate_descent_from(x, y, lambda, &zero, T::lit(LASSO_TOL), LASSO_MAX_SWEEPS)?.coefficients)
}

/// Smallest penalty that zeroes every coefficient: `max_j |xⱼᵀy| / n`.
pub fn lambda_max<T: Scalar>(x: &Matrix<T>, y: &[T]) -> T {
    let n = T::from_usize_lossy(x.nrows());
    x.tr_mat_vec(y).into_iter().map(|v| v.abs() / n).fold(T::zero(), T::max)
}

/// `count` log-spaced values from `hi` down to `hi · ratio`.
pub fn log_grid<T: Scalar>(hi: T, ratio: T, count: usize) -> Vec<T> {
    if count == 1 {
        return vec![hi];
    }
    let step = ratio.ln() / T::from_usize_lossy(count - 1);
    (0..count).map(|i| hi * (step * T::from_usize_lossy(i)).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    Min,
    #[default]
    OneSd,
}

impl std::str::FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Self::Min),
            "one-sd" | "1se" => Ok(Self::OneSd),
            other => Err(Error::InvalidConfig { field: "rule".into(), reason: format!("unknown selection rule {other}") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPoint<T> {
    pub lambda: T,
    pub mean_mse: T,
    /// Standard deviation of the fold MSEs.
    pub sd_mse: T,
    /// `sd_mse / √folds`, the width used by the one-sd rule.
    pub se_mse: T,
    pub nonzeros: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoResult<T> {
    pub lambda: T,
    pub intercept: T,
    pub terms: Vec<String>,
    /// Original-scale coefficients, exactly zero outside `nonzero_terms`.
    pub coefficients: Vec<T>,
    pub nonzero_terms: Vec<String>,
    pub cv_curve: Vec<CvPoint<T>>,
    pub selected_rule: SelectionRule,
    pub folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoCvSettings<T> {
    pub lambda_grid: Option<Vec<T>>,
    pub folds: usize,
    pub seed: u64,
    pub rule: SelectionRule,
}

impl<T> Default for LassoCvSettings<T> {
    fn default() -> Self {
        Self { lambda_grid: None, folds: 10, seed: 0, rule: SelectionRule::OneSd }
    }
}

struct Standardized<T> {
    x: Matrix<T>,
    y: Vec<T>,
    means: Vec<T>,
    sds: Vec<T>,
    y_mean: T,
}

fn standardize<T: Scalar>(x: &Matrix<T>, y: &[T], rows: &[usize]) -> Standardized<T> {
    let sub = x.select_rows(rows);
    let nf = T::from_usize_lossy(rows.len());
    let means = sub.column_means();
    let sds: Vec<T> = (0..sub.ncols())
        .map(|j| {
            let v = sub.column(j).iter().map(|&a| (a - means[j]) * (a - means[j])).sum::<T>() / nf;
            v.sqrt()
        })
        .collect();
    let data = sub
        .rows_iter()
        .flat_map(|r| {
            r.iter()
                .enumerate()
                .map(|(j, &a)| if sds[j] > T::zero() { (a - means[j]) / sds[j] } else { T::zero() })
                .collect::<Vec<_>>()
        })
        .collect();
    let y_sub: Vec<T> = rows.iter().map(|&r| y[r]).collect();
    let y_mean = y_sub.iter().copied().sum::<T>() / nf;
    Standardized {
        x: Matrix::from_row_major(rows.len(), sub.ncols(), data),
        y: y_sub.iter().map(|&v| v - y_mean).collect(),
        means,
        sds,
        y_mean,
    }
}

/// K-fold cross-validated Lasso on the original variables. Each training
/// fold is standardized on its own; the final model is refit on all rows at
/// the selected penalty and reported on the original scale.
pub fn lasso_cv<T: Scalar>(x: &Matrix<T>, y: &[T], terms: &[String], settings: &LassoCvSettings<T>) -> Result<LassoResult<T>> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::LengthMismatch(format!("design has {n} rows, response has {}", y.len())));
    }
    if terms.len() != p {
        return Err(Error::LengthMismatch(format!("{} term names for {p} columns", terms.len())));
    }
    let k = settings.folds;
    if k < 2 {
        return Err(Error::InvalidConfig { field: "folds".into(), reason: "need at least 2 folds".into() });
    }
    if n < k {
        return Err(Error::TooFewRows { needed: k, have: n });
    }
    if x.has_missing() || y.iter().any(|v| v.is_missing()) {
        return Err(Error::SchemaMismatch("Lasso input contains missing values".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let full = standardize(x, y, &all);
    let grid = match &settings.lambda_grid {
        Some(g) => {
            let mut g = g.clone();
            g.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            g
        }
        None => log_grid(lambda_max(&full.x, &full.y), T::lit(1e-3), 100),
    };
    if grid.is_empty() || grid.iter().any(|&l| !(l >= T::zero())) {
        return Err(Error::InvalidConfig { field: "lambda_grid".into(), reason: "penalties must be non-negative".into() });
    }

    let mut order = all.clone();
    order.shuffle(&mut substream(settings.seed, "cv", 0));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    let tol = T::lit(LASSO_TOL);
    let mut mse = vec![vec![T::zero(); k]; grid.len()];
    for f in 0..k {
        let train: Vec<usize> = all.iter().copied().filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = all.iter().copied().filter(|&i| fold_of[i] == f).collect();
        let s = standardize(x, y, &train);
        let gram = Gram::new(&s.x, &s.y);
        let mut beta = vec![T::zero(); p];
        for (g, &lambda) in grid.iter().enumerate() {
            beta = gram.descend(lambda, &beta, tol, LASSO_MAX_SWEEPS)?;
            let err: T = test
                .iter()
                .map(|&i| {
                    let pred = s.y_mean
                        + (0..p)
                            .filter(|&j| s.sds[j] > T::zero())
                            .map(|j| beta[j] * (x[(i, j)] - s.means[j]) / s.sds[j])
                            .sum::<T>();
                    (y[i] - pred) * (y[i] - pred)
                })
                .sum();
            mse[g][f] = err / T::from_usize_lossy(test.len());
        }
    }

    let kf = T::from_usize_lossy(k);
    let gram = Gram::new(&full.x, &full.y);
    let mut path = vec![T::zero(); p];
    let mut full_fits = Vec::with_capacity(grid.len());
    let mut cv_curve = Vec::with_capacity(grid.len());
    for (g, &lambda) in grid.iter().enumerate() {
        path = gram.descend(lambda, &path, tol, LASSO_MAX_SWEEPS)?;
        let mean = mse[g].iter().copied().sum::<T>() / kf;
        let sd = (mse[g].iter().map(|&m| (m - mean) * (m - mean)).sum::<T>() / (kf - T::one())).sqrt();
        cv_curve.push(CvPoint {
            lambda,
            mean_mse: mean,
            sd_mse: sd,
            se_mse: sd / kf.sqrt(),
            nonzeros: path.iter().filter(|&&b| b != T::zero()).count(),
        });
        full_fits.push(path.clone());
    }
    let best = (0..grid.len()).fold(0, |b, g| if cv_curve[g].mean_mse < cv_curve[b].mean_mse { g } else { b });
    let chosen = match settings.rule {
        SelectionRule::Min => best,
        SelectionRule::OneSd => {
            let limit = cv_curve[best].mean_mse + cv_curve[best].se_mse;
            // grid runs from the largest penalty down
            (0..=best).find(|&g| cv_curve[g].mean_mse <= limit).unwrap_or(best)
        }
    };

    let beta_std = &full_fits[chosen];
    let coefficients: Vec<T> =
        (0..p).map(|j| if beta_std[j] != T::zero() { beta_std[j] / full.sds[j] } else { T::zero() }).collect();
    let intercept = full.y_mean - (0..p).map(|j| coefficients[j] * full.means[j]).sum::<T>();
    let nonzero_terms = (0..p).filter(|&j| coefficients[j] != T::zero()).map(|j| terms[j].clone()).collect();
    Ok(LassoResult {
        lambda: grid[chosen],
        intercept,
        terms: terms.to_vec(),
        coefficients,
        nonzero_terms,
        cv_curve,
        selected_rule: settings.rule,
        folds: k,
        seed: settings.seed,
    })
}

/// Variable-by-coefficient table with one column per result and `.` for
/// zeroed entries.
pub fn lasso_table<T: Scalar>(results: &[(&str, &LassoResult<T>)]) -> String {
    let mut terms: Vec<&String> = Vec::new();
    for (_, r) in results {
        for t in &r.nonzero_terms {
            if !terms.contains(&t) {
                terms.push(t);
            }
        }
    }
    let mut out = String::from("| Variable |");
    for (label, _) in results {
        out.push_str(&format!(" {label} |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(results.len()));
    out.push('\n');
    for t in terms {
        out.push_str(&format!("| {t} |"));
        for (_, r) in results {
            let v = r.terms.iter().position(|x| x == t).map(|i| r.coefficients[i]).unwrap_or_else(T::zero);
            if v == T::zero() {
                out.push_str(" . |");
            } else {
                out.push_str(&format!(" {:.4} |", v.as_f64()));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stars_thresholds() {
        assert_eq!(significance_stars(0.0005), "***");
        assert_eq!(significance_stars(0.001), "**");
        assert_eq!(significance_stars(0.049), "*");
        assert_eq!(significance_stars(0.07), ".");
        assert_eq!(significance_stars(0.5), "");
    }

    #[test]
    fn soft_threshold_orthonormal_design() {
        // columns with xᵀx/n = 1 and orthogonal; OLS coefficients (3, 0.5)
        let x = Matrix::from_rows(&[[1.0_f64, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]);
        let y: Vec<f64> = x.rows_iter().map(|r| 3.0 * r[0] + 0.5 * r[1]).collect();
        let b = lasso_coordinate_descent(&x, &y, 1.0).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12);
        assert_eq!(b[1], 0.0);
    }

    #[test]
    fn dummies_drop_first_level() {
        let c = vec![Categorical { name: "country".into(), values: vec!["IT".into(), "DE".into(), "FR".into(), "DE".into()] }];
        let (names, cols) = dummies::<f64>(&c, &[0, 1, 2, 3]);
        assert_eq!(names, vec!["country=FR", "country=IT"]);
        assert_eq!(cols[1], vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn grid_is_log_spaced() {
        let g = log_grid(10.0_f64, 1e-3, 4);
        assert!((g[0] - 10.0).abs() < 1e-12 && (g[3] - 0.01).abs() < 1e-12);
        assert!((g[1] / g[0] - g[2] / g[1]).abs() < 1e-12);
    }
}
