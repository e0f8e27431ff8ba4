//! Principal components and iterative regularized PCA imputation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, symmetric_eigen, Matrix};
use crate::panel::StandardizationParams;
use crate::scalar::Scalar;
use crate::stats::pearson;

/// Default imputation rank and number of retained components.
pub const DEFAULT_COMPONENTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel<T> {
    /// `p × S`; column `m` is the unit-norm loading vector of component `m`.
    pub loadings: Matrix<T>,
    /// Component variances, non-increasing.
    pub eigenvalues: Vec<T>,
    pub variance_fractions: Vec<T>,
    /// Sum of all column variances of the training matrix.
    pub total_variance: T,
    /// Column means subtracted before projection.
    pub center: Vec<T>,
    pub column_names: Vec<String>,
    pub standardization: StandardizationParams<T>,
}

impl<T: Scalar> PcaModel<T> {
    pub fn n_components(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.loadings.nrows() {
            return Err(Error::SchemaMismatch(format!(
                "{} column names for {} features",
                names.len(),
                self.loadings.nrows()
            )));
        }
        self.column_names = names;
        Ok(self)
    }

    /// Records the transform that produced the training matrix.
    pub fn with_standardization(mut self, params: StandardizationParams<T>) -> Self {
        self.standardization = params;
        self
    }

    /// `(component, eigenvalue, fraction)` rows, components numbered from 1.
    pub fn scree(&self) -> Vec<(usize, T, T)> {
        self.eigenvalues.iter().zip(&self.variance_fractions).enumerate().map(|(i, (&e, &f))| (i + 1, e, f)).collect()
    }
}

/// Flips each column so that its largest-magnitude entry (first on ties) is positive.
fn normalize_signs<T: Scalar>(m: &mut Matrix<T>) {
    for c in 0..m.ncols() {
        let col = m.column(c);
        let mut pivot = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < T::zero() {
            for r in 0..m.nrows() {
                m[(r, c)] = -m[(r, c)];
            }
        }
    }
}

/// PCA of an (already standardized) complete matrix via the SVD of its
/// column-centered version.
pub fn fit_pca<T: Scalar>(matrix: &Matrix<T>, n_components: usize) -> Result<PcaModel<T>> {
    let (n, p) = (matrix.nrows(), matrix.ncols());
    if n == 0 || p == 0 {
        return Err(Error::EmptyInput);
    }
    if matrix.has_missing() {
        return Err(Error::SchemaMismatch("PCA input contains missing values".into()));
    }
    let max = (n - 1).min(p);
    if n_components == 0 || n_components > max {
        return Err(Error::TooManyComponents { requested: n_components, max });
    }
    let mut centered = matrix.clone();
    let center = centered.center_columns();
    let dec = svd(&centered);
    let denom = T::from_usize_lossy(n - 1);
    let all: Vec<T> = dec.singular_values.iter().map(|&s| s * s / denom).collect();
    let total_variance: T = (0..p).map(|c| centered.column(c).iter().map(|&x| x * x).sum::<T>() / denom).sum();
    let eigenvalues: Vec<T> = all[..n_components].to_vec();
    let variance_fractions = eigenvalues
        .iter()
        .map(|&e| if total_variance > T::zero() { e / total_variance } else { T::zero() })
        .collect();
    let mut loadings = dec.v.select_columns(&(0..n_components).collect::<Vec<_>>());
    normalize_signs(&mut loadings);
    Ok(PcaModel {
        loadings,
        eigenvalues,
        variance_fractions,
        total_variance,
        center,
        column_names: (1..=p).map(|i| format!("x{i}")).collect(),
        standardization: StandardizationParams::identity(p),
    })
}

/// Component scores `(X − center) · loadings`.
pub fn project<T: Scalar>(model: &PcaModel<T>, matrix: &Matrix<T>) -> Result<Matrix<T>> {
    let p = model.loadings.nrows();
    if matrix.ncols() != p {
        return Err(Error::SchemaMismatch(format!("model has {p} features, matrix has {}", matrix.ncols())));
    }
    if matrix.has_missing() {
        return Err(Error::SchemaMismatch("matrix to project contains missing values".into()));
    }
    let mut centered = matrix.clone();
    for r in 0..centered.nrows() {
        for (x, &m) in centered.row_mut(r).iter_mut().zip(&model.center) {
            *x -= m;
        }
    }
    Ok(centered.matmul(&model.loadings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationResult<T> {
    pub completed: Matrix<T>,
    pub n_iterations: usize,
    /// Sum of squared changes at missing cells in the last iteration.
    pub final_change: T,
    /// Number of components used in the reconstruction.
    pub rank: usize,
    pub converged: bool,
    pub missing_cells: usize,
}

impl<T: Scalar> ImputationResult<T> {
    /// Turns a non-converged run into [`Error::DidNotConverge`].
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::DidNotConverge { iterations: self.n_iterations, last_change: self.final_change.as_f64() })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeSettings {
    pub n_components: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ImputeSettings {
    fn default() -> Self {
        Self { n_components: DEFAULT_COMPONENTS, tol: 1e-6, max_iter: 1000 }
    }
}

/// Iterative regularized PCA imputation.
///
/// Missing cells start at their column's observed mean. Each iteration fits a
/// rank-`S` PCA to the completed matrix, shrinks component `m` by
/// `max(1 − σ̂²/λ_m, 0)` where `σ̂²` is the mean of the eigenvalues beyond
/// `S`, and rewrites only the missing cells from the reconstruction. A run
/// that hits `max_iter` still returns its last matrix with `converged = false`.
pub fn iterative_impute<T: Scalar>(matrix: &Matrix<T>, settings: &ImputeSettings) -> Result<ImputationResult<T>> {
    let (n, p) = (matrix.nrows(), matrix.ncols());
    let s = settings.n_components;
    if n == 0 || p == 0 {
        return Err(Error::EmptyInput);
    }
    if s == 0 || s + 1 > p {
        return Err(Error::TooManyComponents { requested: s, max: p.saturating_sub(1) });
    }
    for r in 0..n {
        if matrix.row(r).iter().all(|x| x.is_missing()) {
            return Err(Error::AllMissingRow(r));
        }
    }
    let mut means = Vec::with_capacity(p);
    for c in 0..p {
        let obs: Vec<T> = matrix.column(c).into_iter().filter(|x| !x.is_missing()).collect();
        if obs.len() < 2 {
            return Err(Error::TooFewRows { needed: 2, have: obs.len() });
        }
        means.push(obs.iter().copied().sum::<T>() / T::from_usize_lossy(obs.len()));
    }
    let missing: Vec<(usize, usize)> =
        (0..n).flat_map(|r| (0..p).map(move |c| (r, c))).filter(|&(r, c)| matrix[(r, c)].is_missing()).collect();
    let mut completed = matrix.clone();
    if missing.is_empty() {
        return Ok(ImputationResult { completed, n_iterations: 0, final_change: T::zero(), rank: s, converged: true, missing_cells: 0 });
    }
    for &(r, c) in &missing {
        completed[(r, c)] = means[c];
    }
    let tol = T::lit(settings.tol);
    let denom = T::from_usize_lossy(n.saturating_sub(1).max(1));
    let mut iterations = 0;
    let mut change = T::infinity();
    while iterations < settings.max_iter {
        iterations += 1;
        let mut centered = completed.clone();
        let mu = centered.center_columns();
        let gram = centered.transpose().matmul(&centered);
        let (vals, vecs) = symmetric_eigen(&gram);
        let eig: Vec<T> = vals.iter().map(|&v| v.max(T::zero()) / denom).collect();
        let rank_cap = (n - 1).min(p);
        let trailing = &eig[s.min(rank_cap)..rank_cap];
        let sigma2 = if trailing.is_empty() {
            T::zero()
        } else {
            trailing.iter().copied().sum::<T>() / T::from_usize_lossy(trailing.len())
        };
        // X̂ = X_c V diag(shrink) Vᵀ + μ
        let v = vecs.select_columns(&(0..s).collect::<Vec<_>>());
        let shrink: Vec<T> =
            eig[..s].iter().map(|&l| if l > T::zero() { (T::one() - sigma2 / l).max(T::zero()) } else { T::zero() }).collect();
        let mut scores = centered.matmul(&v);
        for r in 0..n {
            for (x, &f) in scores.row_mut(r).iter_mut().zip(&shrink) {
                *x *= f;
            }
        }
        change = T::zero();
        for &(r, c) in &missing {
            let fitted = mu[c] + (0..s).map(|m| scores[(r, m)] * v[(c, m)]).sum::<T>();
            let d = fitted - completed[(r, c)];
            change += d * d;
            completed[(r, c)] = fitted;
        }
        if change < tol {
            break;
        }
    }
    Ok(ImputationResult {
        completed,
        n_iterations: iterations,
        final_change: change,
        rank: s,
        converged: change < tol,
        missing_cells: missing.len(),
    })
}

/// Correlations of every feature with one component's scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCorrelations<T> {
    /// 1-based component number.
    pub component: usize,
    pub variance_fraction: T,
    pub correlations: Vec<(String, T)>,
    pub top_positive: Vec<(String, T)>,
    pub top_negative: Vec<(String, T)>,
}

const TOP_N: usize = 3;

/// Pearson correlation of each column of `matrix` with each component score,
/// plus the three strongest positive and negative correlates per component
/// (ties keep column order; correlations within `1e-10` of zero are skipped).
pub fn loading_correlations<T: Scalar>(model: &PcaModel<T>, matrix: &Matrix<T>) -> Result<Vec<ComponentCorrelations<T>>> {
    let scores = project(model, matrix)?;
    let zero_band = T::lit(1e-10);
    let mut out = Vec::with_capacity(model.n_components());
    for m in 0..model.n_components() {
        let sc = scores.column(m);
        let correlations: Vec<(String, T)> = (0..matrix.ncols())
            .map(|j| (model.column_names[j].clone(), pearson(&matrix.column(j), &sc)))
            .collect();
        let mut pos: Vec<(String, T)> = correlations.iter().filter(|(_, r)| *r > zero_band).cloned().collect();
        pos.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        pos.truncate(TOP_N);
        let mut neg: Vec<(String, T)> = correlations.iter().filter(|(_, r)| *r < -zero_band).cloned().collect();
        neg.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        neg.truncate(TOP_N);
        out.push(ComponentCorrelations {
            component: m + 1,
            variance_fraction: model.variance_fractions[m],
            correlations,
            top_positive: pos,
            top_negative: neg,
        });
    }
    Ok(out)
}

/// Formats a fraction as a one-decimal percentage, e.g. `0.261 → "26.1%"`.
pub fn format_percent<T: Scalar>(fraction: T) -> String {
    format!("{:.1}%", fraction.as_f64() * 100.0)
}
