//! Two-stage control-function estimators.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::panel::FirmPanel;
use crate::scalar::Scalar;

use super::ols::{ls_coefficients, ols};
use super::optim::{minimize_derivative_free, SimplexOptions, SimplexResult};
use super::poly::{polynomial_series, scale_columns};
use super::probit::probit;
use super::sample::{extract, Requirement, Sample};
use super::{
    EstimatorDiagnostics, EstimatorResult, FirstStageFit, GmmSettings, Method, ProductionCoefficients,
};

const LATTICE_SPACING: f64 = 0.15;
const ELASTICITY_BOUNDS: (f64, f64) = (0.01, 0.99);
const AGE_BOUNDS: (f64, f64) = (-0.5, 0.5);

/// Start points on a 3×3 lattice around `center`, center first, clipped to `bounds`.
fn lattice_starts<T: Scalar>(center: [T; 2], spacing: [T; 2], bounds: [(T, T); 2], count: usize) -> Vec<Vec<T>> {
    let mut out = vec![center.to_vec()];
    for a in [-1.0, 0.0, 1.0] {
        for b in [-1.0, 0.0, 1.0] {
            if a == 0.0 && b == 0.0 {
                continue;
            }
            out.push(vec![center[0] + T::lit(a) * spacing[0], center[1] + T::lit(b) * spacing[1]]);
        }
    }
    out.truncate(count);
    for p in &mut out {
        for (v, &(lo, hi)) in p.iter_mut().zip(&bounds) {
            *v = v.max(lo).min(hi);
        }
    }
    out
}

fn simplex_options<T: Scalar>(settings: &GmmSettings, bounds: Vec<(T, T)>) -> SimplexOptions<T> {
    SimplexOptions {
        tol: T::lit(settings.optimizer_tol),
        max_iter: settings.max_iterations,
        initial_step: T::lit(0.1),
        bounds: Some(bounds),
    }
}

fn elasticity_bounds<T: Scalar>() -> (T, T) {
    (T::lit(ELASTICITY_BOUNDS.0), T::lit(ELASTICITY_BOUNDS.1))
}

/// Residuals of `target` on a polynomial in the (scaled) columns of `state`.
fn series_residuals<T: Scalar>(state: &Matrix<T>, target: &[T], degree: usize) -> Option<Vec<T>> {
    let design = polynomial_series(&scale_columns(state), degree).ok()?;
    let b = ls_coefficients(&design, target).ok()?;
    let fitted = design.mat_vec(&b);
    Some(target.iter().zip(&fitted).map(|(&y, &f)| y - f).collect())
}

/// Markov innovations `ξ_t = ω_t − g(ω_{t−1})` over the lag pairs, with `g`
/// a polynomial fitted by least squares. The Gram matrix of a univariate
/// power basis is Hankel in the power sums, so only `O(n·degree)` work is needed.
fn markov_innovations<T: Scalar>(omega: &[T], pairs: &[(usize, usize)], degree: usize) -> Option<Vec<T>> {
    let n = T::from_usize_lossy(pairs.len());
    let mean = pairs.iter().map(|&(p, _)| omega[p]).sum::<T>() / n;
    let var = pairs.iter().map(|&(p, _)| (omega[p] - mean) * (omega[p] - mean)).sum::<T>() / n;
    if !(var > T::zero()) {
        return None;
    }
    let sd = var.sqrt();
    let cols = degree + 1;
    let mut power_sums = vec![T::zero(); 2 * degree + 1];
    let mut cross = vec![T::zero(); cols];
    for &(p, c) in pairs {
        let x = (omega[p] - mean) / sd;
        let mut xp = T::one();
        for (j, s) in power_sums.iter_mut().enumerate() {
            *s += xp;
            if j < cols {
                cross[j] += xp * omega[c];
            }
            xp *= x;
        }
    }
    let gram = Matrix::from_row_major(cols, cols, (0..cols * cols).map(|i| power_sums[i / cols + i % cols]).collect());
    let b = crate::linalg::solve_square(&gram, &cross).ok()?;
    Some(
        pairs
            .iter()
            .map(|&(p, c)| {
                let x = (omega[p] - mean) / sd;
                let g = b.iter().rev().fold(T::zero(), |acc, &bj| acc * x + bj);
                omega[c] - g
            })
            .collect(),
    )
}

/// Sample moments `mean(ξ·z_j)`.
fn sample_moments<T: Scalar>(xi: &[T], instruments: &[Vec<T>]) -> Vec<T> {
    let n = T::from_usize_lossy(xi.len());
    instruments.iter().map(|z| xi.iter().zip(z).map(|(&a, &b)| a * b).sum::<T>() / n).collect()
}

fn moment_objective<T: Scalar>(xi: &[T], instruments: &[Vec<T>]) -> T {
    sample_moments(xi, instruments).into_iter().map(|m| m * m).sum()
}

fn moments_at<T: Scalar>(omega: &[T], pairs: &[(usize, usize)], instruments: &[Vec<T>], degree: usize) -> Vec<T> {
    markov_innovations(omega, pairs, degree).map(|xi| sample_moments(&xi, instruments)).unwrap_or_default()
}

fn require_pairs<T: Scalar>(s: &Sample<T>, settings: &GmmSettings) -> Result<Vec<(usize, usize)>> {
    let pairs = s.lag_pairs();
    if pairs.is_empty() {
        return Err(Error::NoConsecutivePeriods);
    }
    let needed = settings.markov_poly_degree + 2;
    if pairs.len() < needed {
        return Err(Error::TooFewRows { needed, have: pairs.len() });
    }
    Ok(pairs)
}

/// Partially linear first stage: `y` on `[linear | poly(proxies)]`.
fn first_stage<T: Scalar>(s: &Sample<T>, linear: Option<&[T]>, proxies: &[&[T]], degree: usize) -> Result<FirstStageFit<T>> {
    let poly = polynomial_series(&scale_columns(&Matrix::from_columns(proxies)), degree)?;
    let x = match linear {
        Some(l) => Matrix::from_columns(&[l]).hstack(&poly),
        None => poly,
    };
    let fit = ols(&x, &s.y)?;
    let b_l = linear.map(|_| fit.coefficients[0]);
    let phi_hat = match (linear, b_l) {
        (Some(l), Some(b)) => fit.fitted.iter().zip(l).map(|(&f, &lv)| f - b * lv).collect(),
        _ => fit.fitted.clone(),
    };
    Ok(FirstStageFit {
        rows: s.rows.clone(),
        phi_hat,
        eta_hat: fit.residuals,
        beta_l_first_stage: b_l,
        polynomial_degree: degree,
        r_squared: fit.r_squared,
        dropped_rows: s.dropped,
    })
}

fn ols_center<T: Scalar>(s: &Sample<T>, with_m: bool) -> Result<Vec<T>> {
    let n = s.len();
    let mut cols = vec![vec![T::one(); n], s.l.clone(), s.k.clone()];
    if with_m {
        cols.push(s.m.clone());
    }
    ls_coefficients(&Matrix::from_columns(&cols), &s.y)
}

fn assemble<T: Scalar>(
    method: Method,
    s: &Sample<T>,
    first: FirstStageFit<T>,
    mut coefficients: ProductionCoefficients<T>,
    raw_omega: Vec<T>,
    opt: &SimplexResult<T>,
    lag_pairs: usize,
    moments: Vec<T>,
) -> EstimatorResult<T> {
    let n = T::from_usize_lossy(raw_omega.len());
    let center = raw_omega.iter().copied().sum::<T>() / n;
    coefficients.beta_0 = center;
    let omega_hat = raw_omega.iter().map(|&w| w - center).collect();
    let tfp_growth = first.eta_hat.clone();
    EstimatorResult {
        method,
        coefficients,
        diagnostics: EstimatorDiagnostics {
            gmm_objective: Some(opt.value),
            optimizer_iterations: opt.diagnostics.iterations,
            objective_evaluations: opt.diagnostics.evaluations,
            converged_starts: opt.diagnostics.converged_starts,
            sample_size: s.len(),
            dropped_rows: s.dropped,
            lag_pairs,
            start_objectives: opt.diagnostics.start_values.clone(),
            moments,
        },
        first_stage: first,
        omega_hat,
        tfp_growth,
        keys: s.keys(),
    }
}

/// Two-parameter GMM on `ω(β) = φ̂ − β₀·x₀ − β₁·x₁` with Markov innovations
/// and instruments `z(pairs)`.
fn gmm_two<T: Scalar>(
    phi: &[T],
    x: [&[T]; 2],
    pairs: &[(usize, usize)],
    instruments: &[Vec<T>],
    starts: &[Vec<T>],
    settings: &GmmSettings,
) -> Result<SimplexResult<T>> {
    let degree = settings.markov_poly_degree;
    let objective = |b: &[T]| -> T {
        let omega: Vec<T> = (0..phi.len()).map(|r| phi[r] - b[0] * x[0][r] - b[1] * x[1][r]).collect();
        match markov_innovations(&omega, pairs, degree) {
            Some(xi) => moment_objective(&xi, instruments),
            None => T::infinity(),
        }
    };
    let opts = simplex_options(settings, vec![elasticity_bounds(); 2]);
    minimize_derivative_free(objective, starts, &opts)
}

/// Ackerberg–Caves–Frazer: the first stage only purges `η`; `(β_l, β_k)`
/// come from the moments `E[ξ_t·l_{t−1}] = E[ξ_t·k_t] = 0`.
pub fn acf_estimate<T: Scalar>(panel: &FirmPanel<T>, settings: &GmmSettings) -> Result<EstimatorResult<T>> {
    settings.validate()?;
    let s = extract(panel, Requirement::Intermediates)?;
    let first = first_stage(&s, None, &[&s.l, &s.k, &s.m], settings.series_degree)?;
    let pairs = require_pairs(&s, settings)?;
    let instruments = vec![
        pairs.iter().map(|&(p, _)| s.l[p]).collect::<Vec<_>>(),
        pairs.iter().map(|&(_, c)| s.k[c]).collect::<Vec<_>>(),
    ];
    let b = ols_center(&s, true)?;
    let (lo, hi) = elasticity_bounds::<T>();
    let spacing = T::lit(LATTICE_SPACING);
    let starts = lattice_starts([b[1], b[2]], [spacing; 2], [(lo, hi); 2], settings.n_multistarts);
    let opt = gmm_two(&first.phi_hat, [&s.l, &s.k], &pairs, &instruments, &starts, settings)?;
    let (bl, bk) = (opt.argmin[0], opt.argmin[1]);
    let raw: Vec<T> = (0..s.len()).map(|r| first.phi_hat[r] - bl * s.l[r] - bk * s.k[r]).collect();
    let coefs = ProductionCoefficients { beta_0: T::zero(), beta_l: bl, beta_k: bk, beta_m: None, beta_a: None };
    let moments = moments_at(&raw, &pairs, &instruments, settings.markov_poly_degree);
    Ok(assemble(Method::Acf, &s, first, coefs, raw, &opt, pairs.len(), moments))
}

/// Levinsohn–Petrin: `β_l` from the first stage, `(β_k, β_m)` from the
/// moments `E[ξ_t·k_t] = E[ξ_t·m_{t−1}] = 0`.
pub fn lp_estimate<T: Scalar>(panel: &FirmPanel<T>, settings: &GmmSettings) -> Result<EstimatorResult<T>> {
    settings.validate()?;
    let s = extract(panel, Requirement::Intermediates)?;
    let first = first_stage(&s, Some(&s.l), &[&s.m, &s.k], settings.series_degree)?;
    let pairs = require_pairs(&s, settings)?;
    let instruments = vec![
        pairs.iter().map(|&(_, c)| s.k[c]).collect::<Vec<_>>(),
        pairs.iter().map(|&(p, _)| s.m[p]).collect::<Vec<_>>(),
    ];
    let b = ols_center(&s, true)?;
    let (lo, hi) = elasticity_bounds::<T>();
    let spacing = T::lit(LATTICE_SPACING);
    let starts = lattice_starts([b[2], b[3]], [spacing; 2], [(lo, hi); 2], settings.n_multistarts);
    let opt = gmm_two(&first.phi_hat, [&s.k, &s.m], &pairs, &instruments, &starts, settings)?;
    let (bk, bm) = (opt.argmin[0], opt.argmin[1]);
    let bl = first.beta_l_first_stage.unwrap_or_else(T::nan);
    let raw: Vec<T> = (0..s.len()).map(|r| first.phi_hat[r] - bk * s.k[r] - bm * s.m[r]).collect();
    let coefs = ProductionCoefficients { beta_0: T::zero(), beta_l: bl, beta_k: bk, beta_m: Some(bm), beta_a: None };
    let moments = moments_at(&raw, &pairs, &instruments, settings.markov_poly_degree);
    Ok(assemble(Method::Lp, &s, first, coefs, raw, &opt, pairs.len(), moments))
}

/// Olley–Pakes first stage: log output on labor and a polynomial in
/// `(log i, age, log k)`. Rows need positive investment; age falls back to
/// the period index when the panel carries none.
pub fn op_first_stage<T: Scalar>(panel: &FirmPanel<T>, settings: &GmmSettings) -> Result<FirstStageFit<T>> {
    settings.validate()?;
    let s = extract(panel, Requirement::Investment)?;
    first_stage(&s, Some(&s.l), &[&s.i, &s.age, &s.k], settings.series_degree)
}

/// Fitted survival probabilities per sample row; `None` when survival does
/// not vary (nothing to correct for).
fn survival_probabilities<T: Scalar>(panel: &FirmPanel<T>, s: &Sample<T>) -> Result<Option<Vec<T>>> {
    let present: BTreeSet<(&str, i64)> = panel.observations.iter().map(|o| (o.firm_id.as_str(), o.period)).collect();
    let last = panel.observations.iter().map(|o| o.period).max().unwrap_or(0);
    let est: Vec<usize> = (0..s.len()).filter(|&r| s.period[r] < last).collect();
    if est.is_empty() {
        return Ok(None);
    }
    let survived: Vec<bool> = est.iter().map(|&r| present.contains(&(s.firm[r].as_str(), s.period[r] + 1))).collect();
    if survived.iter().all(|&v| v) || survived.iter().all(|&v| !v) {
        return Ok(None);
    }
    let all = scale_columns(&Matrix::from_columns(&[&s.i, &s.k, &s.age]));
    let design = polynomial_series(&all, 2)?;
    let fit = probit(&design.select_rows(&est), &survived, 100, T::lit(1e-10))?;
    if fit.coefficients.is_empty() {
        return Ok(None);
    }
    Ok(Some(design.mat_vec(&fit.coefficients).into_iter().map(crate::stats::normal_cdf).collect()))
}

struct OpSecondStage<T> {
    coefficients: ProductionCoefficients<T>,
    opt: SimplexResult<T>,
    pairs: usize,
}

fn op_second_stage_inner<T: Scalar>(
    fit: &FirstStageFit<T>,
    s: &Sample<T>,
    panel: &FirmPanel<T>,
    settings: &GmmSettings,
) -> Result<OpSecondStage<T>> {
    let pairs = require_pairs(s, settings)?;
    let bl = fit
        .beta_l_first_stage
        .ok_or_else(|| Error::SchemaMismatch("first stage did not identify the labor coefficient".into()))?;
    let survival = if settings.survival_correction { survival_probabilities(panel, s)? } else { None };
    let target: Vec<T> = pairs.iter().map(|&(_, c)| s.y[c] - bl * s.l[c]).collect();
    let phi = &fit.phi_hat;
    let degree = settings.markov_poly_degree;
    let n = T::from_usize_lossy(pairs.len());
    let objective = |b: &[T]| -> T {
        let (bk, ba) = (b[0], b[1]);
        let z: Vec<T> = pairs.iter().zip(&target).map(|(&(_, c), &t)| t - bk * s.k[c] - ba * s.age[c]).collect();
        let h: Vec<T> = pairs.iter().map(|&(p, _)| phi[p] - bk * s.k[p] - ba * s.age[p]).collect();
        let state = match &survival {
            Some(pr) => Matrix::from_columns(&[h, pairs.iter().map(|&(p, _)| pr[p]).collect()]),
            None => Matrix::from_columns(&[h]),
        };
        match series_residuals(&state, &z, degree) {
            Some(e) => e.iter().map(|&v| v * v).sum::<T>() / n,
            None => T::infinity(),
        }
    };
    let center = ols_center(s, false)?;
    let (lo, hi) = elasticity_bounds::<T>();
    let age_bounds = (T::lit(AGE_BOUNDS.0), T::lit(AGE_BOUNDS.1));
    let spacing = [T::lit(LATTICE_SPACING), T::lit(0.05)];
    let starts = lattice_starts([center[2], T::zero()], spacing, [(lo, hi), age_bounds], settings.n_multistarts);
    let opts = simplex_options(settings, vec![(lo, hi), age_bounds]);
    let opt = minimize_derivative_free(objective, &starts, &opts)?;
    let coefficients = ProductionCoefficients {
        beta_0: T::zero(),
        beta_l: bl,
        beta_k: opt.argmin[0],
        beta_m: None,
        beta_a: Some(opt.argmin[1]),
    };
    Ok(OpSecondStage { coefficients, opt, pairs: pairs.len() })
}

/// Olley–Pakes second stage: nonlinear least squares of
/// `y_t − β̂_l·l_t − β_k·k_t − β_a·a_t` on a polynomial in
/// `φ̂_{t−1} − β_k·k_{t−1} − β_a·a_{t−1}` (and the fitted survival
/// probability when `survival_correction` is set).
pub fn op_second_stage<T: Scalar>(
    fit: &FirstStageFit<T>,
    panel: &FirmPanel<T>,
    settings: &GmmSettings,
) -> Result<ProductionCoefficients<T>> {
    settings.validate()?;
    let s = extract(panel, Requirement::Investment)?;
    if s.rows != fit.rows {
        return Err(Error::SchemaMismatch("first-stage fit does not belong to this panel".into()));
    }
    let mut out = op_second_stage_inner(fit, &s, panel, settings)?;
    let raw_mean = (0..s.len())
        .map(|r| fit.phi_hat[r] - out.coefficients.beta_k * s.k[r] - out.coefficients.beta_a.unwrap_or(T::zero()) * s.age[r])
        .sum::<T>()
        / T::from_usize_lossy(s.len());
    out.coefficients.beta_0 = raw_mean;
    Ok(out.coefficients)
}

pub fn op_estimate<T: Scalar>(panel: &FirmPanel<T>, settings: &GmmSettings) -> Result<EstimatorResult<T>> {
    settings.validate()?;
    let s = extract(panel, Requirement::Investment)?;
    let first = first_stage(&s, Some(&s.l), &[&s.i, &s.age, &s.k], settings.series_degree)?;
    let second = op_second_stage_inner(&first, &s, panel, settings)?;
    let c = &second.coefficients;
    let ba = c.beta_a.unwrap_or(T::zero());
    let raw: Vec<T> = (0..s.len()).map(|r| first.phi_hat[r] - c.beta_k * s.k[r] - ba * s.age[r]).collect();
    let coefs = second.coefficients.clone();
    Ok(assemble(Method::Op, &s, first, coefs, raw, &second.opt, second.pairs, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_has_center_first_and_is_clipped() {
        let s = lattice_starts([0.05_f64, 0.5], [0.15; 2], [(0.01, 0.99); 2], 8);
        assert_eq!(s.len(), 8);
        assert_eq!(s[0], vec![0.05, 0.5]);
        assert!(s.iter().all(|p| p.iter().all(|&v| (0.01..=0.99).contains(&v))));
    }

    #[test]
    fn innovations_vanish_for_exact_ar1() {
        let omega: Vec<f64> = (0..20).map(|t| 0.8_f64.powi(t)).collect();
        let pairs: Vec<(usize, usize)> = (1..20).map(|t| (t - 1, t)).collect();
        let xi = markov_innovations(&omega, &pairs, 1).unwrap();
        assert!(xi.iter().all(|v| v.abs() < 1e-12));
    }
}
