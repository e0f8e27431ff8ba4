use crate::error::Result;
use crate::linalg::Matrix;
use crate::panel::FirmPanel;
use crate::scalar::Scalar;

use super::ols::ols;
use super::sample::{extract, Requirement};
use super::{EstimatorDiagnostics, EstimatorResult, FirstStageFit, Method, ProductionCoefficients};

/// OLS of log output on an intercept and log labor, capital and intermediates.
/// The residuals are the Solow residuals.
pub fn ols_solow<T: Scalar>(panel: &FirmPanel<T>) -> Result<EstimatorResult<T>> {
    let s = extract(panel, Requirement::AllInputs)?;
    let n = s.len();
    let x = Matrix::from_columns(&[vec![T::one(); n], s.l.clone(), s.k.clone(), s.m.clone()]);
    let fit = ols(&x, &s.y)?;
    let b = &fit.coefficients;
    let phi_hat: Vec<T> = (0..n).map(|r| fit.fitted[r] - b[1] * s.l[r]).collect();
    let coefficients = ProductionCoefficients { beta_0: b[0], beta_l: b[1], beta_k: b[2], beta_m: Some(b[3]), beta_a: None };
    let first_stage = FirstStageFit {
        rows: s.rows.clone(),
        phi_hat,
        eta_hat: fit.residuals.clone(),
        beta_l_first_stage: Some(b[1]),
        polynomial_degree: 1,
        r_squared: fit.r_squared,
        dropped_rows: s.dropped,
    };
    Ok(EstimatorResult {
        method: Method::Ols,
        coefficients,
        first_stage,
        omega_hat: fit.residuals.clone(),
        tfp_growth: fit.residuals,
        keys: s.keys(),
        diagnostics: EstimatorDiagnostics {
            gmm_objective: None,
            optimizer_iterations: 0,
            objective_evaluations: 0,
            converged_starts: 0,
            sample_size: n,
            dropped_rows: s.dropped,
            lag_pairs: s.lag_pairs().len(),
            start_objectives: Vec::new(),
            moments: Vec::new(),
        },
    })
}
