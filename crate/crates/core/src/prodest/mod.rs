//! Production-function estimation and TFP extraction.
//!
//! Four estimators share one output type: OLS on logs (Solow residual),
//! Olley–Pakes (investment proxy, NLS second stage), Levinsohn–Petrin
//! (intermediates proxy, GMM second stage) and Ackerberg–Caves–Frazer
//! (intermediates proxy, labor identified in the GMM stage).

mod control;
pub mod ols;
pub mod optim;
pub mod poly;
pub mod probit;
mod sample;
mod solow;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use control::{acf_estimate, lp_estimate, op_estimate, op_first_stage, op_second_stage};
pub use ols::{ols, OlsFit};
pub use optim::{minimize_derivative_free, SimplexDiagnostics, SimplexOptions, SimplexResult};
pub use poly::{monomial_exponents, polynomial_series, MAX_SERIES_DEGREE};
pub use solow::ols_solow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ols,
    Op,
    Lp,
    Acf,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Ols => "OLS",
            Method::Op => "OP",
            Method::Lp => "LP",
            Method::Acf => "ACF",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(Method::Ols),
            "op" => Ok(Method::Op),
            "lp" => Ok(Method::Lp),
            "acf" => Ok(Method::Acf),
            other => Err(Error::InvalidConfig { field: "method".into(), reason: format!("unknown method `{other}`") }),
        }
    }
}

/// Output elasticities. Which optional fields are set depends on the method:
/// OLS sets `beta_m`; LP sets `beta_m`; ACF sets neither; OP sets `beta_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionCoefficients<T> {
    pub beta_0: T,
    pub beta_l: T,
    pub beta_k: T,
    pub beta_m: Option<T>,
    pub beta_a: Option<T>,
}

/// First-stage partially linear regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStageFit<T> {
    /// Panel row index of every sample row.
    pub rows: Vec<usize>,
    pub phi_hat: Vec<T>,
    pub eta_hat: Vec<T>,
    /// Labor coefficient when the first stage identifies it (OLS, OP, LP).
    pub beta_l_first_stage: Option<T>,
    pub polynomial_degree: usize,
    pub r_squared: T,
    /// Rows removed by positivity or missing-value filters.
    pub dropped_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorDiagnostics<T> {
    /// Second-stage objective at the estimate (`None` for OLS).
    pub gmm_objective: Option<T>,
    pub optimizer_iterations: usize,
    pub objective_evaluations: usize,
    pub converged_starts: usize,
    pub sample_size: usize,
    pub dropped_rows: usize,
    /// Consecutive-period pairs used by the second stage.
    pub lag_pairs: usize,
    /// Second-stage objective at each multistart point.
    pub start_objectives: Vec<T>,
    /// Sample moments at the estimate (GMM methods only).
    pub moments: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult<T> {
    pub method: Method,
    pub coefficients: ProductionCoefficients<T>,
    pub first_stage: FirstStageFit<T>,
    /// Demeaned productivity estimate per sample row.
    pub omega_hat: Vec<T>,
    /// Per-row TFP measure used downstream (first-stage residual; OLS residual).
    pub tfp_growth: Vec<T>,
    /// `(firm_id, period)` of every sample row.
    pub keys: Vec<(String, i64)>,
    pub diagnostics: EstimatorDiagnostics<T>,
}

impl<T: Scalar> EstimatorResult<T> {
    /// Within-firm first differences of `tfp_growth`; `None` on a firm's first
    /// row or after a gap in periods.
    pub fn tfp_first_difference(&self) -> Vec<Option<T>> {
        let mut out = Vec::with_capacity(self.keys.len());
        for i in 0..self.keys.len() {
            let prev = i.checked_sub(1).filter(|&j| self.keys[j].0 == self.keys[i].0 && self.keys[j].1 + 1 == self.keys[i].1);
            out.push(prev.map(|j| self.tfp_growth[i] - self.tfp_growth[j]));
        }
        out
    }

    /// Writes the `(firm_id, period, tfp_growth, omega_hat)` sidecar.
    pub fn write_tfp_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["firm_id", "period", "tfp_growth", "omega_hat"])?;
        for (i, (f, p)) in self.keys.iter().enumerate() {
            w.write_record([
                f.clone(),
                p.to_string(),
                format!("{}", self.tfp_growth[i].as_f64()),
                format!("{}", self.omega_hat[i].as_f64()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Tuning of the semi-parametric estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmSettings {
    pub markov_poly_degree: usize,
    pub series_degree: usize,
    pub optimizer_tol: f64,
    pub max_iterations: usize,
    pub n_multistarts: usize,
    pub survival_correction: bool,
}

impl Default for GmmSettings {
    fn default() -> Self {
        Self {
            markov_poly_degree: 3,
            series_degree: 3,
            optimizer_tol: 1e-8,
            max_iterations: 2000,
            n_multistarts: 8,
            survival_correction: false,
        }
    }
}

impl GmmSettings {
    pub fn validate(&self) -> Result<()> {
        for (field, d) in [("markov_poly_degree", self.markov_poly_degree), ("series_degree", self.series_degree)] {
            if d == 0 {
                return Err(Error::InvalidConfig { field: field.into(), reason: "must be at least 1".into() });
            }
            if d > MAX_SERIES_DEGREE {
                return Err(Error::DegreeTooHigh(d));
            }
        }
        if self.n_multistarts == 0 {
            return Err(Error::InvalidConfig { field: "n_multistarts".into(), reason: "must be at least 1".into() });
        }
        if !(self.optimizer_tol > 0.0) {
            return Err(Error::InvalidConfig { field: "optimizer_tol".into(), reason: "must be positive".into() });
        }
        Ok(())
    }
}

/// Runs the named estimator.
pub fn estimate<T: Scalar>(
    method: Method,
    panel: &crate::panel::FirmPanel<T>,
    settings: &GmmSettings,
) -> Result<EstimatorResult<T>> {
    match method {
        Method::Ols => ols_solow(panel),
        Method::Op => op_estimate(panel, settings),
        Method::Lp => lp_estimate(panel, settings),
        Method::Acf => acf_estimate(panel, settings),
    }
}
