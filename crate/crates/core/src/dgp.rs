//! Synthetic firm panels with known production coefficients.
//!
//! Log output is Cobb-Douglas in labor, capital and intermediates plus a
//! latent AR(1) productivity `ω` and an ex-post shock `η`. Capital follows the
//! perpetual-inventory law with investment from a log-linear policy that is
//! strictly increasing in `ω`, which makes investment an invertible proxy.
//! Labor and intermediates load on `ω`, so OLS suffers simultaneity bias.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{FirmObservation, FirmPanel, SignConvention, VariableSpec};
use crate::rng::substream;
use crate::scalar::Scalar;

/// Log labor demand `l_t = intercept + omega_loading · ω + noise_sd · e_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaborDemand {
    pub intercept: f64,
    pub omega_loading: f64,
    pub noise_sd: f64,
    /// When set, labor is chosen one period ahead and loads on `ω_{t−1}`.
    pub lagged: bool,
}

impl Default for LaborDemand {
    fn default() -> Self {
        Self { intercept: 1.0, omega_loading: 0.5, noise_sd: 0.3, lagged: true }
    }
}

/// Log intermediates demand
/// `m_t = intercept + ψ_λ(omega_loading · ω_t + capital_loading · k_t) + noise_sd · u_t`
/// with `ψ_λ(x) = (e^{λx} − 1)/λ` (`ψ_0(x) = x`).
///
/// A positive curvature keeps `m` monotone in `ω` while making `ω` a
/// non-linear function of the observables, which is what separates OLS from
/// the control-function estimators when `m` is itself a production input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntermediatesDemand {
    pub intercept: f64,
    pub omega_loading: f64,
    pub capital_loading: f64,
    pub curvature: f64,
    pub noise_sd: f64,
}

impl Default for IntermediatesDemand {
    fn default() -> Self {
        Self { intercept: 1.0, omega_loading: 1.0, capital_loading: 0.0, curvature: 1.5, noise_sd: 0.0 }
    }
}

impl IntermediatesDemand {
    fn psi(&self, x: f64) -> f64 {
        if self.curvature == 0.0 {
            x
        } else {
            (self.curvature * x).exp_m1() / self.curvature
        }
    }
}

/// Optional block of accounting variables and categorical labels.
///
/// Each firm belongs to one of `n_groups` latent types with distinct means
/// on `n_factors` factors. Variable `j` is `±exp(level_j + B_j·z + γ_j·ω +
/// noise)`, where `z` holds the firm's factor scores. The first third of
/// the variables load on productivity with `γ = omega_loading`. Every
/// fourth variable is expense-like (non-positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccountingBlock {
    pub n_variables: usize,
    pub n_factors: usize,
    pub n_groups: usize,
    pub group_separation: f64,
    pub omega_loading: f64,
    pub noise_sd: f64,
    /// Share of cells blanked at random in every variable.
    pub missing_rate: f64,
    /// Extra variables observed for only 40% of rows.
    pub sparse_variables: usize,
    pub countries: Vec<String>,
    pub sectors: Vec<String>,
}

impl Default for AccountingBlock {
    fn default() -> Self {
        Self {
            n_variables: 20,
            n_factors: 3,
            n_groups: 3,
            group_separation: 2.0,
            omega_loading: 0.5,
            noise_sd: 0.2,
            missing_rate: 0.05,
            sparse_variables: 2,
            countries: ["DE", "ES", "FR", "IT"].map(String::from).to_vec(),
            sectors: ["C10", "C20", "C25", "C28"].map(String::from).to_vec(),
        }
    }
}

impl AccountingBlock {
    pub fn variable_names(&self) -> Vec<String> {
        (1..=self.n_variables + self.sparse_variables).map(|j| format!("acc{j:02}")).collect()
    }

    pub fn is_expense(j: usize) -> bool {
        j % 4 == 3
    }
}

/// Structural parameters of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpConfig {
    pub alpha_0: f64,
    pub alpha_l: f64,
    pub alpha_k: f64,
    pub alpha_m: f64,
    /// Age elasticity; zero by default.
    pub alpha_a: f64,
    pub delta: f64,
    pub rho: f64,
    pub sigma_xi: f64,
    pub sigma_eta: f64,
    pub n_firms: usize,
    pub n_periods: usize,
    /// `(c0, c1, c2)` of `i = exp(c0 + c1·ω + c2·k)`; `c1 > 0`.
    pub investment_coeffs: (f64, f64, f64),
    /// Firms whose productivity falls below this value leave the market.
    pub exit_threshold: Option<f64>,
    /// Dispersion of the pre-sample `ω`; the stationary sd when unset.
    pub initial_omega_sd: Option<f64>,
    pub labor: LaborDemand,
    pub intermediates: IntermediatesDemand,
    pub initial_log_capital_mean: f64,
    pub initial_log_capital_sd: f64,
    /// Initial ages are uniform on `1..=max_initial_age`.
    pub max_initial_age: u32,
    pub accounting: Option<AccountingBlock>,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            alpha_0: 0.0,
            alpha_l: 0.6,
            alpha_k: 0.3,
            alpha_m: 0.2,
            alpha_a: 0.0,
            delta: 0.1,
            rho: 0.7,
            sigma_xi: 0.3,
            sigma_eta: 0.1,
            n_firms: 1000,
            n_periods: 10,
            investment_coeffs: (0.5, 1.0, 0.5),
            exit_threshold: None,
            initial_omega_sd: None,
            labor: LaborDemand::default(),
            intermediates: IntermediatesDemand::default(),
            initial_log_capital_mean: 3.0,
            initial_log_capital_sd: 0.5,
            max_initial_age: 20,
            accounting: None,
            seed: 0,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Err(Error::InvalidConfig { field: field.into(), reason: reason.into() });
        for (name, v) in [("alpha_l", self.alpha_l), ("alpha_k", self.alpha_k), ("alpha_m", self.alpha_m)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(name, "output elasticities must lie in (0, 1)");
            }
        }
        if !(0.0..1.0).contains(&self.delta) {
            return bad("delta", "depreciation must lie in [0, 1)");
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return bad("rho", "persistence must lie in (-1, 1)");
        }
        if !(self.sigma_xi >= 0.0) {
            return bad("sigma_xi", "must be non-negative");
        }
        if !(self.sigma_eta >= 0.0) {
            return bad("sigma_eta", "must be non-negative");
        }
        if self.n_firms == 0 {
            return bad("n_firms", "must be positive");
        }
        if self.n_periods == 0 {
            return bad("n_periods", "must be positive");
        }
        if !(self.investment_coeffs.1 > 0.0) {
            return bad("investment_coeffs", "c1 must be positive so investment increases in productivity");
        }
        if !(self.labor.noise_sd >= 0.0) || !(self.intermediates.noise_sd >= 0.0) {
            return bad("noise_sd", "must be non-negative");
        }
        if self.initial_omega_sd.is_some_and(|v| !(v >= 0.0)) {
            return bad("initial_omega_sd", "must be non-negative");
        }
        if !(self.initial_log_capital_sd >= 0.0) {
            return bad("initial_log_capital_sd", "must be non-negative");
        }
        if self.max_initial_age == 0 {
            return bad("max_initial_age", "must be positive");
        }
        if let Some(a) = &self.accounting {
            if a.n_factors == 0 || a.n_groups == 0 {
                return bad("accounting", "needs at least one factor and one group");
            }
            if !(0.0..1.0).contains(&a.missing_rate) {
                return bad("accounting.missing_rate", "must lie in [0, 1)");
            }
            if a.countries.is_empty() || a.sectors.is_empty() {
                return bad("accounting", "country and sector lists must be non-empty");
            }
        }
        Ok(())
    }

    /// Stationary standard deviation of `ω`.
    pub fn omega_stationary_sd(&self) -> f64 {
        self.sigma_xi / (1.0 - self.rho * self.rho).sqrt()
    }
}

/// Perpetual-inventory capital law `(1 − δ)·k + i`.
pub fn capital_accumulation<T: Scalar>(k: T, i: T, delta: T) -> T {
    (T::one() - delta) * k + i
}

/// Investment `exp(c0 + c1·ω + c2·k)` with `k` in logs.
pub fn investment_policy<T: Scalar>(omega: T, log_capital: T, coeffs: (T, T, T)) -> T {
    (coeffs.0 + coeffs.1 * omega + coeffs.2 * log_capital).exp()
}

/// Latent quantities behind a simulated panel, row-aligned with it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub firm_id: Vec<String>,
    pub period: Vec<i64>,
    pub omega: Vec<f64>,
    /// Innovation `ξ_t` drawn for the row's period.
    pub xi: Vec<f64>,
    /// `false` on a firm's last row when it exits afterwards.
    pub survived: Vec<bool>,
}

impl SyntheticTruth {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["firm_id", "period", "omega", "xi", "survived"])?;
        for i in 0..self.len() {
            w.write_record([
                self.firm_id[i].clone(),
                self.period[i].to_string(),
                format!("{}", self.omega[i]),
                format!("{}", self.xi[i]),
                (self.survived[i] as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn firm_label(index: usize) -> String {
    format!("F{index:06}")
}

/// Simulates `n_firms × n_periods` observations (fewer when firms exit).
pub fn simulate_panel<T: Scalar>(config: &DgpConfig) -> Result<(FirmPanel<T>, SyntheticTruth)> {
    config.validate()?;
    let c = config;
    let mut observations = Vec::with_capacity(c.n_firms * c.n_periods);
    let mut truth = SyntheticTruth {
        firm_id: Vec::new(),
        period: Vec::new(),
        omega: Vec::new(),
        xi: Vec::new(),
        survived: Vec::new(),
    };
    let cast = |x: f64| T::from_f64(x).unwrap_or_else(T::nan);
    let acct = c.accounting.as_ref().map(|a| AccountingDesign::draw(a, c.seed));
    let stationary_sd = c.initial_omega_sd.unwrap_or_else(|| c.omega_stationary_sd());

    for f in 0..c.n_firms {
        let mut rng = substream(c.seed, "dgp", f as u64);
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let mut omega_prev = stationary_sd * normal();
        let mut log_k = c.initial_log_capital_mean + c.initial_log_capital_sd * normal();
        let mut capital = log_k.exp();
        let id = firm_label(f);
        // one uniform draw for age; consumed after the normals above so layout is fixed
        let age0 = {
            let mut r = substream(c.seed, "dgp-age", f as u64);
            r.random_range(1..=c.max_initial_age) as f64
        };
        let mut acct_firm = acct.as_ref().map(|d| d.firm(c.seed, f));

        for t in 0..c.n_periods {
            let xi = c.sigma_xi * normal();
            let omega = c.rho * omega_prev + xi;
            if t > 0 {
                if let Some(thr) = c.exit_threshold {
                    if omega < thr {
                        if let Some(last) = truth.survived.last_mut() {
                            *last = false;
                        }
                        break;
                    }
                }
            }
            let e_l = normal();
            let e_m = normal();
            let eta = c.sigma_eta * normal();
            log_k = capital.ln();
            let labor_state = if c.labor.lagged { omega_prev } else { omega };
            let l = c.labor.intercept + c.labor.omega_loading * labor_state + c.labor.noise_sd * e_l;
            let im = &c.intermediates;
            let m = im.intercept + im.psi(im.omega_loading * omega + im.capital_loading * log_k) + im.noise_sd * e_m;
            let age = age0 + t as f64;
            let y = c.alpha_0 + c.alpha_l * l + c.alpha_k * log_k + c.alpha_m * m + c.alpha_a * age + omega + eta;
            let (c0, c1, c2) = c.investment_coeffs;
            let invest = investment_policy(omega, log_k, (c0, c1, c2));

            let mut o = FirmObservation::new(id.clone(), t as i64);
            o.output = Some(cast(y.exp()));
            o.labor = Some(cast(l.exp()));
            o.capital = Some(cast(capital));
            o.intermediates = Some(cast(m.exp()));
            o.investment = Some(cast(invest));
            o.age = Some(cast(age));
            if let (Some(d), Some(firm)) = (&acct, acct_firm.as_mut()) {
                d.fill(firm, omega, &mut o, &cast);
            }
            observations.push(o);
            truth.firm_id.push(id.clone());
            truth.period.push(t as i64);
            truth.omega.push(omega);
            truth.xi.push(xi);
            truth.survived.push(true);

            capital = capital_accumulation(capital, invest, c.delta);
            omega_prev = omega;
        }
    }
    let catalog = acct.as_ref().map(|d| d.catalog()).unwrap_or_default();
    let panel = FirmPanel::new(observations, catalog)?;
    Ok((panel, truth))
}

struct AccountingDesign {
    block: AccountingBlock,
    names: Vec<String>,
    levels: Vec<f64>,
    loadings: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
}

struct AccountingFirm {
    rng: crate::rng::StreamRng,
    scores: Vec<f64>,
    country: String,
    sector: String,
}

impl AccountingDesign {
    fn draw(block: &AccountingBlock, seed: u64) -> Self {
        let mut rng = substream(seed, "dgp-accounting-design", 0);
        let p = block.n_variables + block.sparse_variables;
        let levels = (0..p).map(|_| rng.random_range(2.0..6.0)).collect();
        let loadings = (0..p)
            .map(|_| (0..block.n_factors).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let centers = (0..block.n_groups)
            .map(|g| {
                (0..block.n_factors)
                    .map(|f| if g > 0 && f == (g - 1) % block.n_factors { block.group_separation } else { 0.0 })
                    .collect()
            })
            .collect();
        Self { block: block.clone(), names: block.variable_names(), levels, loadings, centers }
    }

    fn catalog(&self) -> Vec<VariableSpec> {
        self.names
            .iter()
            .enumerate()
            .map(|(j, n)| VariableSpec {
                name: n.clone(),
                sign: if AccountingBlock::is_expense(j) { SignConvention::ExpenseLike } else { SignConvention::RevenueLike },
            })
            .collect()
    }

    fn firm(&self, seed: u64, f: usize) -> AccountingFirm {
        let b = &self.block;
        let mut rng = substream(seed, "dgp-accounting", f as u64);
        let group = rng.random_range(0..b.n_groups);
        let scores = self.centers[group].iter().map(|&c| c + rng.sample::<f64, _>(StandardNormal)).collect();
        let country = b.countries[rng.random_range(0..b.countries.len())].clone();
        // the firm's type shows up in its sector most of the time
        let sector = if rng.random::<f64>() < 0.7 {
            b.sectors[group % b.sectors.len()].clone()
        } else {
            b.sectors[rng.random_range(0..b.sectors.len())].clone()
        };
        AccountingFirm { rng, scores, country, sector }
    }

    fn fill<T: Scalar>(&self, firm: &mut AccountingFirm, omega: f64, o: &mut FirmObservation<T>, cast: &impl Fn(f64) -> T) {
        let b = &self.block;
        let tracked = b.n_variables.div_ceil(3);
        for (j, name) in self.names.iter().enumerate() {
            let noise = b.noise_sd * firm.rng.sample::<f64, _>(StandardNormal);
            let u: f64 = firm.rng.random();
            let gamma = if j < tracked { b.omega_loading } else { 0.0 };
            let z: f64 = self.loadings[j].iter().zip(&firm.scores).map(|(l, s)| l * s).sum();
            let magnitude = (self.levels[j] + z + gamma * omega + noise).exp();
            let value = if AccountingBlock::is_expense(j) { -magnitude } else { magnitude };
            let missing_rate = if j < b.n_variables { b.missing_rate } else { 0.6 };
            o.accounting.insert(name.clone(), (u >= missing_rate).then(|| cast(value)));
        }
        o.categories.insert("country".into(), firm.country.clone());
        o.categories.insert("sector".into(), firm.sector.clone());
    }
}
