//! Firm-level panel ingestion, per-worker transforms, missing-data screening,
//! standardization and descriptive statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::stats;

/// Sign convention of an accounting variable. Expense-like items are stored
/// as non-positive numbers and are never flipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    RevenueLike,
    ExpenseLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub sign: SignConvention,
}

/// One firm in one period. Missing numeric values are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmObservation<T> {
    pub firm_id: String,
    pub period: i64,
    pub output: Option<T>,
    pub labor: Option<T>,
    pub capital: Option<T>,
    pub intermediates: Option<T>,
    pub investment: Option<T>,
    pub age: Option<T>,
    pub accounting: BTreeMap<String, Option<T>>,
    pub categories: BTreeMap<String, String>,
}

impl<T: Scalar> FirmObservation<T> {
    pub fn new(firm_id: impl Into<String>, period: i64) -> Self {
        Self {
            firm_id: firm_id.into(),
            period,
            output: None,
            labor: None,
            capital: None,
            intermediates: None,
            investment: None,
            age: None,
            accounting: BTreeMap::new(),
            categories: BTreeMap::new(),
        }
    }

    /// Looks a variable up by name: the core fields first, then the accounting map.
    pub fn value(&self, name: &str) -> Option<T> {
        match name {
            "output" => self.output,
            "labor" => self.labor,
            "capital" => self.capital,
            "intermediates" => self.intermediates,
            "investment" => self.investment,
            "age" => self.age,
            other => self.accounting.get(other).copied().flatten(),
        }
    }

    fn slot_mut(&mut self, name: &str) -> Option<&mut Option<T>> {
        match name {
            "output" => Some(&mut self.output),
            "labor" => Some(&mut self.labor),
            "capital" => Some(&mut self.capital),
            "intermediates" => Some(&mut self.intermediates),
            "investment" => Some(&mut self.investment),
            "age" => Some(&mut self.age),
            other => self.accounting.get_mut(other),
        }
    }
}

/// Names of the core production fields addressable by [`FirmObservation::value`].
pub const CORE_FIELDS: [&str; 6] = ["output", "labor", "capital", "intermediates", "investment", "age"];

/// Long-format panel sorted by `(firm_id, period)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmPanel<T> {
    pub observations: Vec<FirmObservation<T>>,
    pub variable_catalog: Vec<VariableSpec>,
}

impl<T: Scalar> FirmPanel<T> {
    /// Sorts the observations and validates key uniqueness and catalog coverage.
    pub fn new(mut observations: Vec<FirmObservation<T>>, variable_catalog: Vec<VariableSpec>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyPanel);
        }
        observations.sort_by(|a, b| a.firm_id.cmp(&b.firm_id).then(a.period.cmp(&b.period)));
        for w in observations.windows(2) {
            if w[0].firm_id == w[1].firm_id && w[0].period == w[1].period {
                return Err(Error::DuplicateKey { firm: w[1].firm_id.clone(), period: w[1].period });
            }
        }
        let known: BTreeSet<&str> = variable_catalog.iter().map(|v| v.name.as_str()).collect();
        for obs in &observations {
            if let Some(k) = obs.accounting.keys().find(|k| !known.contains(k.as_str())) {
                return Err(Error::UnknownVariable(k.clone()));
            }
        }
        Ok(Self { observations, variable_catalog })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn catalog_names(&self) -> Vec<String> {
        self.variable_catalog.iter().map(|v| v.name.clone()).collect()
    }

    pub fn has_variable(&self, name: &str) -> bool {
        CORE_FIELDS.contains(&name) || self.variable_catalog.iter().any(|v| v.name == name)
    }

    /// Distinct firm ids in panel order.
    pub fn firm_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for o in &self.observations {
            if out.last() != Some(&o.firm_id) {
                out.push(o.firm_id.clone());
            }
        }
        out
    }

    /// Values of one variable, `None` where missing.
    pub fn values(&self, name: &str) -> Vec<Option<T>> {
        self.observations.iter().map(|o| o.value(name)).collect()
    }

    /// `n × p` matrix of the listed variables with NaN for missing cells.
    pub fn matrix(&self, vars: &[String]) -> Result<Matrix<T>> {
        for v in vars {
            if !self.has_variable(v) {
                return Err(Error::UnknownVariable(v.clone()));
            }
        }
        let mut m = Matrix::filled(self.len(), vars.len(), T::missing());
        for (i, o) in self.observations.iter().enumerate() {
            for (j, v) in vars.iter().enumerate() {
                if let Some(x) = o.value(v) {
                    m[(i, j)] = x;
                }
            }
        }
        Ok(m)
    }

    /// Per-firm average over the periods in `[from, to]` (missing values ignored),
    /// giving one observation per firm stamped with period `to`. Categories
    /// come from the firm's latest period in the window.
    pub fn cross_section_average(&self, from: i64, to: i64) -> Result<Self> {
        let mut out = Vec::new();
        let mut i = 0;
        let obs = &self.observations;
        while i < obs.len() {
            let mut j = i;
            while j < obs.len() && obs[j].firm_id == obs[i].firm_id {
                j += 1;
            }
            let window: Vec<&FirmObservation<T>> =
                obs[i..j].iter().filter(|o| o.period >= from && o.period <= to).collect();
            if let Some(last) = window.last() {
                let mut avg = FirmObservation::new(last.firm_id.clone(), to);
                avg.categories = last.categories.clone();
                let avg_of = |name: &str| -> Option<T> {
                    let xs: Vec<T> = window.iter().filter_map(|o| o.value(name)).collect();
                    (!xs.is_empty()).then(|| stats::mean(&xs))
                };
                for f in CORE_FIELDS {
                    *avg.slot_mut(f).expect("core field") = avg_of(f);
                }
                for v in &self.variable_catalog {
                    avg.accounting.insert(v.name.clone(), avg_of(&v.name));
                }
                out.push(avg);
            }
            i = j;
        }
        Self::new(out, self.variable_catalog.clone())
    }

    /// Observations restricted to one period.
    pub fn period_slice(&self, period: i64) -> Result<Self> {
        let obs: Vec<_> = self.observations.iter().filter(|o| o.period == period).cloned().collect();
        Self::new(obs, self.variable_catalog.clone())
    }
}

/// Column-name mapping from a CSV header to panel fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSchema {
    pub firm: String,
    pub period: String,
    pub output: String,
    pub labor: String,
    pub capital: String,
    #[serde(default)]
    pub intermediates: Option<String>,
    #[serde(default)]
    pub investment: Option<String>,
    #[serde(default)]
    pub age: Option<String>,
    /// Columns read as categorical labels (country, sector, taxonomy).
    #[serde(default)]
    pub categories: Vec<String>,
    /// Accounting columns; `None` means every remaining column.
    #[serde(default)]
    pub accounting: Option<Vec<String>>,
    /// Accounting columns following the expense (non-positive) convention.
    #[serde(default)]
    pub expense_like: Vec<String>,
}

impl Default for PanelSchema {
    /// The layout written by [`write_panel_csv`].
    fn default() -> Self {
        Self {
            firm: "firm_id".into(),
            period: "period".into(),
            output: "output".into(),
            labor: "labor".into(),
            capital: "capital".into(),
            intermediates: Some("intermediates".into()),
            investment: Some("investment".into()),
            age: Some("age".into()),
            categories: Vec::new(),
            accounting: None,
            expense_like: Vec::new(),
        }
    }
}

impl PanelSchema {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn parse_cell<T: Scalar>(s: &str) -> Option<T> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite()).and_then(T::from_f64)
}

/// Reads a panel from CSV text.
pub fn read_panel<T: Scalar, R: Read>(reader: R, schema: &PanelSchema) -> Result<FirmPanel<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| Error::MissingColumn(name.to_owned()));
    let firm_c = need(&schema.firm)?;
    let period_c = need(&schema.period)?;
    let output_c = need(&schema.output)?;
    let labor_c = need(&schema.labor)?;
    let capital_c = need(&schema.capital)?;
    let opt_col = |name: &Option<String>| -> Result<Option<usize>> { name.as_deref().map(need).transpose() };
    let interm_c = opt_col(&schema.intermediates)?;
    let invest_c = opt_col(&schema.investment)?;
    let age_c = opt_col(&schema.age)?;
    let cat_cols: Vec<(String, usize)> =
        schema.categories.iter().map(|c| need(c).map(|i| (c.clone(), i))).collect::<Result<_>>()?;

    let mut used: BTreeSet<usize> = [firm_c, period_c, output_c, labor_c, capital_c].into_iter().collect();
    used.extend(interm_c);
    used.extend(invest_c);
    used.extend(age_c);
    used.extend(cat_cols.iter().map(|c| c.1));
    let acct_cols: Vec<(String, usize)> = match &schema.accounting {
        Some(list) => list.iter().map(|c| need(c).map(|i| (c.clone(), i))).collect::<Result<_>>()?,
        None => header.iter().enumerate().filter(|(i, _)| !used.contains(i)).map(|(i, h)| (h.clone(), i)).collect(),
    };
    let catalog: Vec<VariableSpec> = acct_cols
        .iter()
        .map(|(n, _)| VariableSpec {
            name: n.clone(),
            sign: if schema.expense_like.contains(n) { SignConvention::ExpenseLike } else { SignConvention::RevenueLike },
        })
        .collect();

    let mut observations = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let period_raw = get(period_c).trim();
        let period: i64 = period_raw
            .parse::<i64>()
            .or_else(|_| period_raw.parse::<f64>().map(|f| f as i64))
            .map_err(|_| Error::Parse(format!("period `{period_raw}` is not an integer")))?;
        let mut o = FirmObservation::new(get(firm_c).trim(), period);
        o.output = parse_cell(get(output_c));
        o.labor = parse_cell(get(labor_c));
        o.capital = parse_cell(get(capital_c));
        o.intermediates = interm_c.and_then(|c| parse_cell(get(c)));
        o.investment = invest_c.and_then(|c| parse_cell(get(c)));
        o.age = age_c.and_then(|c| parse_cell(get(c)));
        for (name, c) in &acct_cols {
            o.accounting.insert(name.clone(), parse_cell(get(*c)));
        }
        for (name, c) in &cat_cols {
            o.categories.insert(name.clone(), get(*c).trim().to_owned());
        }
        observations.push(o);
    }
    FirmPanel::new(observations, catalog)
}

/// Loads a panel from a CSV file.
pub fn load_panel<T: Scalar>(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<FirmPanel<T>> {
    let f = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_panel(f, schema)
}

fn fmt_cell<T: Scalar>(v: Option<T>) -> String {
    match v {
        Some(x) => format!("{}", x.as_f64()),
        None => String::new(),
    }
}

/// Writes a panel in the [`PanelSchema::default`] layout; categories follow
/// the accounting columns.
pub fn write_panel_csv<T: Scalar, W: Write>(panel: &FirmPanel<T>, writer: W) -> Result<()> {
    let cat_names: BTreeSet<String> =
        panel.observations.iter().flat_map(|o| o.categories.keys().cloned()).collect();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = CORE_FIELDS.iter().map(|s| s.to_string()).collect();
    header.insert(0, "period".into());
    header.insert(0, "firm_id".into());
    header.extend(panel.catalog_names());
    header.extend(cat_names.iter().cloned());
    w.write_record(&header)?;
    for o in &panel.observations {
        let mut row = vec![o.firm_id.clone(), o.period.to_string()];
        row.extend(CORE_FIELDS.iter().map(|f| fmt_cell(o.value(f))));
        row.extend(panel.variable_catalog.iter().map(|v| fmt_cell(o.accounting.get(&v.name).copied().flatten())));
        row.extend(cat_names.iter().map(|c| o.categories.get(c).cloned().unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Divides each listed variable by labor; missing stays missing.
pub fn per_worker_transform<T: Scalar>(panel: &FirmPanel<T>, vars: &[String]) -> Result<FirmPanel<T>> {
    for v in vars {
        if !panel.has_variable(v) || v == "labor" {
            return Err(Error::UnknownVariable(v.clone()));
        }
    }
    let mut out = panel.clone();
    for o in &mut out.observations {
        let labor = match o.labor {
            Some(l) if l > T::zero() => l,
            _ => return Err(Error::ZeroLabor { firm: o.firm_id.clone(), period: o.period }),
        };
        for v in vars {
            if let Some(slot) = o.slot_mut(v) {
                *slot = slot.map(|x| x / labor);
            }
        }
    }
    Ok(out)
}

/// Outcome of the observed-fraction screen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub kept: Vec<String>,
    /// Dropped variables with their observed fraction.
    pub dropped: Vec<(String, f64)>,
    pub threshold: f64,
}

/// Keeps a catalog variable iff its observed fraction reaches `threshold`.
pub fn screen_missing<T: Scalar>(panel: &FirmPanel<T>, threshold: f64) -> ScreeningReport {
    let n = panel.len().max(1) as f64;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for v in &panel.variable_catalog {
        let observed = panel.observations.iter().filter(|o| o.value(&v.name).is_some()).count();
        let frac = observed as f64 / n;
        if frac >= threshold {
            kept.push(v.name.clone());
        } else {
            dropped.push((v.name.clone(), frac));
        }
    }
    ScreeningReport { kept, dropped, threshold }
}

/// Per-column location and scale used by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams<T> {
    pub means: Vec<T>,
    pub sds: Vec<T>,
}

impl<T: Scalar> StandardizationParams<T> {
    /// Identity transform for `p` columns.
    pub fn identity(p: usize) -> Self {
        Self { means: vec![T::zero(); p], sds: vec![T::one(); p] }
    }

    pub fn apply(&self, m: &Matrix<T>) -> Matrix<T> {
        let mut out = m.clone();
        for r in 0..out.nrows() {
            for (c, x) in out.row_mut(r).iter_mut().enumerate() {
                if !x.is_missing() {
                    *x = (*x - self.means[c]) / self.sds[c];
                }
            }
        }
        out
    }

    pub fn invert(&self, m: &Matrix<T>) -> Matrix<T> {
        let mut out = m.clone();
        for r in 0..out.nrows() {
            for (c, x) in out.row_mut(r).iter_mut().enumerate() {
                if !x.is_missing() {
                    *x = *x * self.sds[c] + self.means[c];
                }
            }
        }
        out
    }
}

/// Z-scores every column over its observed entries; missing cells are untouched.
pub fn standardize<T: Scalar>(m: &Matrix<T>, names: &[String]) -> Result<(Matrix<T>, StandardizationParams<T>)> {
    let mut means = Vec::with_capacity(m.ncols());
    let mut sds = Vec::with_capacity(m.ncols());
    for c in 0..m.ncols() {
        let xs: Vec<T> = m.column(c).into_iter().filter(|x| !x.is_missing()).collect();
        let sd = stats::sample_sd(&xs);
        let name = || names.get(c).cloned().unwrap_or_else(|| format!("column {c}"));
        if xs.len() < 2 || !(sd > T::zero()) || !sd.is_finite() {
            return Err(Error::ConstantColumn(name()));
        }
        means.push(stats::mean(&xs));
        sds.push(sd);
    }
    let params = StandardizationParams { means, sds };
    Ok((params.apply(m), params))
}

/// One row of the descriptive-statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    pub variable: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub pctl_85: Option<f64>,
    pub max: Option<f64>,
    pub std_dev: Option<f64>,
}

pub const DESCRIPTIVE_HEADER: [&str; 6] = ["Variable", "N", "Mean", "Pctl.85", "Max", "Std.Dev"];

/// N, mean, 85th percentile, max and sample sd of each variable over observed values.
pub fn descriptive_stats<T: Scalar>(panel: &FirmPanel<T>, vars: &[String]) -> Result<Vec<DescriptiveRow>> {
    vars.iter()
        .map(|v| {
            if !panel.has_variable(v) {
                return Err(Error::UnknownVariable(v.clone()));
            }
            let xs: Vec<f64> = panel.observations.iter().filter_map(|o| o.value(v)).map(Scalar::as_f64).collect();
            let finite = |x: f64| x.is_finite().then_some(x);
            Ok(DescriptiveRow {
                variable: v.clone(),
                n: xs.len(),
                mean: finite(stats::mean(&xs)),
                pctl_85: finite(stats::quantile_type7(&xs, 0.85)),
                max: xs.iter().copied().reduce(f64::max),
                std_dev: finite(stats::sample_sd(&xs)),
            })
        })
        .collect()
}

/// Renders the table as CSV in the column order N, Mean, Pctl.85, Max, Std.Dev.
pub fn descriptive_stats_csv(rows: &[DescriptiveRow]) -> String {
    let f = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
    let mut s = DESCRIPTIVE_HEADER.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{},{},{},{}\n", r.variable, r.n, f(r.mean), f(r.pctl_85), f(r.max), f(r.std_dev)));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "\
firm,year,Y,L,K,M,sales,costs,country
F1,2019,100,4,50,20,10,-3,IT
F1,2020,110,5,55,,12,-4,IT
F2,2019,200,10,80,40,,-8,DE
F2,2020,210,10,85,42,30,x,DE
";

    fn schema() -> PanelSchema {
        PanelSchema {
            firm: "firm".into(),
            period: "year".into(),
            output: "Y".into(),
            labor: "L".into(),
            capital: "K".into(),
            intermediates: Some("M".into()),
            investment: None,
            age: None,
            categories: vec!["country".into()],
            accounting: None,
            expense_like: vec!["costs".into()],
        }
    }

    #[test]
    fn loads_two_by_two_panel() {
        let p: FirmPanel<f64> = read_panel(CSV.as_bytes(), &schema()).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.catalog_names(), vec!["sales", "costs"]);
        assert_eq!(p.variable_catalog[1].sign, SignConvention::ExpenseLike);
        assert_eq!(p.observations[1].intermediates, None);
        assert_eq!(p.observations[3].accounting["costs"], None, "unparseable cell is missing, not zero");
        assert_eq!(p.observations[2].categories["country"], "DE");
    }

    #[test]
    fn duplicate_key_rejected() {
        let csv = "firm,year,Y,L,K\nF1,2019,1,1,1\nF1,2019,2,2,2\n";
        let s = PanelSchema { intermediates: None, categories: vec![], expense_like: vec![], ..schema() };
        let e = read_panel::<f64, _>(csv.as_bytes(), &s).unwrap_err();
        assert_eq!(e, Error::DuplicateKey { firm: "F1".into(), period: 2019 });
    }

    #[test]
    fn missing_column_and_empty_panel() {
        let csv = "firm,year,Y,L\nF1,2019,1,1\n";
        let s = PanelSchema { intermediates: None, categories: vec![], ..schema() };
        assert_eq!(read_panel::<f64, _>(csv.as_bytes(), &s).unwrap_err(), Error::MissingColumn("K".into()));
        let csv = "firm,year,Y,L,K\n";
        assert_eq!(read_panel::<f64, _>(csv.as_bytes(), &s).unwrap_err(), Error::EmptyPanel);
    }

    #[test]
    fn rows_sorted_by_firm_then_period() {
        let csv = "firm,year,Y,L,K\nB,2,1,1,1\nA,2,1,1,1\nB,1,1,1,1\n";
        let s = PanelSchema { intermediates: None, categories: vec![], ..schema() };
        let p: FirmPanel<f64> = read_panel(csv.as_bytes(), &s).unwrap();
        let keys: Vec<_> = p.observations.iter().map(|o| (o.firm_id.as_str(), o.period)).collect();
        assert_eq!(keys, vec![("A", 2), ("B", 1), ("B", 2)]);
    }

    #[test]
    fn schema_json_parses() {
        let s = PanelSchema::from_json(
            r#"{"firm":"firm","period":"year","output":"Y","labor":"L","capital":"K","intermediates":"M","categories":["country"],"expense_like":["costs"]}"#,
        )
        .unwrap();
        assert_eq!(s, schema());
    }

    #[test]
    fn per_worker_division() {
        let p: FirmPanel<f64> = read_panel(CSV.as_bytes(), &schema()).unwrap();
        let q = per_worker_transform(&p, &["output".into(), "sales".into(), "intermediates".into()]).unwrap();
        assert_eq!(q.observations[0].output, Some(25.0));
        assert_eq!(q.observations[1].intermediates, None);
        assert_eq!(q.observations[3].output, Some(21.0));
        let mut one = p.clone();
        one.observations[0].labor = Some(1.0);
        let q1 = per_worker_transform(&one, &["output".into()]).unwrap();
        assert_eq!(q1.observations[0].output, Some(100.0));
        one.observations[2].labor = Some(0.0);
        assert_eq!(
            per_worker_transform(&one, &["output".into()]).unwrap_err(),
            Error::ZeroLabor { firm: "F2".into(), period: 2019 }
        );
    }

    #[test]
    fn screen_threshold() {
        let mut obs = Vec::new();
        for i in 0..19_852 {
            let mut o = FirmObservation::<f64>::new(format!("F{i:05}"), 2019);
            o.accounting.insert("mostly".into(), (i < 17_000).then_some(1.0));
            o.accounting.insert("full".into(), Some(1.0));
            o.accounting.insert("half".into(), (i % 2 == 0).then_some(1.0));
            obs.push(o);
        }
        let catalog = ["mostly", "full", "half"]
            .iter()
            .map(|n| VariableSpec { name: n.to_string(), sign: SignConvention::RevenueLike })
            .collect();
        let p = FirmPanel::new(obs, catalog).unwrap();
        let r = screen_missing(&p, 0.85);
        assert_eq!(r.kept, vec!["mostly", "full"]);
        assert_eq!(r.dropped.len(), 1);
        assert_eq!(r.dropped[0].0, "half");
        assert!((r.dropped[0].1 - 0.5).abs() < 1e-12);
        assert_eq!(screen_missing(&p, 1.0).kept, vec!["full"]);
    }

    #[test]
    fn standardize_symmetric_triple_and_constant() {
        let m = Matrix::<f64>::from_rows(&[[1.0], [2.0], [3.0]]);
        let (z, p) = standardize(&m, &["x".into()]).unwrap();
        assert_eq!(z.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!((p.means[0], p.sds[0]), (2.0, 1.0));
        let (zz, _) = standardize(&z, &["x".into()]).unwrap();
        for (a, b) in zz.column(0).iter().zip(z.column(0)) {
            assert!((a - b).abs() < 1e-12);
        }
        let c = Matrix::from_rows(&[[5.0], [5.0], [5.0]]);
        assert_eq!(standardize(&c, &["c".into()]).unwrap_err(), Error::ConstantColumn("c".into()));
    }

    #[test]
    fn standardize_skips_missing() {
        let m = Matrix::from_rows(&[[1.0], [f64::NAN], [3.0]]);
        let (z, p) = standardize(&m, &["x".into()]).unwrap();
        assert!(z[(1, 0)].is_nan());
        assert_eq!(p.means[0], 2.0);
    }

    #[test]
    fn descriptive_one_to_hundred_and_degenerate() {
        let obs: Vec<_> = (1..=100)
            .map(|i| {
                let mut o = FirmObservation::<f64>::new(format!("F{i:03}"), 1);
                o.output = Some(i as f64);
                o
            })
            .collect();
        let p = FirmPanel::new(obs, vec![]).unwrap();
        let r = &descriptive_stats(&p, &["output".into()]).unwrap()[0];
        assert_eq!(r.n, 100);
        assert!((r.mean.unwrap() - 50.5).abs() < 1e-12);
        assert!((r.pctl_85.unwrap() - 85.15).abs() < 1e-9);
        assert_eq!(r.max, Some(100.0));

        let mut o = FirmObservation::<f64>::new("A", 1);
        o.output = Some(7.0);
        let p = FirmPanel::new(vec![o], vec![]).unwrap();
        let r = &descriptive_stats(&p, &["output".into()]).unwrap()[0];
        assert_eq!((r.n, r.mean, r.pctl_85, r.max, r.std_dev), (1, Some(7.0), Some(7.0), Some(7.0), None));
        assert!(descriptive_stats(&p, &["nope".into()]).is_err());
    }

    #[test]
    fn descriptive_csv_column_order() {
        let csv = descriptive_stats_csv(&[]);
        assert_eq!(csv.lines().next().unwrap(), "Variable,N,Mean,Pctl.85,Max,Std.Dev");
    }

    #[test]
    fn cross_section_average_ignores_missing() {
        let p: FirmPanel<f64> = read_panel(CSV.as_bytes(), &schema()).unwrap();
        let a = p.cross_section_average(2019, 2020).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.observations[0].output, Some(105.0));
        assert_eq!(a.observations[0].intermediates, Some(20.0));
        assert_eq!(a.observations[1].accounting["sales"], Some(30.0));
    }
}
