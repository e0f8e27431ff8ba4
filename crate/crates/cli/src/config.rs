//! Pipeline configuration: one JSON file, with command-line overrides applied on top.

use std::path::{Path, PathBuf};

use firmprod::dgp::DgpConfig;
use firmprod::panel::PanelSchema;
use firmprod::prodest::{GmmSettings, Method};
use firmprod::regress::SelectionRule;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "FIRMPROD_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodInput {
    pub label: String,
    pub path: PathBuf,
}

/// A period cut out of a simulated panel: periods `from..=to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodWindow {
    pub label: String,
    pub from: i64,
    pub to: i64,
}

/// Simulate the input instead of reading it from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInput {
    #[serde(default)]
    pub dgp: DgpConfig,
    pub windows: Vec<PeriodWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformSettings {
    /// Variables divided by labor before screening.
    pub per_worker: Vec<String>,
    /// Variables replaced by their natural log (must be positive).
    pub log: Vec<String>,
    /// Minimum observed share for a variable to be kept.
    pub screen_threshold: f64,
}

impl Default for TransformSettings {
    fn default() -> Self {
        Self { per_worker: Vec::new(), log: Vec::new(), screen_threshold: 0.85 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSettings {
    pub method: Method,
    pub gmm: GmmSettings,
    /// Use within-firm first differences of the TFP measure.
    pub first_difference: bool,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self { method: Method::Acf, gmm: GmmSettings::default(), first_difference: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaSettings {
    pub n_components: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PcaSettings {
    fn default() -> Self {
        Self { n_components: 8, tol: 1e-6, max_iter: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SomSettings {
    /// Grid size; chosen from the data when unset.
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub radius_start: Option<f64>,
    pub radius_end: f64,
}

impl Default for SomSettings {
    fn default() -> Self {
        let d = firmprod::som::SomConfig::default();
        Self { rows: None, cols: None, epochs: d.epochs, lr_start: d.lr_start, lr_end: d.lr_end, radius_start: None, radius_end: d.radius_end }
    }
}

/// `"auto"` or a fixed number of clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KChoice {
    #[default]
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for KChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Self::Fixed(k)),
            _ => Err(format!("k must be `auto` or a positive integer, got `{s}`")),
        }
    }
}

impl Serialize for KChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let text = match v {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(serde::de::Error::custom(format!("invalid k: {other}"))),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterInput {
    #[default]
    Som,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterSettings {
    pub k: KChoice,
    pub kmax: usize,
    pub gap_b: usize,
    pub on: ClusterInput,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        Self { k: KChoice::Auto, kmax: 8, gap_b: 50, on: ClusterInput::Som }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionSettings {
    pub controls: bool,
    /// Categorical columns used as dummy controls.
    pub control_columns: Vec<String>,
    pub lasso_folds: usize,
    pub lasso_rule: SelectionRule,
}

impl Default for RegressionSettings {
    fn default() -> Self {
        Self {
            controls: true,
            control_columns: vec!["country".into(), "sector".into()],
            lasso_folds: 10,
            lasso_rule: SelectionRule::OneSd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub periods: Vec<PeriodInput>,
    pub synthetic: Option<SyntheticInput>,
    pub schema: PanelSchema,
    pub transforms: TransformSettings,
    pub estimator: EstimatorSettings,
    pub pca: PcaSettings,
    pub som: SomSettings,
    pub cluster: ClusterSettings,
    pub regression: RegressionSettings,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            periods: Vec::new(),
            synthetic: None,
            schema: PanelSchema::default(),
            transforms: TransformSettings::default(),
            estimator: EstimatorSettings::default(),
            pca: PcaSettings::default(),
            som: SomSettings::default(),
            cluster: ClusterSettings::default(),
            regression: RegressionSettings::default(),
            output_dir: PathBuf::from("firmprod-out"),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Parses a config file; relative input paths resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in &mut cfg.periods {
            if p.path.is_relative() {
                p.path = base.join(&p.path);
            }
        }
        Ok(cfg)
    }

    pub fn period_labels(&self) -> Vec<String> {
        match &self.synthetic {
            Some(s) => s.windows.iter().map(|w| w.label.clone()).collect(),
            None => self.periods.iter().map(|p| p.label.clone()).collect(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::config(m));
        match (&self.synthetic, self.periods.is_empty()) {
            (Some(_), false) => return bad("give either `periods` or `synthetic`, not both".into()),
            (None, true) => return bad("no input: set `periods` or `synthetic`".into()),
            (Some(s), true) => {
                s.dgp.validate().map_err(|e| CliError::config(e.to_string()))?;
                if s.windows.is_empty() {
                    return bad("synthetic input needs at least one period window".into());
                }
                for w in &s.windows {
                    if w.from > w.to || w.from < 0 || w.to >= s.dgp.n_periods as i64 {
                        return bad(format!("window `{}` ({}..={}) is outside the simulated periods", w.label, w.from, w.to));
                    }
                }
            }
            (None, false) => {
                for p in &self.periods {
                    if !p.path.is_file() {
                        return bad(format!("input file not found: {}", p.path.display()));
                    }
                }
            }
        }
        let labels = self.period_labels();
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l.contains(['/', '\\']) || labels[..i].contains(l) {
                return bad(format!("period labels must be unique, non-empty and path-safe: `{l}`"));
            }
        }
        if !(0.0..=1.0).contains(&self.transforms.screen_threshold) {
            return bad("transforms.screen_threshold must lie in [0, 1]".into());
        }
        self.estimator.gmm.validate().map_err(|e| CliError::config(e.to_string()))?;
        if self.pca.n_components == 0 {
            return bad("pca.n_components must be at least 1".into());
        }
        if self.cluster.kmax < 2 || self.cluster.gap_b == 0 {
            return bad("cluster.kmax must be at least 2 and cluster.gap_b at least 1".into());
        }
        if self.regression.lasso_folds < 2 {
            return bad("regression.lasso_folds must be at least 2".into());
        }
        if self.som.rows.is_some() != self.som.cols.is_some() {
            return bad("som.rows and som.cols must be given together".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_choice_accepts_auto_and_numbers() {
        let c: ClusterSettings = serde_json::from_str(r#"{"k": "auto"}"#).unwrap();
        assert_eq!(c.k, KChoice::Auto);
        let c: ClusterSettings = serde_json::from_str(r#"{"k": 4}"#).unwrap();
        assert_eq!(c.k, KChoice::Fixed(4));
        assert!(serde_json::from_str::<ClusterSettings>(r#"{"k": 0}"#).is_err());
        assert_eq!(serde_json::to_string(&KChoice::Fixed(3)).unwrap(), "3");
    }

    #[test]
    fn validation_names_the_missing_file() {
        let cfg = PipelineConfig {
            periods: vec![PeriodInput { label: "a".into(), path: "/no/such/panel.csv".into() }],
            ..PipelineConfig::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("/no/such/panel.csv"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sed": 3}"#).is_err());
    }
}
