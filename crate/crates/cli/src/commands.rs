//! Command-line interface. Each subcommand runs one stage on files; `pipeline`
//! runs them all from a config file.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use firmprod::dgp::{simulate_panel, AccountingBlock, DgpConfig};
use firmprod::panel::{load_panel, standardize, write_panel_csv, PanelSchema};
use firmprod::prodest::{GmmSettings, Method};
use firmprod::regress::{Categorical, LassoCvSettings, SelectionRule};
use firmprod::rng::derive_seed;
use firmprod::som::SomModel;

use crate::artifacts::{ArtifactWriter, Manifest, MANIFEST_FILE};
use crate::config::{
    ClusterInput, ClusterSettings, EstimatorSettings, KChoice, PcaSettings, PipelineConfig, SomSettings, OUT_DIR_ENV,
};
use crate::error::{CliError, CliResult, StageContext};
use crate::io::{load_categories, load_labels, load_series, read_text, Table};
use crate::{pipeline, report, stages};

#[derive(Debug, Parser)]
#[command(name = "firmprod", version, about = "Firm-level productivity estimation and clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutDir {
    /// Output directory (overrides the config file).
    #[arg(long, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
}

impl OutDir {
    fn or(&self, default: &str) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a firm panel with known productivity.
    Simulate {
        /// DGP parameters as JSON; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        firms: Option<usize>,
        #[arg(long)]
        periods: Option<usize>,
        /// Add accounting variables and country/sector labels.
        #[arg(long)]
        accounting: bool,
        #[command(flatten)]
        out: OutDir,
    },
    /// Estimate the production function and firm TFP from a panel CSV.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Column mapping as JSON; the simulator's layout otherwise.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value = "acf")]
        method: String,
        #[arg(long)]
        series_degree: Option<usize>,
        #[arg(long)]
        markov_degree: Option<usize>,
        /// Add the exit-probability correction.
        #[arg(long)]
        survival: bool,
        /// Average within-firm first differences of TFP instead of levels.
        #[arg(long)]
        first_difference: bool,
        /// Also write the result JSON here, with the TFP sidecar beside it as `<stem>_tfp.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        dir: OutDir,
    },
    /// Standardize a firm-by-variable table and fill its missing cells.
    Impute {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        rank: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Principal components of a complete firm-by-variable table.
    Pca {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        components: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Train a self-organizing map on a feature table.
    Som {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Z-score every column before training.
        #[arg(long)]
        zscore: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// k-means on a feature table or on a trained map's codebook.
    Cluster {
        #[arg(long)]
        input: PathBuf,
        /// som_model.json; clusters its codebook and labels firms by node.
        #[arg(long)]
        som_model: Option<PathBuf>,
        #[arg(long, default_value = "auto")]
        k: KChoice,
        #[arg(long, default_value_t = 8)]
        kmax: usize,
        #[arg(long, default_value_t = 50)]
        gap_b: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Firm TFP (firm_id,tfp); adds profiles and Welch tests.
        #[arg(long)]
        tfp: Option<PathBuf>,
        /// Labels from another period; adds a transition matrix.
        #[arg(long)]
        previous_labels: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Regress TFP on principal-component scores.
    Pcr {
        #[arg(long)]
        tfp: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        /// Cluster labels (firm_id,cluster) for per-cluster fits.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Categorical columns (firm_id,...) used as dummy controls.
        #[arg(long)]
        categories: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Cross-validated Lasso of TFP on a firm-by-variable table.
    Lasso {
        #[arg(long)]
        tfp: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value = "one-sd")]
        rule: SelectionRule,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run every stage from a JSON config.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        k: Option<KChoice>,
        #[arg(long)]
        gap_b: Option<usize>,
        #[arg(long)]
        components: Option<usize>,
        #[arg(long)]
        no_controls: bool,
        #[command(flatten)]
        out: OutDir,
    },
    /// Render the Markdown report of a finished run.
    Report {
        /// manifest.json of the run.
        #[arg(long)]
        manifest: PathBuf,
        /// Where to write the report; next to the manifest otherwise.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn method(s: &str) -> CliResult<Method> {
    s.parse().map_err(|e: firmprod::Error| CliError::config(e.to_string()))
}

fn require_file(p: &Path) -> CliResult<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::config(format!("input file not found: {}", p.display())))
    }
}

fn load_json<T: serde::de::DeserializeOwned>(p: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(p)?).map_err(|e| CliError::config(format!("{}: {e}", p.display())))
}

/// Aligns a firm series to table rows; rows without a finite value are dropped.
fn align(table: &Table, ids: &[String], values: &[f64]) -> (Table, Vec<f64>) {
    let map: std::collections::HashMap<&str, f64> = ids.iter().map(String::as_str).zip(values.iter().copied()).collect();
    let keep: Vec<String> = table.ids.iter().filter(|id| map.get(id.as_str()).is_some_and(|v| v.is_finite())).cloned().collect();
    let t = table.select_ids(&keep).expect("ids come from the table");
    let y = keep.iter().map(|id| map[id.as_str()]).collect();
    (t, y)
}

/// Runs one command; the returned error carries the exit code.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config, seed, firms, periods, accounting, out } => {
            let mut cfg: DgpConfig = match &config {
                Some(p) => load_json(p)?,
                None => DgpConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.n_firms = firms.unwrap_or(cfg.n_firms);
            cfg.n_periods = periods.unwrap_or(cfg.n_periods);
            if accounting && cfg.accounting.is_none() {
                cfg.accounting = Some(AccountingBlock::default());
            }
            cfg.validate().map_err(|e| CliError::config(e.to_string()))?;
            let mut w = ArtifactWriter::new(out.or("firmprod-out"))?;
            let (panel, truth) = simulate_panel::<f64>(&cfg).stage("simulate")?;
            let mut bytes = Vec::new();
            write_panel_csv(&panel, &mut bytes).stage("simulate")?;
            w.write("simulate", "panel.csv", bytes)?;
            let mut bytes = Vec::new();
            truth.write_csv(&mut bytes).stage("simulate")?;
            w.write("simulate", "truth.csv", bytes)?;
            w.write_json("simulate", "dgp.json", &cfg)?;
            w.finish(cfg.seed, Vec::new())?;
        }
        Command::Estimate { input, schema, method: m, series_degree, markov_degree, survival, first_difference, out: result, dir: out } => {
            require_file(&input)?;
            let schema: PanelSchema = match &schema {
                Some(p) => load_json(p)?,
                None => PanelSchema::default(),
            };
            let d = GmmSettings::default();
            let settings = EstimatorSettings {
                method: method(&m)?,
                gmm: GmmSettings {
                    series_degree: series_degree.unwrap_or(d.series_degree),
                    markov_poly_degree: markov_degree.unwrap_or(d.markov_poly_degree),
                    survival_correction: survival,
                    ..d
                },
                first_difference,
            };
            settings.gmm.validate().map_err(|e| CliError::config(e.to_string()))?;
            let panel = load_panel::<f64>(&input, &schema).stage("ingest")?;
            let mut w = ArtifactWriter::new(out.or("firmprod-out"))?;
            stages::run_estimate(&mut w, "", &panel, &settings)?;
            if let Some(dest) = result {
                let stem = dest.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "result".into());
                let sidecar = dest.with_file_name(format!("{stem}_tfp.csv"));
                for (from, to) in [("estimate.json", &dest), ("tfp.csv", &sidecar)] {
                    std::fs::copy(w.path(from), to).map_err(|e| CliError::stage("estimate", format!("{}: {e}", to.display())))?;
                }
            }
            w.finish(0, Vec::new())?;
        }
        Command::Impute { input, rank, tol, max_iter, out } => {
            require_file(&input)?;
            if rank == 0 {
                return Err(CliError::config("--rank must be at least 1"));
            }
            let t = Table::load(&input)?;
            let mut w = ArtifactWriter::new(out.or("firmprod-out"))?;
            let settings = PcaSettings { n_components: rank, tol, max_iter };
            let imp = stages::run_impute(&mut w, "", &t.ids, &t.columns, &t.values, &settings)?;
            let std = Table { ids: t.ids, columns: t.columns, values: imp.standardized };
            w.write("impute", "standardized.csv", std.to_csv("firm_id"))?;
            w.finish(0, Vec::new())?;
        }
        Command::Pca { input, components, out } => {
            require_file(&input)?;
            if components == 0 {
                return Err(CliError::config("--components must be at least 1"));
            }
            let t = Table::load(&input)?;
            if t.values.has_missing() {
                return Err(CliError::stage("pca", format!("{} has missing cells; run `impute` first", input.display())));
            }
            let (std, _) = standardize(&t.values, &t.columns).stage("pca")?;
            let mut w = ArtifactWriter::new(out.or("firmprod-out"))?;
            stages::run_pca(&mut w, "", &t.ids, &t.columns, &std, components)?;
            w.finish(0, Vec::new())?;
        }
        Command::Som { input, rows, cols, epochs, zscore, seed, out } => {
            require_file(&input)?;
            if rows.is_some() != cols.is_some() {
                return Err(CliError::config("--rows and --cols must be given together"));
            }
            let t = Table::load(&input)?;
            let features = if zscore { stages::zscore_columns(&t.values) } else { t.values.clone() };
            let d = SomSettings::default();
            let settings = SomSettings { rows, cols, epochs: epochs.unwrap_or(d.epochs), ..d };
            let cfg = stages::som_config(&settings, &features, derive_seed(seed, "som", 0));
            let mut w = ArtifactWriter::new(out.or("firmprod-out"))?;
            stages::run_som(&mut w, "", &t.ids, &t.columns, &features, &cfg)?;
            w.finish(seed, Vec::new())?;
        }
        Command::Cluster { input, som_model, k, kmax, gap_b, seed, tfp, previous_labels, out } => {
            require_file(&input)?;
            if kmax < 2 || gap_b == 0 {
                return Err(CliError::config("--kmax must be at least 2 and --gap-b at least 1"));
            }
            let t = Table::load(&input)?;
            let som: Option<SomModel<f64>> = match &som_model {
                Some(p) => Some(load_json(p)?),
                None => None,
            };
            let settings = ClusterSettings { k, kmax, gap_b, on: if som.is_some() { ClusterInput::Som } else { ClusterInput::Raw } };
            let mut w = ArtifactWriter::new(out.or("firmprod-out"))?;
            let c = stages::run_cluster(
                &mut w,
                "",
                &t.ids,
                &t.values,
                som.as_ref(),
                &settings,
                derive_seed(seed, "gap", 0),
                derive_seed(seed, "kmeans", 0),
            )?;
            if let Some(p) = &tfp {
                let (ids, vals) = load_series(p)?;
                let (sub, y) = align(&t, &ids, &vals);
                let labels: Vec<usize> = sub.ids.iter().map(|id| c.labels[t.ids.iter().position(|x| x == id).unwrap()]).collect();
                stages::run_profiles(&mut w, "", &labels, &y, &sub.values, None, &[])?;
            }
            if let Some(p) = &previous_labels {
                let prev = load_labels(p)?;
                let cur: Vec<(String, usize)> = t.ids.iter().cloned().zip(c.labels.iter().copied()).collect();
                let tm = firmprod::cluster::transition_matrix(&prev, &cur);
                w.write_json("transition", "transition.json", &tm)?;
            }
            w.finish(seed, Vec::new())?;
        }
        Command::Pcr { tfp, scores, labels, categories, out } => {
            require_file(&tfp)?;
            require_file(&scores)?;
            let (ids, vals) = load_series(&tfp)?;
            let (t, y) = align(&Table::load(&scores)?, &ids, &vals);
            let lab = match &labels {
                Some(p) => {
                    let map: std::collections::HashMap<String, usize> = load_labels(p)?.into_iter().collect();
                    let v: Option<Vec<usize>> = t.ids.iter().map(|id| map.get(id).copied()).collect();
                    Some(v.ok_or_else(|| CliError::config(format!("{} does not label every firm", p.display())))?)
                }
                None => None,
            };
            let controls = match &categories {
                Some(p) => {
                    let (cids, cols) = load_categories(p)?;
                    let pos: Option<Vec<usize>> = t.ids.iter().map(|id| cids.iter().position(|c| c == id)).collect();
                    let pos = pos.ok_or_else(|| CliError::config(format!("{} does not cover every firm", p.display())))?;
                    cols.into_iter()
                        .map(|(name, v)| Categorical { name, values: pos.iter().map(|&i| v[i].clone()).collect() })
                        .collect()
                }
                None => Vec::new(),
            };
            let mut w = ArtifactWriter::new(out.or("firmprod-out"))?;
            stages::run_pcr(&mut w, "", &y, &t.values, lab.as_deref(), Some(&controls))?;
            w.finish(0, Vec::new())?;
        }
        Command::Lasso { tfp, input, folds, rule, seed, out } => {
            require_file(&tfp)?;
            require_file(&input)?;
            if folds < 2 {
                return Err(CliError::config("--folds must be at least 2"));
            }
            let (ids, vals) = load_series(&tfp)?;
            let (t, y) = align(&Table::load(&input)?, &ids, &vals);
            let settings = LassoCvSettings { lambda_grid: None, folds, seed: derive_seed(seed, "cv", 0), rule };
            let mut w = ArtifactWriter::new(out.or("firmprod-out"))?;
            stages::run_lasso(&mut w, "", &t.values, &y, &t.columns, &settings)?;
            w.finish(seed, Vec::new())?;
        }
        Command::Pipeline { config, seed, method: m, k, gap_b, components, no_controls, out } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(d) = out.out_dir {
                cfg.output_dir = d;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = m {
                cfg.estimator.method = method(&m)?;
            }
            if let Some(k) = k {
                cfg.cluster.k = k;
            }
            if let Some(b) = gap_b {
                cfg.cluster.gap_b = b;
            }
            if let Some(c) = components {
                cfg.pca.n_components = c;
            }
            if no_controls {
                cfg.regression.controls = false;
            }
            pipeline::run_pipeline(&cfg)?;
        }
        Command::Report { manifest, output } => {
            let m = Manifest::load(&manifest)?;
            let dir = manifest.parent().unwrap_or(Path::new("")).to_path_buf();
            let md = report::render_report(&m, &dir)?;
            let dest = output.unwrap_or_else(|| dir.join(report::REPORT_FILE));
            std::fs::write(&dest, md).map_err(|e| CliError::stage("report", format!("{}: {e}", dest.display())))?;
        }
    }
    Ok(())
}

/// File name of the manifest inside an output directory.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}
