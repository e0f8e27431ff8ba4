//! End-to-end run: ingest, TFP estimation, screening and imputation, PCA,
//! SOM, clustering, cluster diagnostics, regressions and the report.

use std::collections::BTreeMap;

use firmprod::cluster::transition_matrix;
use firmprod::dgp::simulate_panel;
use firmprod::panel::{load_panel, write_panel_csv, FirmPanel, PanelSchema, SignConvention};
use firmprod::regress::{Categorical, LassoCvSettings};
use firmprod::rng::derive_seed;
use firmprod::Matrix;

use crate::artifacts::{ArtifactWriter, Manifest};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, StageContext};
use crate::io::matrix_csv;
use crate::report;
use crate::stages::{self, component_names};

/// Inputs for one period, already loaded.
struct PeriodPanel {
    label: String,
    panel: FirmPanel<f64>,
}

fn ingest(cfg: &PipelineConfig, w: &mut ArtifactWriter) -> CliResult<Vec<PeriodPanel>> {
    match &cfg.synthetic {
        Some(syn) => {
            let dgp = firmprod::dgp::DgpConfig { seed: derive_seed(cfg.seed, "dgp", 0), ..syn.dgp.clone() };
            let (panel, truth) = simulate_panel::<f64>(&dgp).stage("simulate")?;
            let mut truth_csv = Vec::new();
            truth.write_csv(&mut truth_csv).stage("simulate")?;
            w.write("simulate", "synthetic/truth.csv", truth_csv)?;
            let categories = if dgp.accounting.is_some() { vec!["country".into(), "sector".into()] } else { Vec::new() };
            let expense_like = panel
                .variable_catalog
                .iter()
                .filter(|v| v.sign == SignConvention::ExpenseLike)
                .map(|v| v.name.clone())
                .collect();
            let schema = PanelSchema { categories, expense_like, ..PanelSchema::default() };
            syn.windows
                .iter()
                .map(|win| {
                    let obs = panel.observations.iter().filter(|o| o.period >= win.from && o.period <= win.to).cloned().collect();
                    let slice = FirmPanel::new(obs, panel.variable_catalog.clone()).stage("simulate")?;
                    let mut bytes = Vec::new();
                    write_panel_csv(&slice, &mut bytes).stage("simulate")?;
                    let path = w.write("simulate", &format!("synthetic/panel_{}.csv", win.label), bytes)?;
                    let panel = load_panel(&path, &schema).stage("ingest")?;
                    Ok(PeriodPanel { label: win.label.clone(), panel })
                })
                .collect()
        }
        None => cfg
            .periods
            .iter()
            .map(|p| {
                let panel = load_panel(&p.path, &cfg.schema).stage("ingest")?;
                Ok(PeriodPanel { label: p.label.clone(), panel })
            })
            .collect(),
    }
}

/// Everything a period contributes to cross-period steps.
struct PeriodOutcome {
    label: String,
    labels: Vec<(String, usize)>,
}

fn run_period(cfg: &PipelineConfig, w: &mut ArtifactWriter, index: usize, p: &PeriodPanel) -> CliResult<PeriodOutcome> {
    let prefix = p.label.as_str();
    let seed = |name: &str| derive_seed(cfg.seed, name, index as u64);

    let est = stages::run_estimate(w, prefix, &p.panel, &cfg.estimator)?;
    let cs = stages::run_transform(w, prefix, &p.panel, &cfg.transforms)?;
    let imputed = stages::run_impute(w, prefix, &cs.ids, &cs.names, &cs.values, &cfg.pca)?;
    let pca = stages::run_pca(w, prefix, &cs.ids, &cs.names, &imputed.standardized, cfg.pca.n_components)?;

    // downstream stages use firms that have both accounting data and a TFP estimate
    let rows: Vec<usize> = (0..cs.ids.len()).filter(|&r| est.firm_tfp.get(&cs.ids[r]).is_some_and(|v| v.is_finite())).collect();
    if rows.len() < 10 {
        return Err(CliError::stage("som", format!("only {} firms have both accounting data and a TFP estimate", rows.len())));
    }
    let ids: Vec<String> = rows.iter().map(|&r| cs.ids[r].clone()).collect();
    let tfp: Vec<f64> = ids.iter().map(|id| est.firm_tfp[id]).collect();
    let scores = pca.scores.select_rows(&rows);
    let s = scores.ncols();

    let mut feature_names = component_names(s);
    feature_names.push("TFP".into());
    let mut columns: Vec<Vec<f64>> = (0..s).map(|j| scores.column(j)).collect();
    columns.push(tfp.clone());
    let features = stages::zscore_columns(&Matrix::from_columns(&columns));
    let som_cfg = stages::som_config(&cfg.som, &features, seed("som"));
    let som = stages::run_som(w, prefix, &ids, &feature_names, &features, &som_cfg)?;

    let clusters =
        stages::run_cluster(w, prefix, &ids, &features, Some(&som), &cfg.cluster, seed("gap"), seed("kmeans"))?;

    let original = imputed.original.select_rows(&rows);
    let labor: Vec<f64> = rows.iter().map(|&r| cs.labor[r]).collect();
    let categories: Vec<(String, Vec<String>)> =
        cs.categories.iter().map(|(n, v)| (n.clone(), rows.iter().map(|&r| v[r].clone()).collect())).collect();
    stages::run_profiles(w, prefix, &clusters.labels, &tfp, &scores, Some((&cs.names, &original, &labor)), &categories)?;

    let controls: Vec<Categorical> = if cfg.regression.controls {
        cfg.regression
            .control_columns
            .iter()
            .filter_map(|c| categories.iter().find(|(n, _)| n == c))
            .map(|(n, v)| Categorical { name: n.clone(), values: v.clone() })
            .collect()
    } else {
        Vec::new()
    };
    stages::run_pcr(w, prefix, &tfp, &scores, Some(&clusters.labels), Some(&controls))?;

    let lasso = LassoCvSettings {
        lambda_grid: None,
        folds: cfg.regression.lasso_folds,
        seed: seed("cv"),
        rule: cfg.regression.lasso_rule,
    };
    stages::run_lasso(w, prefix, &original, &tfp, &cs.names, &lasso)?;

    let labels = ids.into_iter().zip(clusters.labels).collect();
    Ok(PeriodOutcome { label: p.label.clone(), labels })
}

/// Runs every stage, writes the manifest and the report, and returns the manifest.
pub fn run_pipeline(cfg: &PipelineConfig) -> CliResult<Manifest> {
    cfg.validate()?;
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    let mut resolved = serde_json::to_value(cfg).map_err(|e| CliError::config(e.to_string()))?;
    // the output location does not affect results
    resolved.as_object_mut().map(|o| o.remove("output_dir"));
    w.write_json("config", "config.json", &resolved)?;

    let panels = ingest(cfg, &mut w)?;
    let mut outcomes = Vec::new();
    for (i, p) in panels.iter().enumerate() {
        outcomes.push(run_period(cfg, &mut w, i, p)?);
    }
    for pair in outcomes.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let t = transition_matrix(&a.labels, &b.labels);
        let rows = t.counts.len();
        let cols = t.counts.first().map_or(0, Vec::len);
        let m = Matrix::from_row_major(rows, cols, t.counts.iter().flatten().map(|&c| c as f64).collect());
        let names: Vec<String> = (1..=cols).map(|c| format!("{}_cluster_{c}", b.label)).collect();
        let file = format!("transition_{}_{}", a.label, b.label);
        w.write("transition", &format!("{file}.csv"), matrix_csv(&m, &format!("{}_cluster", a.label), &names))?;
        w.write_json("transition", &format!("{file}.json"), &t)?;
    }
    let labels = outcomes.iter().map(|o| o.label.clone()).collect();
    let dir = w.dir().to_path_buf();
    let manifest = w.finish(cfg.seed, labels)?;
    let md = report::render_report(&manifest, &dir)?;
    std::fs::write(dir.join(report::REPORT_FILE), md).map_err(|e| CliError::stage("report", e))?;
    Ok(manifest)
}

/// Cluster labels per firm, keyed by period label, from a finished run.
pub fn period_labels(manifest: &Manifest, dir: &std::path::Path) -> CliResult<BTreeMap<String, Vec<(String, usize)>>> {
    manifest
        .periods
        .iter()
        .map(|p| Ok((p.clone(), crate::io::load_labels(&dir.join(format!("{p}/labels.csv")))?)))
        .collect()
}
