//! Individual analysis stages. Each takes in-memory inputs, writes its
//! artifacts through an [`ArtifactWriter`] under a path prefix and returns
//! what later stages need. The subcommands and the pipeline share them.

use std::collections::BTreeMap;

use firmprod::cluster::{
    cluster_profiles, cluster_via_som, composition, gap_statistic, kmeans, profile_table_csv, welch_matrix, GapCurve,
    KMeansModel, RawVariables, DEFAULT_MAX_ITER,
};
use firmprod::panel::{descriptive_stats, SignConvention, descriptive_stats_csv, per_worker_transform, screen_missing, standardize, FirmPanel, ScreeningReport};
use firmprod::pca::{fit_pca, format_percent, iterative_impute, loading_correlations, project, ImputeSettings, PcaModel};
use firmprod::prodest::{estimate, EstimatorDiagnostics, EstimatorResult, Method, ProductionCoefficients};
use firmprod::regress::{lasso_cv, pcr, pcr_by_cluster, Categorical, ClusterRegression, LassoCvSettings, LassoResult, RegressionReport};
use firmprod::som::{component_planes, suggest_grid, train_som, u_matrix, SomConfig, SomModel};
use firmprod::stats::{mean, sample_sd};
use firmprod::Matrix;
use serde::{Deserialize, Serialize};

use crate::artifacts::ArtifactWriter;
use crate::config::{ClusterInput, ClusterSettings, EstimatorSettings, KChoice, PcaSettings, SomSettings, TransformSettings};
use crate::error::{CliError, CliResult, StageContext};
use crate::io::{categories_csv, labels_csv, matrix_csv, series_csv, Table};
use crate::svg;

pub fn component_names(s: usize) -> Vec<String> {
    (1..=s).map(|j| format!("PC{j}")).collect()
}

fn join(prefix: &str, file: &str) -> String {
    if prefix.is_empty() {
        file.to_string()
    } else {
        format!("{prefix}/{file}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub method: Method,
    pub coefficients: ProductionCoefficients<f64>,
    pub beta_l_first_stage: Option<f64>,
    pub first_stage_r_squared: f64,
    pub polynomial_degree: usize,
    pub tfp_measure: String,
    pub firms_with_tfp: usize,
    pub diagnostics: EstimatorDiagnostics<f64>,
}

pub struct EstimateOutput {
    pub result: EstimatorResult<f64>,
    /// Per-firm mean of the TFP measure.
    pub firm_tfp: BTreeMap<String, f64>,
}

/// Production-function estimation plus the per-observation and per-firm TFP files.
pub fn run_estimate(
    w: &mut ArtifactWriter,
    prefix: &str,
    panel: &FirmPanel<f64>,
    settings: &EstimatorSettings,
) -> CliResult<EstimateOutput> {
    const STAGE: &str = "estimate";
    let result = estimate(settings.method, panel, &settings.gmm).stage(STAGE)?;
    let measure: Vec<Option<f64>> = if settings.first_difference {
        result.tfp_first_difference()
    } else {
        result.tfp_growth.iter().map(|&v| Some(v)).collect()
    };
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for ((firm, _), v) in result.keys.iter().zip(&measure) {
        if let Some(v) = v {
            let e = sums.entry(firm.clone()).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    let firm_tfp: BTreeMap<String, f64> = sums.into_iter().map(|(f, (s, n))| (f, s / n as f64)).collect();

    let mut sidecar = Vec::new();
    result.write_tfp_csv(&mut sidecar).stage(STAGE)?;
    w.write(STAGE, &join(prefix, "tfp.csv"), sidecar)?;
    let ids: Vec<String> = firm_tfp.keys().cloned().collect();
    let vals: Vec<f64> = firm_tfp.values().copied().collect();
    w.write(STAGE, &join(prefix, "firm_tfp.csv"), series_csv(&ids, "tfp", &vals))?;
    let summary = EstimateSummary {
        method: result.method,
        coefficients: result.coefficients.clone(),
        beta_l_first_stage: result.first_stage.beta_l_first_stage,
        first_stage_r_squared: result.first_stage.r_squared,
        polynomial_degree: result.first_stage.polynomial_degree,
        tfp_measure: if settings.first_difference { "first_difference" } else { "levels" }.into(),
        firms_with_tfp: firm_tfp.len(),
        diagnostics: result.diagnostics.clone(),
    };
    w.write_json(STAGE, &join(prefix, "estimate.json"), &summary)?;
    Ok(EstimateOutput { result, firm_tfp })
}

/// Firm-level cross-section of the screened accounting variables.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    /// Raw values with NaN for missing cells.
    pub values: Matrix<f64>,
    pub labor: Vec<f64>,
    pub categories: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreeningSummary {
    pub screening: ScreeningReport,
    pub firms: usize,
    /// Firms dropped because none of the kept variables is observed.
    pub firms_without_data: Vec<String>,
}

/// Period averages per firm, per-worker and log transforms, then the observed-share screen.
pub fn run_transform(
    w: &mut ArtifactWriter,
    prefix: &str,
    panel: &FirmPanel<f64>,
    settings: &TransformSettings,
) -> CliResult<CrossSection> {
    const STAGE: &str = "transform";
    let from = panel.observations.iter().map(|o| o.period).min().unwrap_or(0);
    let to = panel.observations.iter().map(|o| o.period).max().unwrap_or(0);
    let mut cs = panel.cross_section_average(from, to).stage(STAGE)?;
    if !settings.per_worker.is_empty() {
        cs = per_worker_transform(&cs, &settings.per_worker).stage(STAGE)?;
    }
    for v in &settings.log {
        let Some(spec) = cs.variable_catalog.iter().find(|c| &c.name == v) else {
            return Err(CliError::stage(STAGE, format!("log transform: unknown accounting variable `{v}`")));
        };
        // expense-like variables are stored as negatives; their magnitude is logged
        let sign = if spec.sign == SignConvention::ExpenseLike { -1.0 } else { 1.0 };
        for o in &mut cs.observations {
            if let Some(Some(x)) = o.accounting.get_mut(v) {
                *x *= sign;
                if *x <= 0.0 {
                    return Err(CliError::stage(STAGE, format!("log transform: `{v}` is {x} for firm {}", o.firm_id)));
                }
                *x = x.ln();
            }
        }
    }
    let screening = screen_missing(&cs, settings.screen_threshold);
    if screening.kept.len() < 2 {
        return Err(CliError::stage(STAGE, format!("only {} variables pass the missing-data screen", screening.kept.len())));
    }
    let full = cs.matrix(&screening.kept).stage(STAGE)?;
    let keep: Vec<usize> = (0..full.nrows()).filter(|&r| full.row(r).iter().any(|v| !v.is_nan())).collect();
    let all_ids = cs.firm_ids();
    let firms_without_data = (0..full.nrows()).filter(|r| !keep.contains(r)).map(|r| all_ids[r].clone()).collect();
    let ids: Vec<String> = keep.iter().map(|&r| all_ids[r].clone()).collect();
    let values = full.select_rows(&keep);
    let labor = keep.iter().map(|&r| cs.observations[r].labor.unwrap_or(f64::NAN)).collect();
    let cat_names: Vec<String> = cs.observations.first().map(|o| o.categories.keys().cloned().collect()).unwrap_or_default();
    let categories = cat_names
        .iter()
        .map(|c| (c.clone(), keep.iter().map(|&r| cs.observations[r].categories.get(c).cloned().unwrap_or_default()).collect()))
        .collect();
    let out = CrossSection { ids, names: screening.kept.clone(), values, labor, categories };
    let desc = descriptive_stats(&cs, &screening.kept).stage(STAGE)?;
    w.write(STAGE, &join(prefix, "descriptive.csv"), descriptive_stats_csv(&desc))?;
    w.write_json(STAGE, &join(prefix, "screening.json"), &ScreeningSummary { screening, firms: cs.len(), firms_without_data })?;
    w.write(STAGE, &join(prefix, "cross_section.csv"), Table { ids: out.ids.clone(), columns: out.names.clone(), values: out.values.clone() }.to_csv("firm_id"))?;
    if !out.categories.is_empty() {
        w.write(STAGE, &join(prefix, "categories.csv"), categories_csv(&out.ids, &out.categories))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImputationSummary {
    pub rank: usize,
    pub n_iterations: usize,
    pub final_change: f64,
    pub missing_cells: usize,
    pub converged: bool,
}

pub struct Imputed {
    /// Standardized and completed.
    pub standardized: Matrix<f64>,
    /// Completed on the original scale.
    pub original: Matrix<f64>,
    pub params: firmprod::panel::StandardizationParams<f64>,
}

/// Standardizes over observed cells and completes the matrix by iterative PCA.
pub fn run_impute(
    w: &mut ArtifactWriter,
    prefix: &str,
    ids: &[String],
    names: &[String],
    values: &Matrix<f64>,
    settings: &PcaSettings,
) -> CliResult<Imputed> {
    const STAGE: &str = "impute";
    let (std, params) = standardize(values, names).stage(STAGE)?;
    let rank = settings.n_components.min(names.len().saturating_sub(1)).max(1);
    let imp = ImputeSettings { n_components: rank, tol: settings.tol, max_iter: settings.max_iter };
    let res = iterative_impute(&std, &imp).stage(STAGE)?.ensure_converged().stage(STAGE)?;
    let original = params.invert(&res.completed);
    w.write_json(
        STAGE,
        &join(prefix, "imputation.json"),
        &ImputationSummary {
            rank: res.rank,
            n_iterations: res.n_iterations,
            final_change: res.final_change,
            missing_cells: res.missing_cells,
            converged: res.converged,
        },
    )?;
    w.write(STAGE, &join(prefix, "completed.csv"), Table { ids: ids.to_vec(), columns: names.to_vec(), values: original.clone() }.to_csv("firm_id"))?;
    Ok(Imputed { standardized: res.completed, original, params })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreeRow {
    pub component: usize,
    pub eigenvalue: f64,
    pub fraction: f64,
    pub percent: String,
}

pub struct PcaOutput {
    pub model: PcaModel<f64>,
    pub scores: Matrix<f64>,
}

/// PCA of a complete (standardized) matrix with scree, loadings, scores and correlation tables.
pub fn run_pca(
    w: &mut ArtifactWriter,
    prefix: &str,
    ids: &[String],
    names: &[String],
    matrix: &Matrix<f64>,
    n_components: usize,
) -> CliResult<PcaOutput> {
    const STAGE: &str = "pca";
    let s = n_components.min(matrix.nrows().saturating_sub(1)).min(matrix.ncols());
    let model = fit_pca(matrix, s).stage(STAGE)?.with_column_names(names.to_vec()).stage(STAGE)?;
    let scores = project(&model, matrix).stage(STAGE)?;
    let corr = loading_correlations(&model, matrix).stage(STAGE)?;
    let pcs = component_names(s);
    let scree: Vec<ScreeRow> = model
        .scree()
        .into_iter()
        .map(|(c, e, f)| ScreeRow { component: c, eigenvalue: e, fraction: f, percent: format_percent(f) })
        .collect();
    w.write_json(STAGE, &join(prefix, "scree.json"), &scree)?;
    w.write(STAGE, &join(prefix, "scree.svg"), svg::bar_chart("Explained variance", &pcs, &model.variance_fractions))?;
    w.write(STAGE, &join(prefix, "loadings.csv"), Table { ids: names.to_vec(), columns: pcs.clone(), values: model.loadings.clone() }.to_csv("variable"))?;
    w.write(STAGE, &join(prefix, "scores.csv"), Table { ids: ids.to_vec(), columns: pcs, values: scores.clone() }.to_csv("firm_id"))?;
    let mut csv = String::from("component,variance,rank,positive,r_positive,negative,r_negative\n");
    for c in &corr {
        for i in 0..c.top_positive.len().max(c.top_negative.len()) {
            let cell = |v: &[(String, f64)]| v.get(i).map(|(n, r)| (n.clone(), format!("{r:.4}"))).unwrap_or_default();
            let (pn, pr) = cell(&c.top_positive);
            let (nn, nr) = cell(&c.top_negative);
            csv.push_str(&format!("PC{},{},{},{pn},{pr},{nn},{nr}\n", c.component, format_percent(c.variance_fraction), i + 1));
        }
    }
    w.write(STAGE, &join(prefix, "correlations.csv"), csv)?;
    w.write_json(STAGE, &join(prefix, "correlations.json"), &corr)?;
    w.write_json(STAGE, &join(prefix, "pca_model.json"), &model)?;
    Ok(PcaOutput { model, scores })
}

/// Z-scores every column (sample sd); constant columns become zero.
pub fn zscore_columns(m: &Matrix<f64>) -> Matrix<f64> {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        let col = m.column(j);
        let (mu, sd) = (mean(&col), sample_sd(&col));
        out.set_column(j, &col.iter().map(|v| if sd > 0.0 { (v - mu) / sd } else { 0.0 }).collect::<Vec<_>>());
    }
    out
}

pub fn som_config(settings: &SomSettings, features: &Matrix<f64>, seed: u64) -> SomConfig {
    let (rows, cols) = match (settings.rows, settings.cols) {
        (Some(r), Some(c)) => (r, c),
        _ => suggest_grid(features),
    };
    SomConfig {
        epochs: settings.epochs,
        lr_start: settings.lr_start,
        lr_end: settings.lr_end,
        radius_start: settings.radius_start,
        radius_end: settings.radius_end,
        ..SomConfig::new(rows, cols, seed)
    }
}

/// Trains the map and writes codebook, assignments, U-matrix and component planes.
pub fn run_som(
    w: &mut ArtifactWriter,
    prefix: &str,
    ids: &[String],
    names: &[String],
    features: &Matrix<f64>,
    config: &SomConfig,
) -> CliResult<SomModel<f64>> {
    const STAGE: &str = "som";
    let model = train_som(features, config).stage(STAGE)?;
    let nodes: Vec<String> = (0..config.nodes()).map(|k| {
        let (r, c) = model.grid_position(k);
        format!("{r}:{c}")
    }).collect();
    w.write(STAGE, &join(prefix, "som_codebook.csv"), Table { ids: nodes, columns: names.to_vec(), values: model.codebook.clone() }.to_csv("node"))?;
    let mut assign = String::from("firm_id,node,row,col\n");
    for (id, &a) in ids.iter().zip(&model.assignments) {
        let (r, c) = model.grid_position(a);
        assign.push_str(&format!("{id},{a},{r},{c}\n"));
    }
    w.write(STAGE, &join(prefix, "som_assignments.csv"), assign)?;
    let um = u_matrix(&model);
    let grid_cols: Vec<String> = (0..config.cols).map(|c| format!("c{c}")).collect();
    w.write(STAGE, &join(prefix, "umatrix.csv"), matrix_csv(&um, "row", &grid_cols))?;
    w.write(STAGE, &join(prefix, "umatrix.svg"), svg::heatmap("U-matrix", &um))?;
    let planes = component_planes(&model);
    for (name, plane) in names.iter().zip(&planes.planes) {
        w.write(STAGE, &join(prefix, &format!("planes/{name}.csv")), matrix_csv(plane, "row", &grid_cols))?;
        w.write(STAGE, &join(prefix, &format!("planes/{name}.svg")), svg::heatmap(name, plane))?;
    }
    let counts = Matrix::from_row_major(
        config.rows,
        config.cols,
        planes.counts.iter().flatten().map(|&c| c as f64).collect(),
    );
    w.write(STAGE, &join(prefix, "som_counts.csv"), matrix_csv(&counts, "row", &grid_cols))?;
    w.write_json(
        STAGE,
        &join(prefix, "som_summary.json"),
        &serde_json::json!({
            "rows": config.rows,
            "cols": config.cols,
            "epochs": config.epochs,
            "seed": config.seed,
            "initial_quantization_error": model.initial_quantization_error,
            "quantization_error": model.quantization_error,
        }),
    )?;
    w.write_json(STAGE, &join(prefix, "som_model.json"), &model)?;
    Ok(model)
}

pub struct ClusterOutput {
    pub labels: Vec<usize>,
    pub k: usize,
    pub gap: Option<GapCurve<f64>>,
    pub kmeans: KMeansModel<f64>,
}

/// Chooses `k` (gap statistic when automatic) and clusters either the SOM
/// codebook, propagating node labels to firms, or the firm features directly.
pub fn run_cluster(
    w: &mut ArtifactWriter,
    prefix: &str,
    ids: &[String],
    features: &Matrix<f64>,
    som: Option<&SomModel<f64>>,
    settings: &ClusterSettings,
    gap_seed: u64,
    kmeans_seed: u64,
) -> CliResult<ClusterOutput> {
    const STAGE: &str = "cluster";
    let data = match (settings.on, som) {
        (ClusterInput::Som, Some(m)) => &m.codebook,
        (ClusterInput::Som, None) => return Err(CliError::stage(STAGE, "clustering on the SOM needs a trained map")),
        (ClusterInput::Raw, _) => features,
    };
    let (k, gap) = match settings.k {
        KChoice::Fixed(k) => (k, None),
        KChoice::Auto => {
            let kmax = settings.kmax.min(data.nrows());
            let curve = gap_statistic(data, kmax, settings.gap_b, gap_seed).stage(STAGE)?;
            w.write_json(STAGE, &join(prefix, "gap.json"), &curve)?;
            (curve.selected_gap, Some(curve))
        }
    };
    let (labels, km) = match (settings.on, som) {
        (ClusterInput::Som, Some(m)) => {
            let c = cluster_via_som(m, k, kmeans_seed).stage(STAGE)?;
            let mut node_csv = String::from("node,cluster\n");
            for (n, l) in c.node_labels.iter().enumerate() {
                node_csv.push_str(&format!("{n},{}\n", l + 1));
            }
            w.write(STAGE, &join(prefix, "node_labels.csv"), node_csv)?;
            (c.labels, c.kmeans)
        }
        _ => {
            let km = kmeans(features, k, kmeans_seed, DEFAULT_MAX_ITER).stage(STAGE)?;
            (km.labels.clone(), km)
        }
    };
    w.write(STAGE, &join(prefix, "labels.csv"), labels_csv(ids, &labels))?;
    w.write_json(STAGE, &join(prefix, "kmeans.json"), &km)?;
    Ok(ClusterOutput { labels, k, gap, kmeans: km })
}

/// Cluster profiles, pairwise Welch p-values and categorical composition.
#[allow(clippy::too_many_arguments)]
pub fn run_profiles(
    w: &mut ArtifactWriter,
    prefix: &str,
    labels: &[usize],
    tfp: &[f64],
    scores: &Matrix<f64>,
    raw: Option<(&[String], &Matrix<f64>, &[f64])>,
    categories: &[(String, Vec<String>)],
) -> CliResult<()> {
    const STAGE: &str = "profiles";
    let per_worker;
    let raw_vars = match raw {
        Some((names, absolute, labor)) => {
            let mut pw = absolute.clone();
            for (r, &l) in labor.iter().enumerate() {
                for x in pw.row_mut(r) {
                    *x = if l > 0.0 { *x / l } else { f64::NAN };
                }
            }
            per_worker = pw;
            Some(RawVariables { names, absolute, per_worker: &per_worker })
        }
        None => None,
    };
    let profile = cluster_profiles(labels, tfp, scores, raw_vars.as_ref()).stage(STAGE)?;
    let pcs = component_names(scores.ncols());
    w.write(STAGE, &join(prefix, "profile.csv"), profile_table_csv(&profile, &pcs, "TFP"))?;
    if let (Some(abs), Some(pw)) = (&profile.raw_means, &profile.per_worker_means) {
        let k = profile.sizes.len();
        let mut csv = String::from("variable,form");
        for c in 1..=k {
            csv.push_str(&format!(",cluster_{c}"));
        }
        csv.push('\n');
        for (form, m) in [("absolute", abs), ("per_worker", pw)] {
            for (j, name) in profile.raw_names.iter().enumerate() {
                csv.push_str(&format!("{name},{form}"));
                for c in 0..k {
                    csv.push_str(&format!(",{}", m[(c, j)]));
                }
                csv.push('\n');
            }
        }
        w.write(STAGE, &join(prefix, "raw_profile.csv"), csv)?;
    }
    let welch = welch_matrix(labels, tfp).stage(STAGE)?;
    let k = welch.nrows();
    let cols: Vec<String> = (1..=k).map(|c| format!("cluster_{c}")).collect();
    let ids: Vec<String> = cols.clone();
    w.write(STAGE, &join(prefix, "welch.csv"), Table { ids, columns: cols, values: welch }.to_csv("cluster"))?;
    let mut comp = BTreeMap::new();
    for (name, values) in categories {
        comp.insert(name.clone(), composition::<f64>(labels, values).stage(STAGE)?);
    }
    w.write_json(STAGE, &join(prefix, "composition.json"), &comp)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcrOutput {
    pub full: RegressionReport<f64>,
    pub with_controls: Option<RegressionReport<f64>>,
    pub by_cluster: Vec<ClusterRegression<f64>>,
}

/// Full-sample PCR, PCR with dummy controls, and one PCR per cluster.
pub fn run_pcr(
    w: &mut ArtifactWriter,
    prefix: &str,
    tfp: &[f64],
    scores: &Matrix<f64>,
    labels: Option<&[usize]>,
    controls: Option<&[Categorical]>,
) -> CliResult<PcrOutput> {
    const STAGE: &str = "pcr";
    let full = pcr(tfp, scores, None).stage(STAGE)?;
    w.write(STAGE, &join(prefix, "pcr_full.csv"), full.to_csv())?;
    let with_controls = match controls {
        Some(c) if !c.is_empty() => {
            let r = pcr(tfp, scores, Some(c)).stage(STAGE)?;
            w.write(STAGE, &join(prefix, "pcr_controls.csv"), r.to_csv())?;
            Some(r)
        }
        _ => None,
    };
    let by_cluster = match labels {
        Some(l) => pcr_by_cluster(tfp, scores, l, None).stage(STAGE)?,
        None => Vec::new(),
    };
    let out = PcrOutput { full, with_controls, by_cluster };
    w.write_json(STAGE, &join(prefix, "pcr.json"), &out)?;
    Ok(out)
}

/// Cross-validated Lasso of TFP on the original-scale variables.
pub fn run_lasso(
    w: &mut ArtifactWriter,
    prefix: &str,
    x: &Matrix<f64>,
    y: &[f64],
    names: &[String],
    settings: &LassoCvSettings<f64>,
) -> CliResult<LassoResult<f64>> {
    const STAGE: &str = "lasso";
    let r = lasso_cv(x, y, names, settings).stage(STAGE)?;
    let mut csv = String::from("lambda,mean_mse,sd_mse,se_mse,nonzeros\n");
    for p in &r.cv_curve {
        csv.push_str(&format!("{},{},{},{},{}\n", p.lambda, p.mean_mse, p.sd_mse, p.se_mse, p.nonzeros));
    }
    w.write(STAGE, &join(prefix, "lasso_cv.csv"), csv)?;
    w.write_json(STAGE, &join(prefix, "lasso.json"), &r)?;
    Ok(r)
}
