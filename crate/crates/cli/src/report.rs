//! Markdown summary of a finished run, built only from the files listed in its manifest.

use std::fmt::Write;
use std::path::Path;

use firmprod::cluster::TransitionMatrix;
use firmprod::pca::ComponentCorrelations;
use firmprod::regress::{lasso_table, significance_stars, ClusterRegression, LassoResult, RegressionReport, SelectionRule};
use serde::de::DeserializeOwned;

use crate::artifacts::Manifest;
use crate::error::{CliError, CliResult};
use crate::stages::{EstimateSummary, PcrOutput, ScreeRow};

pub const REPORT_FILE: &str = "report.md";

fn incomplete(stage: &str, file: &str) -> CliError {
    CliError::stage("report", format!("incomplete manifest: stage `{stage}` has no {file}"))
}

fn read(manifest: &Manifest, dir: &Path, stage: &str, file: &str) -> CliResult<String> {
    if manifest.find(file).is_none() {
        return Err(incomplete(stage, file));
    }
    std::fs::read_to_string(dir.join(file)).map_err(|e| CliError::stage("report", format!("{file}: {e}")))
}

fn read_json<T: DeserializeOwned>(manifest: &Manifest, dir: &Path, stage: &str, file: &str) -> CliResult<T> {
    serde_json::from_str(&read(manifest, dir, stage, file)?).map_err(|e| CliError::stage("report", format!("{file}: {e}")))
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.4}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "-".into())
}

/// Renders a CSV as a Markdown table, numbers to four decimals.
fn csv_table(text: &str) -> String {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut out = String::new();
    for (i, rec) in rdr.records().flatten().enumerate() {
        let cells: Vec<String> = rec
            .iter()
            .map(|c| match c.parse::<f64>() {
                Ok(v) if i > 0 && c.contains('.') => num(v),
                _ if i > 0 && c.is_empty() => "-".into(),
                _ => c.to_string(),
            })
            .collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
        if i == 0 {
            let _ = writeln!(out, "|{}", "---|".repeat(cells.len()));
        }
    }
    out
}

fn regression_table(r: &RegressionReport<f64>) -> String {
    let mut s = String::from("| Term | Estimate | p-value | |\n|---|---:|---:|---|\n");
    for i in 0..r.terms.len() {
        let p = r.p_values[i];
        let _ = writeln!(s, "| {} | {} | {:.2} | {} |", r.terms[i], num(r.coefficients[i]), p, significance_stars(p));
    }
    let _ = writeln!(s, "\nN = {}, R² = {}", r.n, num(r.r_squared));
    s
}

/// Builds the Markdown report for `manifest`, whose files live in `dir`.
pub fn render_report(manifest: &Manifest, dir: &Path) -> CliResult<String> {
    let mut md = String::from("# Firm productivity report\n\n");
    let _ = writeln!(md, "Seed: {}. Periods: {}.\n", manifest.seed, manifest.periods.join(", "));

    md.push_str("## Descriptive statistics\n\n");
    for p in &manifest.periods {
        let _ = writeln!(md, "### {p}\n\n{}", csv_table(&read(manifest, dir, "transform", &format!("{p}/descriptive.csv"))?));
    }

    md.push_str("## Production function coefficients\n\n| Period | Method | β_l | β_k | β_m | Firms |\n|---|---|---:|---:|---:|---:|\n");
    for p in &manifest.periods {
        let e: EstimateSummary = read_json(manifest, dir, "estimate", &format!("{p}/estimate.json"))?;
        let c = &e.coefficients;
        let _ = writeln!(md, "| {p} | {} | {} | {} | {} | {} |", e.method.label(), num(c.beta_l), num(c.beta_k), opt(c.beta_m), e.firms_with_tfp);
    }
    md.push('\n');

    md.push_str("## Explained variance\n\n");
    for p in &manifest.periods {
        let scree: Vec<ScreeRow> = read_json(manifest, dir, "pca", &format!("{p}/scree.json"))?;
        let _ = writeln!(md, "### {p}\n\n| Component | Eigenvalue | Variance | Cumulative |\n|---|---:|---:|---:|");
        let mut cum = 0.0;
        for r in scree {
            cum += r.fraction;
            let _ = writeln!(md, "| PC{} | {} | {} | {:.1}% |", r.component, num(r.eigenvalue), r.percent, cum * 100.0);
        }
        md.push('\n');
    }

    md.push_str("## Variables most correlated with each component\n\n");
    for p in &manifest.periods {
        let corr: Vec<ComponentCorrelations<f64>> = read_json(manifest, dir, "pca", &format!("{p}/correlations.json"))?;
        let _ = writeln!(md, "### {p}\n\n| Component | Positive | Negative |\n|---|---|---|");
        for c in corr {
            let list = |v: &[(String, f64)]| v.iter().map(|(n, r)| format!("{n} ({r:.2})")).collect::<Vec<_>>().join(", ");
            let _ = writeln!(md, "| PC{} | {} | {} |", c.component, list(&c.top_positive), list(&c.top_negative));
        }
        md.push('\n');
    }

    md.push_str("## Cluster profiles\n\n");
    for p in &manifest.periods {
        let _ = writeln!(md, "### {p}\n\n{}", csv_table(&read(manifest, dir, "profiles", &format!("{p}/profile.csv"))?));
    }

    md.push_str("## Welch tests on mean TFP (p-values)\n\n");
    for p in &manifest.periods {
        let _ = writeln!(md, "### {p}\n\n{}", csv_table(&read(manifest, dir, "profiles", &format!("{p}/welch.csv"))?));
    }

    md.push_str("## Cluster transitions\n\n");
    if manifest.periods.len() < 2 {
        md.push_str("Cluster transitions require two periods.\n\n");
    } else {
        for pair in manifest.periods.windows(2) {
            let base = format!("transition_{}_{}", pair[0], pair[1]);
            let t: TransitionMatrix = read_json(manifest, dir, "transition", &format!("{base}.json"))?;
            let _ = writeln!(
                md,
                "### {} to {}\n\n{}\nFirms only in {}: {}. Firms only in {}: {}.\n",
                pair[0],
                pair[1],
                csv_table(&read(manifest, dir, "transition", &format!("{base}.csv"))?),
                pair[0],
                t.only_in_a,
                pair[1],
                t.only_in_b
            );
        }
    }

    md.push_str("## Principal-component regressions of TFP\n\n");
    for p in &manifest.periods {
        let r: PcrOutput = read_json(manifest, dir, "pcr", &format!("{p}/pcr.json"))?;
        let _ = writeln!(md, "### {p}, full sample\n\n{}", regression_table(&r.full));
        if let Some(c) = &r.with_controls {
            let _ = writeln!(md, "### {p}, with controls\n\n{}", regression_table(c));
        }
        for c in &r.by_cluster {
            match c {
                ClusterRegression::Fitted(rep) => {
                    let _ = writeln!(md, "### {p}, cluster {}\n\n{}", rep.subsample.map_or(0, |s| s + 1), regression_table(rep));
                }
                ClusterRegression::Skipped { cluster, reason, .. } => {
                    let _ = writeln!(md, "### {p}, cluster {}\n\nSkipped: {reason}.\n", cluster + 1);
                }
            }
        }
    }

    md.push_str("## Lasso selection\n\n");
    let lasso: Vec<(String, LassoResult<f64>)> = manifest
        .periods
        .iter()
        .map(|p| Ok((p.clone(), read_json(manifest, dir, "lasso", &format!("{p}/lasso.json"))?)))
        .collect::<CliResult<_>>()?;
    let refs: Vec<(&str, &LassoResult<f64>)> = lasso.iter().map(|(p, r)| (p.as_str(), r)).collect();
    if lasso.iter().all(|(_, r)| r.nonzero_terms.is_empty()) {
        md.push_str("No variable is selected in any period.\n");
    } else {
        md.push_str(&lasso_table(&refs));
    }
    for (p, r) in &lasso {
        let rule = match r.selected_rule {
            SelectionRule::Min => "minimum-error",
            SelectionRule::OneSd => "one-standard-error",
        };
        let _ = write!(md, "\n{p}: λ = {} ({rule} rule, {} folds).", num(r.lambda), r.folds);
    }
    md.push('\n');
    Ok(md)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_tables_format_numbers() {
        let t = csv_table("cluster,a,b\n1,,0.123456\n2,3,1.5\n");
        assert_eq!(t, "| cluster | a | b |\n|---|---|---|\n| 1 | - | 0.1235 |\n| 2 | 3 | 1.5000 |\n");
    }

    #[test]
    fn missing_artifacts_name_the_stage() {
        let m = Manifest { seed: 0, periods: vec!["a".into()], artifacts: vec![] };
        let err = render_report(&m, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("incomplete manifest") && err.contains("transform"), "{err}");
    }
}
