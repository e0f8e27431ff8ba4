use std::path::Path;
use std::process::Command;

use firmprod_cli::artifacts::{Manifest, MANIFEST_FILE};
use firmprod_cli::config::{KChoice, PipelineConfig};
use firmprod_cli::pipeline::{period_labels, run_pipeline};
use firmprod_cli::report::{render_report, REPORT_FILE};

fn config(windows: &str, out: &Path) -> PipelineConfig {
    let text = format!(
        r#"{{
            "synthetic": {{"dgp": {{"n_firms": 200, "n_periods": 6, "accounting": {{}}}}, "windows": {windows}}},
            "transforms": {{"log": ["acc01", "acc02", "acc03", "acc04", "acc05", "acc06", "acc07", "acc08"]}},
            "pca": {{"n_components": 3}},
            "cluster": {{"k": 3}},
            "regression": {{"lasso_folds": 5}},
            "seed": 11
        }}"#
    );
    let mut cfg: PipelineConfig = serde_json::from_str(&text).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

const TWO: &str = r#"[{"label": "p1", "from": 0, "to": 2}, {"label": "p2", "from": 3, "to": 5}]"#;

#[test]
fn two_period_run_is_complete_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m1 = run_pipeline(&config(TWO, a.path())).unwrap();
    let m2 = run_pipeline(&config(TWO, b.path())).unwrap();

    assert_eq!(m1.periods, ["p1", "p2"]);
    assert!(m1.artifacts.len() >= 14, "{} artifacts", m1.artifacts.len());
    for stage in ["simulate", "estimate", "transform", "impute", "pca", "som", "cluster", "profiles", "transition", "pcr", "lasso"] {
        assert!(m1.stages().contains(&stage), "no {stage} artifacts");
    }
    for e in &m1.artifacts {
        let bytes = std::fs::read(a.path().join(&e.file)).unwrap();
        assert_eq!(firmprod_cli::artifacts::sha256_hex(&bytes), e.checksum, "{}", e.file);
    }
    assert_eq!(m1, m2, "checksums differ between identical runs");
    assert_eq!(Manifest::load(&a.path().join(MANIFEST_FILE)).unwrap(), m1);

    let report = std::fs::read_to_string(a.path().join(REPORT_FILE)).unwrap();
    for heading in [
        "## Descriptive statistics",
        "## Production function coefficients",
        "## Explained variance",
        "## Variables most correlated with each component",
        "## Cluster profiles",
        "## Welch tests",
        "## Cluster transitions",
        "## Principal-component regressions",
        "## Lasso selection",
    ] {
        assert!(report.contains(heading), "report lacks {heading}");
    }
    assert!(report.contains("### p1 to p2"));
    assert_eq!(report, std::fs::read_to_string(b.path().join(REPORT_FILE)).unwrap());

    let labels = period_labels(&m1, a.path()).unwrap();
    assert_eq!(labels["p1"].len(), labels["p2"].len());
    assert!(labels["p1"].iter().all(|(_, l)| *l < 3));
}

#[test]
fn changing_the_seed_changes_simulation_and_map() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = r#"[{"label": "p1", "from": 0, "to": 5}]"#;
    let m1 = run_pipeline(&config(one, a.path())).unwrap();
    let mut cfg = config(one, b.path());
    cfg.seed = 12;
    let m2 = run_pipeline(&cfg).unwrap();
    let sum = |m: &Manifest, f: &str| m.find(f).unwrap().checksum.clone();
    assert_ne!(sum(&m1, "synthetic/truth.csv"), sum(&m2, "synthetic/truth.csv"));
    assert_ne!(sum(&m1, "p1/som_codebook.csv"), sum(&m2, "p1/som_codebook.csv"));
}

#[test]
fn single_period_report_notes_missing_transitions() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_pipeline(&config(r#"[{"label": "only", "from": 0, "to": 5}]"#, dir.path())).unwrap();
    assert!(m.find("transition_only_only.csv").is_none());
    let report = render_report(&m, dir.path()).unwrap();
    assert!(report.contains("Cluster transitions require two periods."));
}

#[test]
fn report_subcommand_matches_and_rejects_incomplete_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(TWO, &dir.path().join("run"));
    cfg.cluster.k = KChoice::Fixed(2);
    let m = run_pipeline(&cfg).unwrap();
    let run = dir.path().join("run");

    let status = Command::new(env!("CARGO_BIN_EXE_firmprod"))
        .args(["report", "--manifest"])
        .arg(run.join(MANIFEST_FILE))
        .arg("--output")
        .arg(dir.path().join("again.md"))
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        std::fs::read_to_string(dir.path().join("again.md")).unwrap(),
        std::fs::read_to_string(run.join(REPORT_FILE)).unwrap()
    );

    let mut broken = m.clone();
    broken.artifacts.retain(|a| a.file != "p2/pcr.json");
    let path = dir.path().join("broken.json");
    std::fs::write(&path, serde_json::to_string(&broken).unwrap()).unwrap();
    std::fs::copy(&path, run.join("broken.json")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_firmprod"))
        .args(["report", "--manifest"])
        .arg(run.join("broken.json"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("incomplete manifest") && err.contains("pcr"), "{err}");
}

#[test]
fn binary_pipeline_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(TWO, Path::new("ignored"));
    let mut value = serde_json::to_value(&cfg).unwrap();
    value.as_object_mut().unwrap().remove("output_dir");
    std::fs::write(dir.path().join("cfg.json"), value.to_string()).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_firmprod"))
        .args(["pipeline", "--config", "cfg.json", "--out-dir", "out", "--k", "2", "--seed", "5", "--no-controls"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = Manifest::load(&dir.path().join("out").join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.seed, 5);
    assert!(m.find("p1/pcr_controls.csv").is_none());
    let labels = period_labels(&m, &dir.path().join("out")).unwrap();
    assert!(labels["p1"].iter().all(|(_, l)| *l < 2));
}
