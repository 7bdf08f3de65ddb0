use std::path::PathBuf;
use std::process::Command;

use pimd_cli::experiments::run_time_average;
use pimd_cli::{CliError, ExperimentConfig};
use pimd_core::Method;

fn run_csv(cfg: &ExperimentConfig) -> String {
    let mut buf = Vec::new();
    run_time_average(cfg, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/tiny_run.csv")
}

/// Regenerate with `PIMD_UPDATE_GOLDEN=1 cargo test -p pimd-cli --test cli_runs`.
#[test]
fn tiny_preset_matches_golden_file() {
    let csv = run_csv(&ExperimentConfig::preset("tiny").unwrap());
    if std::env::var_os("PIMD_UPDATE_GOLDEN").is_some() {
        std::fs::write(golden_path(), &csv).unwrap();
    }
    let golden = std::fs::read_to_string(golden_path()).unwrap();
    assert_eq!(csv, golden);
}

#[test]
fn reruns_are_identical() {
    let cfg = ExperimentConfig::preset("tiny").unwrap();
    assert_eq!(run_csv(&cfg), run_csv(&cfg));
    let mut other = cfg.clone();
    other.run.seed += 1;
    assert_ne!(run_csv(&cfg), run_csv(&other));
}

#[test]
fn full_batch_reproduces_exact_forces() {
    let mut cfg = ExperimentConfig::preset("tiny").unwrap();
    cfg.system.batch_size = cfg.system.n_particles;
    cfg.experiment.method = Method::PmmLang;
    let exact = run_csv(&cfg);
    cfg.experiment.method = Method::PmmLangRbm;
    let rbm = run_csv(&cfg);
    // Rows agree in every column except the pair count, since the exact
    // strategy reuses the force from the end of the previous step.
    let strip = |s: &str| -> Vec<String> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(s.as_bytes());
        let header = r.headers().unwrap().clone();
        let skip = header.iter().position(|h| h == "pair_evals").unwrap();
        r.records()
            .map(|rec| {
                let rec = rec.unwrap();
                rec.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, f)| f).collect::<Vec<_>>().join(",")
            })
            .collect()
    };
    let (a, b) = (strip(&exact), strip(&rbm));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn config_errors_name_the_field() {
    let cases = [
        ("system.dt = -1.0", "system.dt"),
        ("system.n_particles = 0", "system.n_particles"),
        ("system.batch_size = 3\nsystem.n_particles = 4", "system.batch_size"),
        ("experiment.method = \"pmmLang+split\"\npotential.kind = \"coulomb\"", "experiment.method"),
    ];
    for (toml, field) in cases {
        match ExperimentConfig::from_toml(toml).and_then(|c| c.validate().map(|_| c)) {
            Err(CliError::Config { field: f, .. }) => assert_eq!(f, field, "{toml}"),
            other => panic!("{toml}: expected a config error on {field}, got {other:?}"),
        }
    }
    assert!(matches!(
        ExperimentConfig::from_toml("system.nbeads = 4"),
        Err(CliError::Parse(_))
    ));
}

#[test]
fn binary_writes_run_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_pimd"))
        .args(["run", "--preset", "tiny", "--seed", "7", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(csv, std::fs::read_to_string(golden_path()).unwrap());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema"], "pimd-summary v1");
    assert_eq!(summary["preset"], "tiny");
    assert!(summary["mean"].as_f64().unwrap().is_finite());

    let bad = Command::new(env!("CARGO_BIN_EXE_pimd"))
        .args(["run", "--preset", "no-such-preset", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("no-such-preset"));
}

#[test]
fn every_subcommand_is_listed() {
    let out = Command::new(env!("CARGO_BIN_EXE_pimd")).arg("--help").output().unwrap();
    let help = String::from_utf8_lossy(&out.stdout);
    for cmd in ["run", "error-table", "ensemble", "strong-error", "spectrum-check", "rejection-table"] {
        assert!(help.contains(cmd), "{cmd} missing from help");
    }
}
