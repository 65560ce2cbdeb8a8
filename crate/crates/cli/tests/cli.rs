use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use torus_kam_cli::ScenarioConfig;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_torus-kam"));
    c.arg("--quiet");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn exec(verb: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let status = bin()
        .arg(verb)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .status()
        .unwrap();
    status.code().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(format!("{name}.toml"));
    fs::write(&p, format!("name = \"{name}\"\n{body}")).unwrap();
    p
}

const HALF_TURN: &str = r#"
dimension = 1
generators = 1
rotations = [["1/2"]]
[perturbation]
source = "synthesized"
terms = []
"#;

#[test]
fn missing_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(exec("run", &tmp.path().join("nope.toml"), tmp.path(), &[]), 1);
}

#[test]
fn circle_golden_converges_with_decreasing_trace() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(exec("run", &scenario("circle_golden"), tmp.path(), &[]), 0);
    let mut rdr = csv::Reader::from_path(tmp.path().join("trace.csv")).unwrap();
    let hdr = rdr.headers().unwrap().clone();
    let col = hdr.iter().position(|h| h == "p_norm").unwrap();
    let norms: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert!(norms.len() >= 4, "{norms:?}");
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    let res = json(&tmp.path().join("result.json"));
    assert_eq!(res["status"], "converged");
    assert!(res["truth_error"].as_f64().unwrap() <= 1e-8);
    assert!(tmp.path().join("decay.csv").is_file());
}

#[test]
fn circle_rational_reports_resonance_at_three() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(exec("run", &scenario("circle_rational"), tmp.path(), &[]), 3);
    let res = json(&tmp.path().join("result.json"));
    assert_eq!(res["status"], "resonance");
    assert_eq!(res["resonance_mode"], serde_json::json!([3]));
}

#[test]
fn golden_spectrum_has_one_row_per_mode() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(exec("spectrum", &scenario("circle_golden"), tmp.path(), &["--kmax", "100"]), 0);
    let rows = csv::Reader::from_path(tmp.path().join("spectrum.csv")).unwrap().records().count();
    assert_eq!(rows, 100);
    let fit = json(&tmp.path().join("fit.json"));
    assert!(fit["diophantine"]["sigma"].as_f64().unwrap() > 0.0);
    assert!(fit["dolgopyat"]["c"].as_f64().unwrap() > 0.0);
    assert!(tmp.path().join("shells.csv").is_file());
}

#[test]
fn half_turn_kernels_at_even_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_scenario(tmp.path(), "half_turn", HALF_TURN);
    assert_eq!(exec("spectrum", &cfg, tmp.path(), &["--kmax", "4"]), 0);
    let fit = json(&tmp.path().join("fit.json"));
    assert_eq!(fit["kernel_modes"], serde_json::json!([[2], [4]]));
}

#[test]
fn zero_kmax_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(exec("spectrum", &scenario("circle_golden"), tmp.path(), &["--kmax", "0"]), 1);
}

#[test]
fn synthesize_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let zero = write_scenario(tmp.path(), "zero", HALF_TURN);
    assert_eq!(exec("synthesize", &zero, &tmp.path().join("zero"), &[]), 0);
    let f = json(&tmp.path().join("zero/perturbation.json"));
    for l in f["letters"].as_array().unwrap() {
        assert!(l["modes"].as_array().unwrap().is_empty());
    }

    assert_eq!(exec("synthesize", &scenario("circle_golden"), &tmp.path().join("sin"), &[]), 0);
    let f = json(&tmp.path().join("sin/perturbation.json"));
    for r in f["relator_residuals"].as_array().unwrap().iter().chain(f["inverse_residuals"].as_array().unwrap()) {
        assert!(r.as_f64().unwrap() <= 1e-13);
    }
    assert!(f["conjugacy"]["modes"].as_array().unwrap().len() == 2);

    let big = write_scenario(
        tmp.path(),
        "big",
        r#"
dimension = 1
generators = 1
rotations = [["0.61803398874989484820"]]
[perturbation]
source = "synthesized"
terms = [{ k = [1], sin = 0.1 }]
"#,
    );
    assert_eq!(exec("synthesize", &big, &tmp.path().join("big"), &[]), 2);
}

#[test]
fn file_source_reproduces_synthesized_run() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(exec("synthesize", &scenario("circle_golden"), tmp.path(), &[]), 0);
    let text = fs::read_to_string(scenario("circle_golden")).unwrap();
    let mut cfg = ScenarioConfig::from_toml(&text).unwrap();
    cfg.perturbation = torus_kam_cli::config::PerturbationSource::File {
        path: "perturbation.json".into(),
    };
    let path = tmp.path().join("from_file.toml");
    fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    assert_eq!(exec("run", &path, &tmp.path().join("run"), &[]), 0);
    let res = json(&tmp.path().join("run/result.json"));
    assert!(res["truth_error"].as_f64().unwrap() <= 1e-8);

    cfg.perturbation = torus_kam_cli::config::PerturbationSource::File { path: "missing.json".into() };
    fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    assert_eq!(exec("run", &path, &tmp.path().join("run"), &[]), 1);
}

#[test]
fn results_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        assert_eq!(exec("run", &scenario("z2_commuting"), &tmp.path().join(name), &["--seed", "7"]), 0);
    }
    let a = fs::read(tmp.path().join("a/result.json")).unwrap();
    let b = fs::read(tmp.path().join("b/result.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bundled_scenarios_round_trip() {
    for name in ["circle_golden", "circle_rational", "torus2_pair", "z2_commuting"] {
        let cfg = ScenarioConfig::load(&scenario(name)).unwrap();
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        assert_eq!(ScenarioConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
        cfg.validate(scenario(name).parent().unwrap()).unwrap();
    }
}

#[test]
fn json_scenarios_are_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::load(&scenario("circle_rational")).unwrap();
    let path = tmp.path().join("rational.json");
    fs::write(&path, cfg.to_json().unwrap()).unwrap();
    assert_eq!(exec("run", &path, tmp.path(), &[]), 3);
}

#[test]
fn inconsistent_rotations_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    // γ1² = 1 forces 2α ∈ Z.
    let cfg = write_scenario(
        tmp.path(),
        "torsion",
        r#"
dimension = 1
generators = 1
relators = [[1, 1]]
rotations = [["1/3"]]
[perturbation]
source = "synthesized"
terms = []
"#,
    );
    assert_eq!(exec("run", &cfg, tmp.path(), &[]), 1);
}

#[test]
fn random_source_runs_in_counterterm_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_scenario(
        tmp.path(),
        "random",
        r#"
dimension = 1
generators = 1
rotations = [["0.61803398874989484820"]]
seed = 3
[perturbation]
source = "random"
amplitude = 1e-4
decay = 0.5
[schedule]
eps0 = 0.01
harmonic_mode = "counterterm"
"#,
    );
    assert_eq!(exec("run", &cfg, tmp.path(), &[]), 0);
    let res = json(&tmp.path().join("result.json"));
    assert!(res["counterterm_norm"].as_f64().unwrap() > 0.0);
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
