use std::path::Path;
use std::process::{Command, Output};

use permlearn::harness::{run_recovery_experiment, ExperimentSpec};
use permlearn::mixtures::{ComponentDensity, Gaussian};
use permlearn::{mle_estimate, LabeledSample, MixingMeasure};
use serde_json::Value;
use statrs::distribution::{ContinuousCDF, Normal};

fn permlearn(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permlearn"))
        .current_dir(cwd)
        .env_remove("PERMLEARN_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(cwd: &Path, args: &[&str]) -> String {
    let out = permlearn(cwd, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn two_gaussians(mu: f64) -> MixingMeasure {
    let g = |m: f64| -> ComponentDensity { Gaussian::isotropic(vec![m], 1.0).unwrap().into() };
    MixingMeasure::new(vec![0.5, 0.5], vec![g(-mu), g(mu)]).unwrap()
}

#[test]
fn gen_writes_both_mixtures_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "--out",
            "o",
            "gen",
            "--family",
            "gaussian-grid",
            "--k",
            "4",
            "--dim",
            "2",
            "--eta",
            "1",
            "--seed",
            "7",
        ],
    );
    let truth = std::fs::read_to_string(dir.path().join("o/truth.json")).unwrap();
    let model = std::fs::read_to_string(dir.path().join("o/model.json")).unwrap();
    assert_eq!(MixingMeasure::from_json_str(&truth).unwrap().k(), 4);
    assert_eq!(MixingMeasure::from_json_str(&model).unwrap().dim(), 2);
    let m = read_json(dir.path().join("o/manifest.json"));
    assert_eq!(m["subcommand"], "gen");
    assert_eq!(m["seeds"], serde_json::json!([7]));
    assert_eq!(m["config"]["spec"]["k"], 4);
    assert_eq!(
        m["artifacts"],
        serde_json::json!(["truth.json", "model.json"])
    );
}

#[test]
fn gen_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        [
            "--out",
            out,
            "gen",
            "--k",
            "9",
            "--seed",
            "3",
            "--samples",
            "50",
        ]
    };
    ok(dir.path(), &args("a"));
    ok(dir.path(), &args("b"));
    for f in ["truth.json", "model.json", "data.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn invalid_spec_exits_nonzero_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = permlearn(dir.path(), &["--out", "o", "gen", "--eta", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("eta must be > 0"));
    assert!(!dir.path().join("o/truth.json").exists());
}

#[test]
fn output_dir_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_permlearn"))
        .current_dir(dir.path())
        .env("PERMLEARN_OUT_DIR", "from-env")
        .args(["gen", "--k", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/truth.json").exists());
}

#[test]
fn estimate_all_shares_counts_and_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "--out",
            "g",
            "gen",
            "--k",
            "4",
            "--eta",
            "0.5",
            "--seed",
            "2",
            "--samples",
            "60",
        ],
    );
    let stdout = ok(
        dir.path(),
        &[
            "--out",
            "e",
            "estimate",
            "--model",
            "g/model.json",
            "--data",
            "g/data.csv",
            "--method",
            "all",
        ],
    );
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report, read_json(dir.path().join("e/estimate.json")));
    let outcomes = report["outcomes"].as_array().unwrap();
    let methods: Vec<&str> = outcomes
        .iter()
        .map(|o| o["method"].as_str().unwrap())
        .collect();
    assert_eq!(methods, ["mle", "greedy", "mv"]);
    for o in outcomes {
        assert_eq!(
            o["diagnostics"]["class_counts"],
            outcomes[0]["diagnostics"]["class_counts"]
        );
        assert_eq!(
            o["diagnostics"]["region_counts"],
            outcomes[0]["diagnostics"]["region_counts"]
        );
    }

    // The same inputs through the library give the same JSON text.
    let model = MixingMeasure::from_json_str(
        &std::fs::read_to_string(dir.path().join("g/model.json")).unwrap(),
    )
    .unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("g/data.csv")).unwrap();
    let data: Vec<LabeledSample> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            let vals: Vec<&str> = r.iter().collect();
            let (y, x) = vals.split_last().unwrap();
            LabeledSample::new(
                x.iter().map(|v| v.parse().unwrap()).collect(),
                y.parse::<usize>().unwrap() - 1,
            )
            .unwrap()
        })
        .collect();
    let lib = serde_json::to_value(mle_estimate(&model, &data).unwrap()).unwrap();
    let mut cli = outcomes[0].clone();
    cli.as_object_mut().unwrap().remove("method");
    assert_eq!(
        serde_json::to_string(&cli).unwrap(),
        serde_json::to_string(&lib).unwrap()
    );
}

#[test]
fn mv_on_single_region_data_reports_empty_region() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("m.json"),
        two_gaussians(1.0).to_json_string(),
    )
    .unwrap();
    std::fs::write(dir.path().join("d.csv"), "x_1,y\n-1.5,1\n-0.7,2\n-2.0,1\n").unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "--out", "e", "estimate", "--model", "m.json", "--data", "d.csv", "--method", "mv",
        ],
    );
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["outcomes"][0]["result"]["status"], "failure");
    assert_eq!(report["outcomes"][0]["result"]["reason"], "empty_region");
}

#[test]
fn estimate_rejects_bad_data() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("m.json"),
        two_gaussians(1.0).to_json_string(),
    )
    .unwrap();
    std::fs::write(dir.path().join("d.csv"), "x_1,y\n").unwrap();
    let out = permlearn(
        dir.path(),
        &["estimate", "--model", "m.json", "--data", "d.csv"],
    );
    assert!(!out.status.success());
    std::fs::write(dir.path().join("d.csv"), "x_1,y\n0.5,3\n").unwrap();
    let out = permlearn(
        dir.path(),
        &["estimate", "--model", "m.json", "--data", "d.csv"],
    );
    assert!(!out.status.success());
}

#[test]
fn analyze_w1_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--out", "g", "gen", "--k", "4"]);
    let stdout = ok(
        dir.path(),
        &[
            "--out",
            "a",
            "analyze",
            "--w1",
            "g/truth.json",
            "g/truth.json",
            "--mc",
            "2000",
        ],
    );
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["w1"]["distance"]["value"], 0.0);
    assert_eq!(v["mc_samples"], 2000);
    assert_eq!(v["seed"], 0);
}

#[test]
fn analyze_gap_mv_matches_normal_cdf() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("m.json"),
        two_gaussians(0.5).to_json_string(),
    )
    .unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "--out", "a", "analyze", "--model", "m.json", "--gap-mv", "--mc", "100000",
        ],
    );
    let v: Value = serde_json::from_str(&stdout).unwrap();
    let value = v["gap_mv"]["gap"]["value"].as_f64().unwrap();
    let hw = v["gap_mv"]["gap"]["half_width"].as_f64().unwrap();
    let n = Normal::standard();
    let exact = n.cdf(0.5) - n.cdf(-0.5);
    assert!((exact - 0.3829).abs() < 1e-4);
    assert!((value - exact).abs() <= hw, "{value} ± {hw} vs {exact}");
    assert_eq!(v["gap_mv"]["samples_used"], 100000);
}

#[test]
fn analyze_corollary_mv() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "analyze",
            "--corollary",
            "mv",
            "--k",
            "4",
            "--delta",
            "0.05",
            "--gap",
            "0.3",
        ],
    );
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["corollary"]["required_n"], 3524);
}

#[test]
fn analyze_bounds_and_risk() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["--out", "g", "gen", "--k", "2", "--seed", "4"],
    );
    let stdout = ok(
        dir.path(),
        &[
            "--out",
            "a",
            "analyze",
            "--model",
            "g/model.json",
            "--truth",
            "g/truth.json",
            "--thm1",
            "--thm2",
            "--counts",
            "40,40",
            "--risk",
            "--pi-hat",
            "2,1",
            "--mc",
            "20000",
        ],
    );
    let v: Value = serde_json::from_str(&stdout).unwrap();
    for key in ["thm1", "thm2"] {
        let b = v[key]["bound"]["recovery_lower_bound"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&b));
        assert_eq!(v[key]["mc_samples"], 20000);
    }
    assert!(v["risk"]["excess"]["value"].as_f64().unwrap() > 0.5);
}

#[test]
fn analyze_without_a_request_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!permlearn(dir.path(), &["analyze"]).status.success());
}

#[test]
fn experiment_default_shape_and_library_agreement() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--out", "x", "experiment", "--trials", "5"]);
    let csv_text = std::fs::read_to_string(dir.path().join("x/recovery.csv")).unwrap();
    assert_eq!(csv_text.lines().count(), 1 + 3 * 33);
    let spec = ExperimentSpec {
        trials: 5,
        ..ExperimentSpec::default()
    };
    let lib =
        permlearn::harness::curve_csv_string(&run_recovery_experiment(&spec).unwrap()).unwrap();
    assert_eq!(csv_text, lib);
    let sidecar: ExperimentSpec = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("x/recovery_spec.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sidecar, spec);
}

#[test]
fn experiment_thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str, t: &'static str| {
        [
            "--out",
            out,
            "--threads",
            t,
            "experiment",
            "--k",
            "9",
            "--eta",
            "0.5",
            "--trials",
            "16",
            "--label-noise",
            "0.1",
        ]
    };
    ok(dir.path(), &args("one", "1"));
    ok(dir.path(), &args("eight", "8"));
    assert_eq!(
        std::fs::read(dir.path().join("one/recovery.csv")).unwrap(),
        std::fs::read(dir.path().join("eight/recovery.csv")).unwrap()
    );
}

#[test]
fn spec_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("s.json"),
        r#"{"k": 2, "trials": 3, "n_grid": [5, 10], "seed": 9}"#,
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "--out",
            "x",
            "experiment",
            "--spec",
            "s.json",
            "--trials",
            "4",
        ],
    );
    let spec: Value = read_json(dir.path().join("x/recovery_spec.json"));
    assert_eq!(spec["k"], 2);
    assert_eq!(spec["trials"], 4);
    assert_eq!(spec["n_grid"], serde_json::json!([5, 10]));
    assert_eq!(spec["seed"], 9);
}
