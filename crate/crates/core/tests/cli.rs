//! End-to-end runs of the `fracheat` binary.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fracheat"));
    c.env_remove("FRACHEAT_SEED");
    c
}

fn experiments() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../experiments")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Relative paths of every file below `dir`.
fn files(dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every file is the manifest or listed by it, and every listed file exists.
fn assert_no_orphans(dir: &Path) {
    let listed: BTreeSet<String> = manifest(dir)["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let mut present = files(dir);
    assert!(present.remove("manifest.json"));
    assert_eq!(present, listed);
}

/// Every output except the manifest matches byte for byte.
fn assert_same_outputs(a: &Path, b: &Path) {
    let fa = files(a);
    assert_eq!(fa, files(b));
    for f in fa.iter().filter(|f| *f != "manifest.json") {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn hurst_outside_the_regular_regime_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin().args(["generate", "--H", "0.3", "--out"]).arg(dir.path()));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("H must lie in (1/2,1)"), "{}", stderr(&o));
}

#[test]
fn unknown_commands_and_experiments_exit_with_one() {
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin().args(["verify", "--experiment", "nope", "--out"]).arg(dir.path().join("r.json")));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("contraction"), "error lists the valid names: {}", stderr(&o));
    let o = run(bin().args(["solve", "--spec", "/nonexistent/problem.toml", "--out"]).arg(dir.path()));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn generate_is_reproducible_and_honours_the_seed_variable() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["generate", "--H", "0.7", "--m", "32", "--K", "3", "--seed", "9", "--out"];
    assert!(run(bin().args(args).arg(a.path())).status.success());
    assert!(run(bin().args(args).arg(b.path())).status.success());
    assert_same_outputs(a.path(), b.path());
    assert_no_orphans(a.path());

    let o = run(bin()
        .env("FRACHEAT_SEED", "9")
        .args(["generate", "--H", "0.7", "--m", "32", "--K", "3", "--out"])
        .arg(c.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(a.path().join("paths.fbm")).unwrap(), fs::read(c.path().join("paths.fbm")).unwrap());
    assert_eq!(manifest(c.path())["seed"], 9);

    let csv = fs::read_to_string(a.path().join("paths.csv")).unwrap();
    assert!(csv.starts_with("t,path_0,path_1,path_2\n"));
    assert_eq!(csv.lines().count(), 34);
}

#[test]
fn norms_reports_the_chain_for_a_csv_step_function() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("phi.csv");
    fs::write(&input, "cell,value\n0,1\n1,1\n2,1\n3,1\n").unwrap();
    let out = dir.path().join("out");
    let o = run(bin().args(["norms", "--H", "0.75", "--p", "2", "--input"]).arg(&input).arg("--out").arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("norms.json")).unwrap()).unwrap();
    // 1_{[0,1]}: both kernel norms equal T^H = 1 and the L_p norm is 1.
    for key in ["H", "absH", "L_2", "L_p"] {
        assert!((report["values"][key].as_f64().unwrap() - 1.0).abs() < 1e-12, "{key}");
    }
    assert!(report["checks"].as_object().unwrap().values().all(|v| v == true));
    assert_no_orphans(&out);
}

#[test]
fn solve_writes_fields_norms_and_a_hashed_manifest() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let spec = experiments().join("det_g.toml");
    for d in [a.path(), b.path()] {
        let o = run(bin()
            .args(["solve", "--m", "16", "--replicates", "2", "--p", "4", "--n", "1", "--spec"])
            .arg(&spec)
            .arg("--out")
            .arg(d));
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_same_outputs(a.path(), b.path());
    assert_no_orphans(a.path());
    let m = manifest(a.path());
    assert_eq!(m["extra"]["spec_sha256"].as_str().unwrap().len(), 64);
    let field = fs::read(a.path().join("fields/r0001/u0016.fld")).unwrap();
    assert_eq!(&field[..4], b"FLD1");
    let csv = fs::read_to_string(a.path().join("norms.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 17);
}

#[test]
fn solve_then_verify_weak_residual_passes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = experiments().join("det_g.toml");
    let o = run(bin().args(["solve", "--replicates", "1", "--spec"]).arg(&spec).arg("--out").arg(dir.path().join("solve")));
    assert!(o.status.success(), "{}", stderr(&o));
    let config = dir.path().join("verify.toml");
    fs::write(&config, format!("[solver]\nproblems = [{:?}]\nreplicates = 8\n", spec.display().to_string())).unwrap();
    let report = dir.path().join("v/report.json");
    let o = run(bin().args(["verify", "--experiment", "weak_residual", "--config"]).arg(&config).arg("--out").arg(&report));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["pass"], true);
    assert!(r["rhs"].as_f64().unwrap() >= 1.0, "fitted order {}", r["rhs"]);
}

#[test]
fn verify_contraction_on_defaults_passes_and_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        let o = run(bin()
            .args(["verify", "--experiment", "contraction,spectral_laws", "--emit-plot-data", "--out"])
            .arg(d.join("report.json")));
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_same_outputs(a.path(), b.path());
    assert_no_orphans(a.path());
    let reports: Value = serde_json::from_str(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);
    assert!(files(a.path()).iter().any(|f| f.starts_with("report_contraction_") && f.ends_with(".csv")));
}

#[test]
fn a_failing_experiment_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("strict.toml");
    // A fitted order of 10 is out of reach, so the experiment runs and fails.
    fs::write(&config, "[solver]\ncells = [16, 32]\nreplicates = 2\nmin_order = 10.0\n").unwrap();
    let o = run(bin().args(["verify", "--experiment", "weak_residual", "--config"]).arg(&config).arg("--out").arg(dir.path().join("r.json")));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn skorohod_command_checks_the_battery() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin().args(["skorohod", "--n-mc", "2000", "--pathwise", "50", "--out"]).arg(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("skorohod.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("pathwise")));
    assert_no_orphans(dir.path());
    let o = run(bin().args(["skorohod", "--H", "1.2", "--out"]).arg(dir.path()));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn threads_flag_does_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let config = a.path().join("small.toml");
    fs::write(&config, "[fbm_law]\nn_paths = 2000\nhursts = [0.7]\n").unwrap();
    for (d, threads) in [(a.path(), "1"), (b.path(), "3")] {
        let o = run(bin()
            .args(["--threads", threads, "verify", "--experiment", "fbm_law", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(d.join("out/r.json")));
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(fs::read(a.path().join("out/r.json")).unwrap(), fs::read(b.path().join("out/r.json")).unwrap());
}
