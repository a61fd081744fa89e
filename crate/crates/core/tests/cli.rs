use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn mcarma(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcarma"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn forward_p1_gives_identity_minus_a() {
    let dir = tempfile::tempdir().unwrap();
    let model = r#"{"orders": {"p": 1, "q": 0, "d": 2, "m": 2},
        "A_blocks": [[[0.5, 0.25], [-1.0, 2.0]]], "B_blocks": [[[1.0, 0.0], [0.0, 1.0]]]}"#;
    write(dir.path(), "m.json", model);
    let o = mcarma(&["transform", "m.json", "--direction", "forward", "--h", "1", "--out", "r.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&dir.path().join("r.json"));
    let phi = &v["phi_blocks"][0];
    let want = [[0.5, -0.25], [1.0, -1.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(phi[i][j].as_f64().unwrap(), want[i][j]);
        }
    }
    assert!(v["manifest"]["input_digests"]["m.json"].is_string());
}

#[test]
fn forward_then_inverse_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcarma(
        &["transform", fixture("published_mcar.json").to_str().unwrap(), "--direction", "forward", "--out", "r.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = mcarma(&["transform", "r.json", "--direction", "inverse", "--out", "m.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let back = read_json(&dir.path().join("m.json"));
    let orig = read_json(&fixture("published_mcar.json"));
    for key in ["A_blocks", "B_blocks"] {
        let (a, b) = (&orig[key], &back[key]);
        for (x, y) in a.as_array().unwrap().iter().zip(b.as_array().unwrap()) {
            for (rx, ry) in x.as_array().unwrap().iter().zip(y.as_array().unwrap()) {
                for (u, v) in rx.as_array().unwrap().iter().zip(ry.as_array().unwrap()) {
                    assert!((u.as_f64().unwrap() - v.as_f64().unwrap()).abs() <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn inverse_of_moving_average_model_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let model = r#"{"orders": {"p": 2, "q": 1, "d": 1, "m": 1},
        "A_blocks": [[[1.0]], [[0.5]]], "B_blocks": [[[1.0]], [[0.2]]]}"#;
    write(dir.path(), "m.json", model);
    let o = mcarma(&["transform", "m.json", "--direction", "forward", "--out", "r.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = mcarma(&["transform", "r.json", "--direction", "inverse"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unsupported"), "{}", stderr(&o));
}

#[test]
fn paper_mode_rejects_other_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let rep = r#"{"orders": {"p": 1, "q": 0, "d": 1, "m": 1}, "step": 1.0,
        "phi_blocks": [[[0.5]]], "noise_loadings": {"0": [[1.0]]}}"#;
    write(dir.path(), "r.json", rep);
    let o = mcarma(&["transform", "r.json", "--direction", "inverse", "--paper-mode"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_shipped_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcarma(
        &[
            "fit",
            fixture("synthetic_daily.csv").to_str().unwrap(),
            "--config",
            fixture("fit_config.json").to_str().unwrap(),
            "--out",
            "model.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("eigenvalues of A") && text.contains("eigenvalues of F") && text.contains("C_delta"));
    let v = read_json(&dir.path().join("model.json"));
    assert_eq!(v["model"]["orders"]["p"], 2);
    assert!(v["diagnostics"]["beta_solution"].is_object());
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.csv", "date,dim1,dim2\n2000-01-01,1.0,2.0\n2000-01-02,oops,2.0\n");
    let o = mcarma(&["fit", "bad.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn zero_order_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcarma(&["fit", fixture("synthetic_daily.csv").to_str().unwrap(), "--set", "p=0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p must be at least 1"), "{}", stderr(&o));
}

#[test]
fn nested_override_without_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture("synthetic_daily.csv");
    let o = mcarma(&["fit", csv.to_str().unwrap(), "--set", "segments.0.1.n=4", "--out", "m.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&dir.path().join("m.json"));
    assert_eq!(v["manifest"]["command"], "fit");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcarma(&["fit", fixture("synthetic_daily.csv").to_str().unwrap(), "--set", "lags=2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_validates_paths() {
    let dir = tempfile::tempdir().unwrap();
    let model = fixture("driven_model.json");
    let args = |out: &'static str| -> Vec<String> {
        ["simulate", model.to_str().unwrap(), "--h", "0.5", "--T", "20", "--paths", "3", "--seed", "42", "--out", out]
            .iter()
            .map(|s| s.to_string())
            .collect()
    };
    let a: Vec<String> = args("a.csv");
    let b: Vec<String> = args("b.csv");
    let oa = mcarma(&a.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
    let ob = mcarma(&b.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
    assert!(oa.status.success(), "{}", stderr(&oa));
    assert_eq!(std::fs::read(dir.path().join("a.csv")).unwrap(), std::fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(oa.stdout, ob.stdout);
    let csv = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# manifest "));
    assert_eq!(lines.next().unwrap(), "t,path_id,dim,value");
    assert_eq!(lines.count(), 3 * 41 * 2);

    let o = mcarma(&["simulate", model.to_str().unwrap(), "--paths", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_blow_up_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let model = r#"{"orders": {"p": 1, "q": 0, "d": 1, "m": 1},
        "A_blocks": [[[-800.0]]], "B_blocks": [[[1.0]]],
        "drivers": [{"a": 1.0, "b": 0.0, "delta": 1.0, "mu": 0.0}]}"#;
    write(dir.path(), "m.json", model);
    let o = mcarma(&["simulate", "m.json", "--T", "200", "--h", "1", "--out", "p.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("step"), "{}", stderr(&o));
}

#[test]
fn convergence_path_budget_and_reference_row() {
    let dir = tempfile::tempdir().unwrap();
    let spec = fixture("convergence_toy.json");
    let o = mcarma(&["convergence", spec.to_str().unwrap(), "--paths", "50"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 100 paths"), "{}", stderr(&o));

    let o = mcarma(
        &[
            "convergence",
            spec.to_str().unwrap(),
            "--paths",
            "100",
            "--set",
            "epsilon_list=[0.001]",
            "--out",
            "e.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].split(',').nth(2), Some("0"));
}

#[test]
fn diffusion_only_convergence_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcarma(
        &["convergence", "--config", fixture("convergence_diffusion.json").to_str().unwrap(), "--out", "e.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let slope: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("slope in h: "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((slope - 0.5).abs() <= 0.15, "{text}");
}

#[test]
fn check_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcarma(&["check", fixture("published_mcar.json").to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("not stationary") && text.contains("0.006694"), "{text}");

    let o = mcarma(&["check", fixture("published_var.json").to_str().unwrap()], dir.path());
    let text = stdout(&o);
    assert!(text.contains("stationary (all moduli < 1)") && text.contains("max modulus: 0.95"), "{text}");

    write(
        dir.path(),
        "neg.json",
        r#"{"orders": {"p": 1, "q": 0, "d": 2, "m": 2},
            "A_blocks": [[[1.0, 0.0], [0.0, 1.0]]], "B_blocks": [[[1.0, 0.0], [0.0, 1.0]]]}"#,
    );
    let o = mcarma(&["check", "neg.json"], dir.path());
    assert!(stdout(&o).contains("stationary (all real parts < 0)"), "{}", stdout(&o));

    let o = mcarma(&["check", fixture("published_mcar.json").to_str().unwrap(), "--perturb", "-0.03"], dir.path());
    assert!(stdout(&o).contains("stationary (all real parts < 0)"), "{}", stdout(&o));

    write(dir.path(), "junk.json", "{\"x\": 1}");
    let o = mcarma(&["check", "junk.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = mcarma(&["check", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
