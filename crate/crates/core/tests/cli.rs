//! End-to-end tests of the `ipdg1d` binary: output schemas, exit codes and
//! config handling.

use std::process::{Command, Output};

fn ipdg1d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipdg1d")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV with a `#` header line and a column line.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (header, rows) = table(text);
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn run_smooth_schema_and_rate() {
    let o = ipdg1d(&["run", "--problem", "smooth", "--k", "2", "--meshes", "8,16,32,64"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# k=2 sigma0=40 sigma1=1 xbar=0.6366 seed=7 version="));
    let (header, rows) = table(&text);
    assert_eq!(
        header,
        [
            "n_elements", "h_max", "dofs", "err_znorm", "err_enorm", "err_eenorm", "err_l2", "eoc_znorm", "eoc_l2",
            "solve_seconds"
        ]
    );
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][7], "nan");
    assert!(rows.iter().all(|r| r[9] == "nan"));
    let eoc = *column(&text, "eoc_znorm").last().unwrap();
    assert!((2.85..=3.15).contains(&eoc), "{eoc}");
}

#[test]
fn run_rough_rate() {
    let o = ipdg1d(&["run", "--problem", "delta-prime", "--k", "2", "--meshes", "16,32,64,128,256,512,1024", "--xbar", "0.6366"]);
    assert_eq!(o.status.code(), Some(0));
    let eoc = *column(&stdout(&o), "eoc_l2").last().unwrap();
    assert!((0.4..=0.7).contains(&eoc), "{eoc}");
}

#[test]
fn timings_flag_fills_solve_seconds() {
    let o = ipdg1d(&["run", "--meshes", "8,16", "--timings"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(column(&stdout(&o), "solve_seconds").iter().all(|t| t.is_finite() && *t >= 0.0));
}

#[test]
fn infsup_schema_and_exit_codes() {
    let o = ipdg1d(&["infsup", "--meshes", "8,16"]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = table(&stdout(&o));
    assert_eq!(
        header,
        ["n_elements", "h_max", "gamma_V", "gamma_W", "lambda_coercivity", "sigma_max_continuity"]
    );
    assert_eq!(rows.len(), 2);

    let o = ipdg1d(&["infsup", "--meshes", "8,16", "--sigma0", "0.01"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(column(&stdout(&o), "lambda_coercivity").iter().all(|l| *l <= 0.0));

    assert_eq!(ipdg1d(&["infsup", "--k", "1"]).status.code(), Some(2));
}

#[test]
fn check_passes_and_fails() {
    let o = ipdg1d(&["check", "--k", "2", "--meshes", "8,16,32"]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = table(&stdout(&o));
    assert_eq!(header, ["property", "status", "observed", "bound", "detail"]);
    assert!(rows.iter().all(|r| r[1] == "PASS"));

    let o = ipdg1d(&["check", "--k", "2", "--meshes", "8,16", "--sigma0", "0.01"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_arguments_exit_2() {
    for args in [
        &["run", "--k", "0", "--meshes", "8"][..],
        &["run", "--sigma0", "-1"],
        &["run", "--meshes", "16,8"],
        &["run", "--xbar", "1.5"],
        &["run", "--problem", "nope"],
    ] {
        let o = ipdg1d(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn skeleton_collision_exits_3() {
    let o = ipdg1d(&["run", "--problem", "delta-prime", "--xbar", "0.5", "--meshes", "8,16"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"k": 3, "sigma0": 90, "meshes": [4, 8]}"#).unwrap();
    let out = dir.path().join("out.json");
    let o = ipdg1d(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--meshes",
        "4,8,16",
        "--format",
        "json",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["k"], 3);
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);

    std::fs::write(&cfg, r#"{"kk": 3}"#).unwrap();
    assert_eq!(ipdg1d(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn dump_matrices_writes_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let o = ipdg1d(&["run", "--meshes", "4", "--dump-matrices", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.ends_with("a_primal.mtx")), "{names:?}");
    let any = dir.path().join(&names[0]);
    assert!(std::fs::read_to_string(any).unwrap().starts_with("%%MatrixMarket"));
}
