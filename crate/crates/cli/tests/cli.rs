use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eon-power"))
}

#[test]
fn allocate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["allocate", "--algo", "chso", "--seeds", "1..2", "--override", "algo.iterations=20", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "allocate/chso/seed_1_trace.csv",
        "allocate/chso/seed_2_summary.json",
        "allocate/chso_nmse.csv",
        "allocate/summary.json",
        "allocate/reference.csv",
        "manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("allocate/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["summaries"][0]["runs"], 2);
}

#[test]
fn ageing_csv_has_fig_axes() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["ageing", "--algo", "hso", "--seeds", "1", "--override", "algo.iterations=10", "--out"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("ageing/hso.csv")).unwrap();
    assert!(text.starts_with("tau,mean_pp_db,std_pp_db"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn complexity_subset() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["complexity", "--scenarios", "A,B", "--out"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("complexity/flops.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.contains("B,120,gd"));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["allocate", "--seeds", ""],
        vec!["fig9"],
        vec!["allocate", "--algo", "pso"],
        vec!["allocate", "--override", "physical.lambda1=-1"],
        vec!["allocate", "--override", "noequals"],
        vec!["allocate", "--config", "/nonexistent/net.cfg"],
        vec!["allocate", "--tau", "12"],
        vec!["complexity", "--scenarios", "D"],
    ];
    for args in cases {
        let out = bin().args(&args).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unwritable_output_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let out = bin().args(["complexity", "--out"]).arg(&file).output().unwrap();
    assert!(!out.status.success());
}
