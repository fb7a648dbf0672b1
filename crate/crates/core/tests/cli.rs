use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hardlogit"))
}

#[test]
fn zero_dimension_is_a_usage_error() {
    let out = bin().args(["generate", "--k", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid dimension"));
}

#[test]
fn unknown_method_is_a_usage_error() {
    let out = bin().args(["race", "--method", "newton"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_writes_dataset_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.libsvm");
    let out = bin()
        .args(["generate", "--k", "5", "--format", "libsvm", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(path.exists());
    assert!(dir.path().join("w.json").exists());
}

#[test]
fn race_reports_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let d = dir.path().join(sub);
        let out = bin()
            .args([
                "race",
                "--method",
                "agd",
                "--t",
                "3,6",
                "--no-timestamp",
                "--strict",
                "--out-dir",
            ])
            .arg(&d)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(d.join("trace_agd_T6.csv").exists());
        std::fs::read(d.join("race_agd.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn resist_exports_rotated_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "resist",
            "--method",
            "gd",
            "--t",
            "3",
            "--strict",
            "--out-dir",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let data = std::fs::read_to_string(dir.path().join("resist_gd_T3.csv")).unwrap();
    assert_eq!(data.lines().count(), 1 + 16 * 3 + 8);
    let u = std::fs::read_to_string(dir.path().join("resist_gd_T3_rotation.csv")).unwrap();
    assert_eq!(u.lines().count(), 4 * 3 + 2);
}

#[test]
fn verify_reports_the_ratio_constant() {
    let out = bin()
        .args(["verify", "--max-k", "6", "--no-timestamp"])
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = report["checks"].as_array().unwrap();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c["passed"].as_bool().unwrap())
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["ratio_constant_exceeds_half"]);
    assert_eq!(out.status.code(), Some(1));
}
