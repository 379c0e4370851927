//! End-to-end tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn lbf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbf"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn lbf_ok(dir: &Path, args: &[&str]) -> String {
    let out = lbf(dir, args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

/// Two clean, well-separated planes with ground truth, written via `generate`.
fn write_two_planes(dir: &Path) {
    lbf_ok(
        dir,
        &[
            "generate",
            "--dims",
            "2,2",
            "--ambient",
            "4",
            "--samples",
            "80",
            "--sigma",
            "0",
            "--outliers",
            "0",
            "--seed",
            "11",
            "--out",
            "planes",
        ],
    );
}

#[test]
fn cluster_reports_zero_error_on_clean_planes() {
    let dir = tempfile::tempdir().unwrap();
    write_two_planes(dir.path());
    let stdout = lbf_ok(
        dir.path(),
        &[
            "cluster",
            "planes.csv",
            "--dim",
            "2",
            "--k",
            "2",
            "--seed",
            "1",
            "--labels",
            "planes.labels",
        ],
    );
    assert!(stdout.contains("error 0.00%"), "stdout was:\n{stdout}");
    assert!(dir.path().join("planes.csv.labels").exists());
    assert!(dir.path().join("planes.csv.run.json").exists());
}

#[test]
fn record_echoes_resolved_defaults() {
    let dir = tempfile::tempdir().unwrap();
    write_two_planes(dir.path());
    lbf_ok(
        dir.path(),
        &[
            "cluster",
            "planes.csv",
            "--dim",
            "2",
            "--k",
            "2",
            "--seed",
            "1",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("planes.csv.run.json")).unwrap();
    let record: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(record["config"]["candidates"], 140);
    assert_eq!(record["config"]["passes"], 6);
    assert_eq!(record["config"]["scale"]["step"], 2);
    assert_eq!(record["seed"], 1);
    assert!(record["runtime"]["elapsed_secs"].is_number());
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_two_planes(dir.path());
    let args = [
        "cluster",
        "planes.csv",
        "--dim",
        "2",
        "--k",
        "2",
        "--seed",
        "9",
        "--out",
        "r.labels",
        "--record",
        "r.json",
        "--omit-runtime",
    ];
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    lbf_ok(dir.path(), &args);
    let (labels_first, record_first) = (read("r.labels"), read("r.json"));
    lbf_ok(dir.path(), &args);
    assert_eq!(read("r.labels"), labels_first);
    assert_eq!(read("r.json"), record_first);
}

#[test]
fn bench_rejects_unknown_setting_with_the_valid_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = lbf(
        dir.path(),
        &[
            "bench",
            "--suite",
            "affine",
            "--setting",
            "3^3inR7",
            "--trials",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for name in ["2^2inR4", "4^2inR6", "2^4inR4", "10^2inR15", "4-5-6inR10"] {
        assert!(stderr.contains(name), "stderr was:\n{stderr}");
    }
}

#[test]
fn bench_table_is_stable_under_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "bench",
        "--suite",
        "affine",
        "--setting",
        "2^2inR4",
        "--trials",
        "1",
        "--samples",
        "60",
        "--seed",
        "4",
        "--omit-runtime",
    ];
    let first = lbf_ok(dir.path(), &args);
    let second = lbf_ok(dir.path(), &args);
    assert_eq!(first, second);
    assert!(first.starts_with("setting,suite,outlier_percent,trials,"));
}

#[test]
fn bench_rejects_unsupported_outlier_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = lbf(
        dir.path(),
        &[
            "bench",
            "--suite",
            "linear",
            "--setting",
            "2^2inR4",
            "--outliers",
            "17",
            "--trials",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn modelsel_recovers_the_plane_count() {
    let dir = tempfile::tempdir().unwrap();
    write_two_planes(dir.path());
    let stdout = lbf_ok(
        dir.path(),
        &[
            "modelsel",
            "planes.csv",
            "--dim",
            "2",
            "--kmax",
            "4",
            "--seed",
            "2",
            "--json",
            "curve.json",
        ],
    );
    assert!(stdout.contains("k_opt = 2"), "stdout was:\n{stdout}");
    // one header, kmax curve rows, one k_opt line
    assert_eq!(stdout.lines().count(), 1 + 4 + 1);
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("curve.json")).unwrap())
            .unwrap();
    assert_eq!(record["results"]["k_opt"], 2);
    assert_eq!(record["results"]["w"].as_array().unwrap().len(), 4);
}

#[test]
fn generate_writes_the_advertised_shapes_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "generate",
        "--dims",
        "2,2",
        "--ambient",
        "4",
        "--samples",
        "100",
        "--sigma",
        "0.05",
        "--outliers",
        "0.05",
        "--seed",
        "3",
        "--out",
        "set",
    ];
    lbf_ok(dir.path(), &args);
    let csv1 = std::fs::read(dir.path().join("set.csv")).unwrap();
    let labels1 = std::fs::read(dir.path().join("set.labels")).unwrap();

    // 200 inliers plus round(0.05 * 200) = 10 outliers
    let text = String::from_utf8(csv1.clone()).unwrap();
    assert_eq!(text.lines().count(), 210);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 4);
    let labels_text = std::fs::read_to_string(dir.path().join("set.labels")).unwrap();
    let outliers = labels_text.lines().filter(|l| *l == "-1").count();
    assert_eq!(outliers, 10);

    lbf_ok(dir.path(), &args);
    assert_eq!(std::fs::read(dir.path().join("set.csv")).unwrap(), csv1);
    assert_eq!(
        std::fs::read(dir.path().join("set.labels")).unwrap(),
        labels1
    );
}

#[test]
fn scalemap_emits_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    write_two_planes(dir.path());
    lbf_ok(
        dir.path(),
        &["scalemap", "planes.csv", "--dim", "2", "--out", "sizes.csv"],
    );
    let text = std::fs::read_to_string(dir.path().join("sizes.csv")).unwrap();
    assert_eq!(text.lines().count(), 160);
    for line in text.lines() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5); // 4 coordinates + selected size
        let size: usize = fields[4].parse().unwrap();
        assert!(size >= 2);
    }
}

#[test]
fn malformed_input_exits_one_and_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "1.0,2.0,3.0,4.0\n5.0,6.0\n").unwrap();
    let out = lbf(
        dir.path(),
        &["cluster", "bad.csv", "--dim", "2", "--k", "2"],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(":2"), "stderr was:\n{stderr}");
}

#[test]
fn thread_cap_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    write_two_planes(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_lbf"))
        .args([
            "cluster",
            "planes.csv",
            "--dim",
            "2",
            "--k",
            "2",
            "--seed",
            "1",
        ])
        .env("LBF_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .expect("binary runs");
    assert!(out.status.success());
}
