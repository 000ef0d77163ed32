use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lgcert(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgcert"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("LGCERT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV artifact as (header, rows), skipping the provenance line.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn solve_pure_grid_matches_reference_signatures() {
    let dir = tempfile::tempdir().unwrap();
    let out = lgcert(dir.path(), &["solve", "--grid", "1.05:1.50:0.05", "--state", "pure"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("solve.csv"));
    assert_eq!(rows.len(), 10);
    let (t, lgi, d) = (column(&header, "target"), column(&header, "achieved_lgi"), column(&header, "table_signature_distance"));
    for row in &rows {
        let target: f64 = row[t].parse().unwrap();
        assert!((row[lgi].parse::<f64>().unwrap() - target).abs() <= 1e-8);
        // Reference angles carry three decimals; see the core table tests.
        assert!(row[d].parse::<f64>().unwrap() < 1e-3, "row {target}: {}", row[d]);
    }
}

#[test]
fn solve_mixed_grid_matches_all_reproducible_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = lgcert(dir.path(), &["solve", "--grid", "1.05:1.50:0.05", "--state", "mixed"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = read_csv(&dir.path().join("solve.csv"));
    let (t, d) = (column(&header, "target"), column(&header, "table_signature_distance"));
    let matched: Vec<f64> = rows
        .iter()
        .filter(|r| r[d].parse::<f64>().unwrap() < 1e-3)
        .map(|r| r[t].parse().unwrap())
        .collect();
    // The 1.50 reference row evaluates to LGI ≈ 0.083 and has no matching root.
    assert_eq!(matched, vec![1.05, 1.1, 1.15, 1.2, 1.25, 1.3, 1.35, 1.4, 1.45]);
}

#[test]
fn solve_at_classical_bound_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lgcert(dir.path(), &["solve", "--target", "1.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn solve_families_lists_distinct_roots() {
    let dir = tempfile::tempdir().unwrap();
    let out = lgcert(dir.path(), &["solve", "--target", "1.3", "--families", "--starts", "16"]);
    assert_eq!(out.status.code(), Some(0));
    let (_, rows) = read_csv(&dir.path().join("families.csv"));
    assert!(!rows.is_empty());
    assert!(read_json(&dir.path().join("solve.json"))["families"][0]["families"].is_array());
}

#[test]
fn certified_bits_have_expected_length_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let n = 20_000;
    let out = lgcert(dir.path(), &["bits", "--shots", &n.to_string(), "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let cert = read_json(&dir.path().join("certificate.json"));
    assert_eq!(cert["certificate"]["certified"], Value::Bool(true));
    let bits = fs::read(dir.path().join("bits.bin")).unwrap();
    assert_eq!(bits.len(), (6 * n - 3usize).div_ceil(8));
    let side = read_json(&dir.path().join("bits.bin.json"));
    assert_eq!(side["n_bits"], 6 * n - 3);
    assert_eq!(side["discarded"], 3);

    let manifest = read_json(&dir.path().join("manifest.json"));
    let hash = manifest["config_sha256"].as_str().unwrap();
    assert_eq!(cert["config_sha256"], hash);
    assert_eq!(side["config_sha256"], hash);
    assert_eq!(cert["seeds"]["seed"], 3);
    let listed: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert_eq!(listed, ["certificate.json", "bits.bin", "bits.bin.json"]);
}

#[test]
fn per_shot_policy_keeps_one_bit_per_shot() {
    let dir = tempfile::tempdir().unwrap();
    let out = lgcert(dir.path(), &["bits", "--shots", "10000", "--policy", "first-of-each-shot"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_json(&dir.path().join("bits.bin.json"))["n_bits"], 30_000);
}

#[test]
fn uncertified_run_writes_no_bits_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let out = lgcert(dir.path(), &["bits", "--theta1", "0", "--theta2", "0", "--shots", "2000"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(read_json(&dir.path().join("certificate.json"))["certificate"]["certified"], Value::Bool(false));
    assert!(!dir.path().join("bits.bin").exists());

    let forced = tempfile::tempdir().unwrap();
    let out = lgcert(forced.path(), &["bits", "--theta1", "0", "--theta2", "0", "--shots", "2000", "--force"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(forced.path().join("bits.bin").exists());
}

#[test]
fn tampered_marginal_fails_certification() {
    let dir = tempfile::tempdir().unwrap();
    let clean = lgcert(dir.path(), &["certify", "--row", "1.4", "--seed", "3"]);
    assert_eq!(clean.status.code(), Some(0));
    let out = lgcert(dir.path(), &["certify", "--row", "1.4", "--seed", "3", "--tamper-marginal", "0.05"]);
    assert_eq!(out.status.code(), Some(4));
    let cert = read_json(&dir.path().join("certificate.json"))["certificate"].clone();
    assert_eq!(cert["nsit_pass"], Value::Bool(false));
    assert_eq!(cert["certified"], Value::Bool(false));
}

#[test]
fn stats_on_constructed_streams() {
    let dir = tempfile::tempdir().unwrap();
    let zeros = dir.path().join("zeros.bin");
    fs::write(&zeros, vec![0u8; 12_500]).unwrap();
    let alt = dir.path().join("alt.bin");
    fs::write(&alt, vec![0b0101_0101u8; 12_500]).unwrap();

    let out = lgcert(dir.path(), &["stats", "--input", zeros.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = &read_json(&dir.path().join("stats.json"))["report"];
    assert_eq!((r["monobit"]["pass"].as_bool(), r["runs"]["pass"].as_bool()), (Some(false), Some(false)));

    let out = lgcert(dir.path(), &["stats", "--input", alt.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = &read_json(&dir.path().join("stats.json"))["report"];
    assert_eq!(r["n_bits"], 100_000);
    assert_eq!((r["monobit"]["pass"].as_bool(), r["runs"]["pass"].as_bool()), (Some(true), Some(false)));
}

#[test]
fn stats_reads_bit_count_from_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lgcert(dir.path(), &["bits", "--shots", "20001", "--seed", "3"]).status.code(), Some(0));
    let stats = tempfile::tempdir().unwrap();
    let input = dir.path().join("bits.bin");
    let out = lgcert(stats.path(), &["stats", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_json(&stats.path().join("stats.json"))["report"]["n_bits"], 6 * 20001 - 3);
}

#[test]
fn manifest_replay_is_byte_identical_across_thread_counts() {
    let first = tempfile::tempdir().unwrap();
    let args = ["--threads", "1", "run", "--shots", "3000", "--reps", "2", "--noise", "device-like", "--mitigate"];
    assert_eq!(lgcert(first.path(), &args).status.code(), Some(0));
    let second = tempfile::tempdir().unwrap();
    let manifest = first.path().join("manifest.json");
    let out = lgcert(second.path(), &["--threads", "4", "--config", manifest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["run_summary.csv", "run_reps.csv", "run.json", "manifest.json"] {
        assert_eq!(fs::read(first.path().join(name)).unwrap(), fs::read(second.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn run_csv_carries_hash_and_mitigated_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = lgcert(dir.path(), &["run", "--shots", "2000", "--reps", "2", "--noise", "device-like", "--mitigate"]);
    assert_eq!(out.status.code(), Some(0));
    let hash = read_json(&dir.path().join("manifest.json"))["config_sha256"].as_str().unwrap().to_string();
    let text = fs::read_to_string(dir.path().join("run_summary.csv")).unwrap();
    assert!(text.lines().next().unwrap().contains(&format!("config_sha256={hash}")));
    let (header, rows) = read_csv(&dir.path().join("run_summary.csv"));
    assert_eq!(rows.len(), 10);
    assert!(header.contains(&"mitigated_mean_lgi".to_string()));
    let (_, reps) = read_csv(&dir.path().join("run_reps.csv"));
    assert_eq!(reps.len(), 20);
}

#[test]
fn bell_output_is_always_uncertified() {
    let dir = tempfile::tempdir().unwrap();
    let out = lgcert(dir.path(), &["bell", "--rounds", "5000", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let summary = read_json(&dir.path().join("bell.json"));
    assert_eq!(summary["certified"], Value::Bool(false));
    let (header, rows) = read_csv(&dir.path().join("bell_rounds.csv"));
    assert_eq!(header, ["round", "x", "y", "a", "b"]);
    assert_eq!(rows.len(), 5000);
}

#[test]
fn sweeps_and_mitigation_demo_emit_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lgcert(dir.path(), &["noise-sweep", "--grid", "0:0.5:0.1"]).status.code(), Some(0));
    let (header, rows) = read_csv(&dir.path().join("noise_sweep.csv"));
    assert_eq!(header, ["p", "lgi_analytic"]);
    let lgi: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(lgi.len(), 6);
    assert!(lgi.windows(2).all(|w| w[1] <= w[0]));

    assert_eq!(lgcert(dir.path(), &["seed-sweep", "--lengths", "10,1000", "--reps", "5"]).status.code(), Some(0));
    assert_eq!(read_csv(&dir.path().join("seed_sweep.csv")).1.len(), 2);

    assert_eq!(lgcert(dir.path(), &["mitigate-demo", "--shots", "5000", "--reps", "3"]).status.code(), Some(0));
    let m = read_json(&dir.path().join("mitigation.json"));
    assert!(m["rmse_mitigated"].as_f64().unwrap() < m["rmse_raw"].as_f64().unwrap());
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = lgcert(dir.path(), &["run", "--noise", "/nonexistent/profile.json", "--reps", "1"]);
    assert_eq!(missing.status.code(), Some(5));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"command": "solve", "target": "high"}"#).unwrap();
    assert_eq!(lgcert(dir.path(), &["--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let custom = lgcert(dir.path(), &["bits", "--state", "bloch:0.1,0.2,0.3"]);
    assert_eq!(custom.status.code(), Some(2));
}

#[test]
fn config_file_uses_defaults_for_missing_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"command": "solve", "target": 1.2}"#).unwrap();
    let out = lgcert(dir.path(), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["config"]["starts"], 64);
    assert_eq!(manifest["config"]["state"]["kind"], "pure-protocol");
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lgcert"))
        .args(["solve", "--target", "1.1"])
        .env("LGCERT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("solve.csv").exists());
}
