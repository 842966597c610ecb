//! End-to-end tests of the `bitflip` binary: exit codes, error naming,
//! output schemas and byte-level determinism.

use std::fs;
use std::process::{Command, Output};

fn bitflip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bitflip"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn classify_happy_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"command":"classify","dist":{"family":"geometric","p":0.6},"seed":1}"#,
    );
    let out = bitflip(&["classify", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["bf"], "Transient");
    assert_eq!(doc["result"]["db"], "Recurrent");
}

#[test]
fn missing_seed_exits_2_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"command":"classify","dist":{"family":"kappa"}}"#,
    );
    let out = bitflip(&["classify", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("seed"), "{stderr}");
}

#[test]
fn invalid_ratio_exits_2_and_names_dist_p() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"command":"classify","dist":{"family":"geometric","p":1.5},"seed":1}"#,
    );
    let out = bitflip(&["classify", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("dist.p"), "{stderr}");
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = bitflip(&["frobnicate", "whatever.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn subcommand_config_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"command":"classify","dist":{"family":"kappa"},"seed":1}"#,
    );
    let out = bitflip(&["moments", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("command"), "{stderr}");
}

#[test]
fn unreadable_config_exits_1() {
    let out = bitflip(&["classify", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"command":"classify","dist":{"family":"kappa"},"seed":1}"#,
    );
    let out = bitflip(&["classify", &cfg, "--output", "/nonexistent/dir/out.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    let out = bitflip(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("couple-audit"));
}

#[test]
fn simulate_is_byte_identical_and_headered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"command":"simulate","model":"bf","dist":{"family":"geometric","p":0.3},
            "seed":42,"replicas":500,"horizon":10000}"#,
    );
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let run_a = bitflip(&["simulate", &cfg, "--output", out_a.to_str().unwrap()]);
    let run_b = bitflip(&["simulate", &cfg, "--output", out_b.to_str().unwrap()]);
    assert_eq!(run_a.status.code(), Some(0));
    assert_eq!(run_b.status.code(), Some(0));
    let a = fs::read(&out_a).unwrap();
    let b = fs::read(&out_b).unwrap();
    assert_eq!(a, b, "same config + seed must give identical bytes");

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# bitflip v"));
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert_eq!(lines.next().unwrap(), "replica_id,tau,censored,m0,peak_m");
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 501);
}

#[test]
fn snapshot_and_output_field_in_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("snap.csv");
    let cfg = write_config(
        &dir,
        "c.json",
        &format!(
            r#"{{"command":"snapshot","model":"db","dist":{{"family":"geometric","p":0.5}},
                "seed":7,"replicas":100,"t":20.0,"method":"per_bit","output":"{}"}}"#,
            out_path.to_str().unwrap()
        ),
    );
    let out = bitflip(&["snapshot", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("replica_id,n_active,n_damaged"));
}

#[test]
fn analyze_reports_divergence_and_convention() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"command":"analyze","model":"bf","dist":{"family":"geometric","p":0.3},
            "seed":1,"t":100.0,"t_max":1000000.0,"tolerance":0.0001}"#,
    );
    let out = bitflip(&["analyze", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["ground_occupancy"]["diverged"], true);
    assert!(doc["result"]["expected_active"]["value"].as_f64().unwrap() > 0.0);
    assert!(doc["result"]["conventions"]["bf_active_probability"]
        .as_str()
        .unwrap()
        .contains("exp(-2"));
    // Resolved config is echoed.
    assert_eq!(doc["config"]["tolerance"], 0.0001);
}

#[test]
fn couple_audit_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"command":"couple-audit","dist":{"family":"geometric","p":0.4},
            "seed":5,"replicas":50,"horizon":400}"#,
    );
    let out = bitflip(&["couple-audit", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["domination"]["violations"], 0);
    assert_eq!(doc["result"]["tau_order"]["order_violations"], 0);
}

#[test]
fn clt_command_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"command":"clt","model":"bf","dist":{"family":"geometric","p":0.4},
            "seed":11,"replicas":2000,"t":1000.0}"#,
    );
    let out = bitflip(&["clt", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["result"]["ks_statistic"].as_f64().unwrap() < 0.2);
}

#[test]
fn simulate_with_m_grid_batches_and_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"command":"simulate","model":"bf","dist":{"family":"geometric","p":0.3},
            "seed":9,"replicas":100,"horizon":100000,"m_grid":[0,3],"r_grid":[0.2]}"#,
    );
    let out = bitflip(&["simulate", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# summary m=0:"), "{text}");
    assert!(text.contains("# summary m=3:"), "{text}");
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(rows.len(), 200);
    // First batch starts from the ground state, second from bit 3 active.
    assert!(rows[..100].iter().all(|r| r.split(',').nth(3) == Some("0")));
    assert!(rows[100..].iter().all(|r| r.split(',').nth(3) == Some("3")));
    // peak_m of the second batch is at least the initial top bit.
    assert!(rows[100..]
        .iter()
        .all(|r| r.split(',').nth(4).unwrap().parse::<u32>().unwrap() >= 3));
}
