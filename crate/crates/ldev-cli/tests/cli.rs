//! End-to-end checks of the binary: exit codes, output layout, and
//! byte-level determinism of the CSV contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ldev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldev"))
        .args(args)
        .env_remove("LDEV_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn list_experiments_names_the_registry() {
    let out = ldev(&["list-experiments"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["rate", "free-energy", "sandwich", "net-audit", "triangles", "ap3", "ergm"] {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
}

#[test]
fn fixed_config_and_seed_reproduce_the_csv_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for dir in [&out_a, &out_b] {
        let out = ldev(&["run", "--experiment", "net-audit", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(out_a.join("net-audit.csv")).unwrap();
    let b = fs::read(out_b.join("net-audit.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn seed_override_changes_random_instances() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let run = |dir: &Path, seed: &str| {
        let out = ldev(&[
            "run",
            "--experiment",
            "net-audit",
            "--seed",
            seed,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    };
    run(&out_a, "7");
    run(&out_b, "8");
    let a = fs::read(out_a.join("net-audit.csv")).unwrap();
    let b = fs::read(out_b.join("net-audit.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn unknown_config_keys_are_rejected_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        "schema = 1\nexperiment = \"rate\"\n[grid]\nu = [1.5]\nmystery = 3\n",
    );
    let out = ldev(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("mystery"), "{err}");
}

#[test]
fn boundary_density_is_rejected_with_a_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "p1.toml",
        "schema = 1\nexperiment = \"rate\"\n[grid]\np = [1.0]\nu = [1.5]\n",
    );
    let out = ldev(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("p[0]"), "{err}");
}

#[test]
fn validate_subcommand_reports_ok() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "good.toml",
        "schema = 1\nexperiment = \"free-energy\"\n\
         [functional]\nkind = \"curie_weiss\"\nn = 10\ncoupling = 1.0\nn_vertices = 0\n\
         [grid]\nbeta = [0.5, 1.0]\n",
    );
    let out = ldev(&["validate", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("ok"));
}

#[test]
fn overlay_flag_is_rejected_outside_the_triangles_experiment() {
    let out = ldev(&["run", "--experiment", "rate", "--lz-overlay", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_without_experiment_or_config_exits_2() {
    let out = ldev(&["run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_flag_must_agree_with_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sw.toml",
        "schema = 1\nexperiment = \"sandwich\"\n[grid]\nu = [1.5]\n",
    );
    let out = ldev(&["run", "--experiment", "rate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exhausted_state_budget_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "big.toml",
        "schema = 1\nexperiment = \"sandwich\"\n\
         [functional]\nkind = \"triangle\"\nn_vertices = 7\nn = 0\ncoupling = 0.0\n\
         [grid]\nu = [1.5]\n[run]\nseed = 7\nbudget_states = 16\nlz_overlay = false\n",
    );
    let out = ldev(&["run", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn free_energy_outputs_contain_contract_columns_and_complete_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ldev(&["run", "--experiment", "free-energy", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("free-energy.csv")).unwrap();
    assert!(csv.starts_with("experiment,n,p,t,phi_hat,lower,upper,exact_or_mc,stderr,seed\n"));
    assert_eq!(csv.lines().count(), 4, "header plus one row per beta:\n{csv}");
    let audit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("free-energy_audit.json")).unwrap())
            .unwrap();
    assert_eq!(audit["complete"], serde_json::json!(true));
    assert_eq!(audit["config"]["experiment"], serde_json::json!("free-energy"));
    let entries = audit["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    for e in entries {
        assert_eq!(e["lower_holds"], serde_json::json!(true));
        assert_eq!(e["upper_holds"], serde_json::json!(true));
        // every budget sub-term is itemized
        for key in ["gradient_eps", "plateau", "net_log", "quadratic", "cross", "diagonal", "log_two", "upper_total", "lower_slack"] {
            assert!(e["budget"][key].is_number(), "missing budget term {key}");
        }
    }
}

#[test]
fn ldev_out_env_var_sets_the_default_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ldev"))
        .args(["run", "--experiment", "net-audit"])
        .env("LDEV_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("net-audit.csv").exists());
}

#[test]
fn interrupted_runs_are_marked_partial() {
    // drive the writer directly: the marking contract is what matters
    let tmp = tempfile::tempdir().unwrap();
    let mut state = ldev_cli::output::RunState::new(false);
    state.rows.push(ldev_cli::output::Row::new("rate", 3, 7));
    let echo = serde_json::json!({"experiment": "rate"});
    let files = ldev_cli::output::write_outputs(tmp.path(), "rate", &state, &echo, true).unwrap();
    assert!(files.csv.ends_with("rate.csv.partial"));
    assert!(files.audit.ends_with("rate_audit.json.partial"));
    let audit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&files.audit).unwrap()).unwrap();
    assert_eq!(audit["complete"], serde_json::json!(false));
}
