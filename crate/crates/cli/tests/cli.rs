use std::process::{Command, Output};

fn maisense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maisense")).args(args).env_remove("MAISENSE_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn csv_has_header_and_lf_lines() {
    let o = maisense(&["cv-gain", "--sigma-steps", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sigma,gain_db_linear,xi2_inv_linear,gain_db_nonlocal_mai,xi2_inv_nonlocal_mai,gain_db_local_mai,xi2_inv_local_mai");
    assert_eq!(lines.len(), 4);
    let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[2] - 1.0_f64.exp()).abs() < 1e-9);
}

#[test]
fn json_carries_config_and_rows() {
    let o = maisense(&["spin-gain", "--N", "20", "--M", "2,4", "--mu-steps", "3", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["command"], "spin-gain");
    assert_eq!(v["config"]["N"], 20);
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["columns"].as_array().unwrap().len(), 1 + 2 * 3 * 3);
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let args = ["spin-gain", "--N", "12", "--mu-steps", "4", "--strategy", "linear"];
    let to_file = maisense(&[&args[..], &["--out", path.to_str().unwrap()]].concat());
    assert!(to_file.status.success());
    assert!(to_file.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout(&maisense(&args)));
}

#[test]
fn config_file_and_environment_are_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"command": "ignored", "N": 12, "mu_steps": 2, "strategy": "linear"}"#).unwrap();
    let o = maisense(&["spin-gain", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success(), "unknown key must be rejected");
    std::fs::write(&path, r#"{"N": 12, "mu_steps": 2, "strategy": "linear"}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_maisense"))
        .args(["spin-gain", "--config", path.to_str().unwrap()])
        .env("MAISENSE_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn exit_codes() {
    assert_eq!(maisense(&["spin-gain", "--N", "101", "--M", "2"]).status.code(), Some(2));
    assert_eq!(maisense(&["spin-gain", "--prep", "ms", "--strategy", "nonlocal-mai"]).status.code(), Some(2));
    assert_eq!(maisense(&["cv-gain", "--r", "-1"]).status.code(), Some(2));
    assert_eq!(maisense(&["spin-gain", "--mai-range", "2,1"]).status.code(), Some(2));
    assert_eq!(maisense(&["spin-gain", "--bogus"]).status.code(), Some(2));
    let o = maisense(&["validate", "--n-list", "4,6", "--mu-steps", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("oracle_block_equivalence"));
}
