use std::path::Path;
use std::process::{Command, Output};

fn mcam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_csv(path: &Path, body: &str) {
    std::fs::write(path, body).unwrap();
}

#[test]
fn sweep_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("out/run.1");
    let o = mcam(&[
        "sweep",
        "--episodes",
        "3",
        "--schemes",
        "mtmc,sre",
        "--cls",
        "1..2",
        "--output",
        prefix.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/run.1.csv")).unwrap();
    assert!(csv.starts_with("scheme,cl,mode,iterations,strings,energy_proxy,accuracy_mean"));
    assert_eq!(csv.lines().count(), 5);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/run.1.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "episodes = 4\nn_way = 3\ncls = [2]\n[device]\nnoise_sigma = 0.0\n").unwrap();
    let prefix = dir.path().join("r");
    let p = prefix.to_str().unwrap();
    let o = mcam(&["--config", cfg.to_str().unwrap(), "sweep", "--episodes", "2", "--output", p]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["episodes"], 2);
    assert_eq!(json["config"]["n_way"], 3);
    assert_eq!(json["config"]["device"]["noise_sigma"], 0.0);
    assert_eq!(json["rows"][0]["cl"], 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "n_wayy = 3\n").unwrap();
    assert_eq!(mcam(&["--config", bad_cfg.to_str().unwrap(), "sweep"]).status.code(), Some(2));
    assert_eq!(mcam(&["sweep", "--episodes", "0"]).status.code(), Some(2));
    assert_eq!(mcam(&["sweep", "--n-way", "6000", "--cls", "32"]).status.code(), Some(3));

    let ragged = dir.path().join("ragged.csv");
    write_csv(&ragged, "label,a,b\n0,1,2\n1,3\n");
    let o = mcam(&["sweep", "--dataset", ragged.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 1"));

    let few = dir.path().join("few.csv");
    write_csv(&few, "label,a,b\n0,1,2\n1,3,1\n");
    assert_eq!(mcam(&["sweep", "--dataset", few.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn encode_dumps_code_words() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("v.csv");
    write_csv(&input, "label,a,b\n7,0,10\n8,10,0\n");
    let o = mcam(&["encode", "--input", input.to_str().unwrap(), "--scheme", "mtmc", "--cl", "2", "--clip-sigma", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // std = 5, so the clip range is [0, 5]: 0 -> level 0, 10 -> level 6
    assert_eq!(stdout(&o), "# scheme=mtmc cl=2 levels=7 dim=2\n7\t00 33\n8\t33 00\n");
}

#[test]
fn analyze_mismatch_csv() {
    let o = mcam(&["analyze-mismatch", "--scheme", "b4e", "--cl", "3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("scheme,cl,distance,class,fraction\n"));
    assert_eq!(out.lines().count(), 1 + 64 * 4);
    assert_eq!(mcam(&["analyze-mismatch", "--scheme", "b4we", "--cl", "4"]).status.code(), Some(2));
}

#[test]
fn simulate_prints_trace() {
    let o = mcam(&["simulate", "--n-way", "3", "--query-per-class", "2", "--cl", "4", "-v"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("iterations=2"));
    assert_eq!(out.lines().filter(|l| l.starts_with("query ")).count(), 6);
    assert!(out.contains("voters per iteration"));
}

#[test]
fn gradcheck_passes() {
    let o = mcam(&["gradcheck"]);
    assert!(o.status.success());
    assert!(stdout(&o).trim_end().ends_with("PASS"));
}
