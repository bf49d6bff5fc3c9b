use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn case(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../cases")
        .join(name)
        .display()
        .to_string()
}

fn imts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imts"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// SMIB case with a tiny inertia so the undamped machine runs away within a second.
fn runaway_case(dir: &Path) -> PathBuf {
    let mut doc = json(Path::new(&case("smib.json")));
    doc["machines"][0]["H"] = serde_json::json!(0.001);
    let path = dir.join("runaway.json");
    fs::write(&path, doc.to_string()).unwrap();
    path
}

#[test]
fn simulate_writes_one_row_per_step() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run.csv");
    let res = imts(&["simulate", &case("wscc9.json"), "--t-clear", "0.1", "--t-end", "3.0", "--out", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3002);
    assert!(lines[0].starts_with("t_s,delta_0_deg,delta_1_deg,delta_2_deg,omega_0_rad_s"));
    assert!(lines[1].starts_with("0,"));
    assert!(dir.path().join("run.manifest.json").exists());
}

#[test]
fn assess_exit_code_follows_verdict() {
    let dir = TempDir::new().unwrap();
    let stable_dir = dir.path().join("stable");
    let res = imts(&[
        "assess", &case("wscc9.json"), "--t-clear", "0.1", "--t-end", "3.1", "--out-dir", path_str(&stable_dir),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for f in ["events.jsonl", "margins.csv", "verdict.json", "manifest.json"] {
        assert!(stable_dir.join(f).exists(), "{f}");
    }
    assert_eq!(json(&stable_dir.join("verdict.json"))["stable"], true);

    let unstable_dir = dir.path().join("unstable");
    let res = imts(&[
        "assess", &case("wscc9.json"), "--t-clear", "0.2", "--t-end", "3.2", "--out-dir", path_str(&unstable_dir),
    ]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    assert_eq!(json(&unstable_dir.join("verdict.json"))["stable"], false);
    let events = fs::read_to_string(unstable_dir.join("events.jsonl")).unwrap();
    assert!(events.lines().any(|l| l.contains("\"DLP\"")));
}

#[test]
fn runaway_machine_exits_with_divergence_code() {
    let dir = TempDir::new().unwrap();
    let case = runaway_case(dir.path());
    let out = dir.path().join("run.csv");
    let res = imts(&["simulate", path_str(&case), "--t-clear", "0.2", "--t-end", "1.0", "--out", path_str(&out)]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
    let rows = fs::read_to_string(&out).unwrap().lines().count();
    assert!(rows > 1 && rows < 1002);

    let res = imts(&[
        "assess", path_str(&case), "--t-clear", "0.2", "--t-end", "1.0", "--out-dir", path_str(&dir.path().join("a")),
    ]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
}

#[test]
fn missing_case_file_names_the_path() {
    let dir = TempDir::new().unwrap();
    let res = imts(&[
        "simulate", "no/such/case.json", "--t-clear", "0.1", "--t-end", "1", "--out", path_str(&dir.path().join("x.csv")),
    ]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("no/such/case.json"), "{}", stderr(&res));
}

#[test]
fn clearing_after_horizon_is_rejected() {
    let dir = TempDir::new().unwrap();
    let res = imts(&[
        "simulate", &case("wscc9.json"), "--t-clear", "1.0", "--t-end", "0.5", "--out", path_str(&dir.path().join("x.csv")),
    ]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).starts_with("error:"));
}

#[test]
fn horizon_without_events_is_an_error() {
    let dir = TempDir::new().unwrap();
    let res = imts(&[
        "assess", &case("wscc9.json"), "--t-clear", "0.1", "--t-end", "0.101", "--out-dir", path_str(dir.path()),
    ]);
    assert_eq!(code(&res), 1, "{}", stderr(&res));
}

#[test]
fn cct_reports_single_machine_value() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("cct.json");
    let res = imts(&["cct", &case("smib.json"), "--t-lo", "0.1", "--t-hi", "0.3", "--resolution", "0.001", "--out", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let doc = json(&out);
    let cct = doc["cct"].as_f64().unwrap();
    assert!((cct - 0.19535881038996908).abs() < 2e-3, "{cct}");
    assert!(doc["evaluations"].as_u64().unwrap() <= 10);
    let curve = fs::read_to_string(dir.path().join("cct.margin.txt")).unwrap();
    assert!(curve.lines().count() > 2);
}

#[test]
fn cct_rejects_bracket_with_wrong_verdicts() {
    let dir = TempDir::new().unwrap();
    let res = imts(&[
        "cct", &case("smib.json"), "--t-lo", "0.25", "--t-hi", "0.3", "--resolution", "0.001", "--out",
        path_str(&dir.path().join("c.json")),
    ]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("unstable"), "{}", stderr(&res));
}

#[test]
fn grid_surface_is_zero_at_the_equilibrium_node() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("grid.dat");
    let res = imts(&[
        "surface", &case("wscc9.json"), "--focus", "1", "--axes", "1,2", "--mode", "grid", "--grid-n", "21", "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 21 * 21);
    // odd grid: the middle node is the equilibrium
    let centre = &rows[10 * 21 + 10];
    assert!(centre[2].abs() < 1e-12, "{centre:?}");
}

#[test]
fn grid_surface_needs_three_machines() {
    let dir = TempDir::new().unwrap();
    let res = imts(&[
        "surface", &case("smib.json"), "--focus", "0", "--axes", "0,1", "--out", path_str(&dir.path().join("g.dat")),
    ]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("3 machines"), "{}", stderr(&res));
}

#[test]
fn trajectory_surface_writes_every_sample() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ribbons.dat");
    let res = imts(&[
        "surface", &case("wscc9.json"), "--focus", "1", "--axes", "1,2", "--mode", "trajectories", "--sweep",
        "0.05:0.07:0.01", "--horizon", "1.0", "--out", path_str(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let rows = fs::read_to_string(&out).unwrap().lines().filter(|l| !l.starts_with('#')).count();
    // t_end = t_clear + 1 s at 1 ms: 1051 + 1061 + 1071 samples
    assert_eq!(rows, 1051 + 1061 + 1071);

    let empty = imts(&[
        "surface", &case("wscc9.json"), "--focus", "1", "--axes", "1,2", "--mode", "trajectories", "--out",
        path_str(&dir.path().join("none.dat")),
    ]);
    assert_eq!(code(&empty), 1);
    assert!(stderr(&empty).contains("empty"), "{}", stderr(&empty));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let run = |sub: &str| {
        let d = dir.path().join(sub);
        let res = imts(&["assess", &case("wscc9.json"), "--t-clear", "0.153", "--t-end", "2.0", "--out-dir", path_str(&d)]);
        assert_eq!(code(&res), 2, "{}", stderr(&res));
        d
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["events.jsonl", "margins.csv", "verdict.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("settings.json");
    let from_file = dir.path().join("from_file.csv");
    fs::write(
        &config,
        serde_json::json!({ "t_clear": 0.1, "t_end": 0.5, "out": from_file }).to_string(),
    )
    .unwrap();

    let res = imts(&["--config", path_str(&config), "simulate", &case("wscc9.json")]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(fs::read_to_string(&from_file).unwrap().lines().count(), 502);

    let flagged = dir.path().join("flagged.csv");
    let res = imts(&[
        "--config", path_str(&config), "simulate", &case("wscc9.json"), "--t-end", "1.0", "--out", path_str(&flagged),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(fs::read_to_string(&flagged).unwrap().lines().count(), 1002);
    let manifest = json(&dir.path().join("flagged.manifest.json"));
    assert_eq!(manifest["command"], "simulate");
}
