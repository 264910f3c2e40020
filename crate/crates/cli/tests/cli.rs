use std::path::Path;
use std::process::{Command, Output};

fn sisac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sisac")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_exits_zero() {
    let out = sisac(&["validate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).lines().all(|l| l.contains("PASS")));
}

#[test]
fn solve_writes_a_dossier() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dossier.txt");
    let out = sisac(&["solve", "--scale", "desk", "--gamma", "1", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("status = optimal"));
    assert!(text.contains("tight = true"));
    assert!(text.contains("[beamformers]"));
}

#[test]
fn unreachable_floor_exits_two() {
    let out = sisac(&["solve", "--scale", "desk", "--gamma", "1e6"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sinr"));
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "antennas = 1\n").unwrap();
    let out = sisac(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(sisac(&["solve", "--scale", "huge"]).status.code(), Some(1));
}

#[test]
fn config_file_round_trips_through_solve() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scn.toml");
    let mut file = sisac::scenario::ScenarioFile::paper_layout(3);
    file.antennas = 6;
    file.power_budget_w = sisac::scenario::ScalarOrList::Scalar(5.0);
    file.set_psi_db(-3.0);
    std::fs::write(&path, file.to_toml_string()).unwrap();
    let out = sisac(&["solve", "--config", path.to_str().unwrap(), "--gamma", "0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("snr_eve_db"));
}

#[test]
fn beampattern_covers_the_grid_for_every_ap() {
    let out = sisac(&["beampattern", "--scale", "desk", "--gamma", "1", "--step", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("ap,theta_deg,gain_db,power"));
    assert_eq!(text.lines().count(), 1 + 2 * 181);
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    std::fs::write(&spec, "parameter = \"psi\"\nvalues = [0, -3]\ngamma = 1.0\noutput_dir = \"out\"\n").unwrap();
    let out = sisac(&["sweep", spec.to_str().unwrap(), "--scale", "desk", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    for f in ["results.csv", "summary.csv", "plot.toml"] {
        assert!(Path::new(&out_dir.join(f)).exists(), "{f} missing");
    }
}
