use sisac::experiments::{run_sweep, run_validation, Parameter, Scale, SweepSpec, SweepValue};
use sisac::scenario::ScenarioFile;
use sisac::SolveStatus;

fn numbers(xs: &[f64]) -> Vec<SweepValue> {
    xs.iter().copied().map(SweepValue::Number).collect()
}

#[test]
fn spec_parses_from_toml() {
    let spec = SweepSpec::from_toml_str(
        r#"
        parameter = "gamma"
        values = [0.1, 1, 5]
        trials = 3
        scale = "desk"
        psi_db = -3.0

        [series]
        parameter = "proximity"
        values = ["distant", "close"]
        "#,
    )
    .unwrap();
    spec.validate().unwrap();
    assert_eq!(spec.parameter, Parameter::Gamma);
    assert_eq!(spec.scale, Some(Scale::Desk));
    let points = spec.points();
    assert_eq!(points.len(), 6);
    assert_eq!(points[4].series_label(), "proximity=close");
    assert_eq!(points[4].value.1, SweepValue::Number(1.0));
}

#[test]
fn empty_values_and_zero_trials_are_rejected() {
    let mut spec = SweepSpec::new(Parameter::Gamma, Vec::new());
    assert!(spec.validate().is_err());
    spec.values = numbers(&[1.0]);
    spec.trials = 0;
    assert!(spec.validate().is_err());
    assert!(SweepSpec::from_toml_str("parameter = \"beta\"\nvalues = [1]").is_err());
}

#[test]
fn desk_scale_halves_array_and_keeps_total_power() {
    let mut file = ScenarioFile::paper_layout(1);
    Scale::Desk.apply(&mut file);
    assert_eq!(file.antennas, 8);
    let cfg = file.resolve(0, sisac::scenario::Proximity::Distant).unwrap();
    assert!((cfg.power_budget[0] * 8.0 - 30.0).abs() < 1e-12);
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let mut spec = SweepSpec::new(Parameter::Gamma, numbers(&[0.5, 2.0]));
    spec.scale = Some(Scale::Desk);
    spec.trials = 2;
    let one = run_sweep(&spec, 1).unwrap();
    let two = run_sweep(&spec, 2).unwrap();
    let strip = |r: &sisac::experiments::SweepResult| {
        let mut buf = Vec::new();
        r.write_rows_csv(&mut buf).unwrap();
        String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&one), strip(&two));
    assert_eq!(one.rows.len(), 4);
    assert!(one.rows.iter().all(|r| r.is_optimal()));
}

#[test]
fn infeasible_points_stay_in_the_table() {
    let mut spec = SweepSpec::new(Parameter::Gamma, numbers(&[1.0, 1e6]));
    spec.scale = Some(Scale::Desk);
    let res = run_sweep(&spec, 1).unwrap();
    assert_eq!(res.rows.len(), 2);
    assert_eq!(res.rows[0].status, Some(SolveStatus::Optimal));
    assert_eq!(res.rows[1].status, Some(SolveStatus::Infeasible));
    assert!(res.rows[1].diagnosis.is_some());
    let summary = res.summary();
    assert_eq!(summary[1].infeasible, 1);
    assert!(summary[1].crb_deg.iter().all(|c| c.is_nan()));

    let dir = tempfile_dir();
    res.write_outputs(&dir).unwrap();
    let csv = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains("infeasible"));
    assert!(dir.join("summary.csv").exists());
    let plot = std::fs::read_to_string(dir.join("plot.toml")).unwrap();
    assert!(plot.contains("mean_crb_theta1_deg"));
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("sisac-sweep-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn validation_suite_passes() {
    let report = run_validation(1).unwrap();
    for c in &report.checks {
        assert!(c.passed, "{}: measured {} threshold {} ({})", c.name, c.measured, c.threshold, c.detail);
    }
}

#[test]
fn shipped_sweep_files_are_valid() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../sweeps");
    for name in ["crb_vs_gamma.toml", "proximity.toml"] {
        let spec = SweepSpec::load(&dir.join(name)).unwrap();
        spec.validate().unwrap();
        assert!(spec.base_file().is_ok(), "{name}");
    }
}
