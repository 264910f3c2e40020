//! Sweep runner and the validation suite.
//!
//! A sweep is a grid of points (one swept parameter, optionally crossed with
//! a second "series" parameter) times a number of UE-placement trials. Every
//! (point, trial) pair is an independent solve; jobs run on a rayon pool and
//! results are kept in (point, trial) order, so the worker count never
//! changes the output.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{self, DesignSolution, TightnessThresholds};
use crate::fim::{self, assemble_fim_operator};
use crate::oracle;
use crate::scenario::{build_scenario, linear_to_db, Proximity, Scenario, ScenarioFile};
use crate::sdp::{self, default_tolerance, FailingFamily, SolveStatus};
use crate::sigmodel::{self, LiftedVariables};
use crate::synth;

/// Array size preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 8-element arrays.
    Desk,
    /// 30-element arrays.
    Paper,
}

impl Scale {
    pub fn antennas(self) -> usize {
        match self {
            Self::Desk => 8,
            Self::Paper => 30,
        }
    }

    /// Resize the arrays, scaling the power budgets so that `N * P_m` stays
    /// what the file specifies.
    pub fn apply(self, file: &mut ScenarioFile) {
        let n = self.antennas();
        if file.antennas != n {
            file.power_budget_w = file.power_budget_w.scaled(file.antennas as f64 / n as f64);
            file.antennas = n;
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Desk => "desk",
            Self::Paper => "paper",
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            other => Err(Error::InvalidConfig(format!("unknown scale `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    /// Common linear SINR floor.
    Gamma,
    /// Eve SNR ceiling in dB.
    Psi,
    /// `"close"` or `"distant"`.
    Proximity,
    /// Antennas per AP.
    #[serde(alias = "N")]
    N,
    /// Scenario seed (target gains and UE draws).
    Seed,
}

impl Parameter {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gamma => "gamma",
            Self::Psi => "psi_db",
            Self::Proximity => "proximity",
            Self::N => "N",
            Self::Seed => "seed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Number(x) => write!(f, "{x}"),
            Self::Text(s) => f.write_str(s),
        }
    }
}

impl SweepValue {
    fn number(&self, p: Parameter) -> Result<f64> {
        match self {
            Self::Number(x) => Ok(*x),
            Self::Text(s) => s
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{}: `{s}` is not a number", p.as_str()))),
        }
    }

    fn count(&self, p: Parameter) -> Result<u64> {
        let x = self.number(p)?;
        if x < 0.0 || x.fract() != 0.0 {
            return Err(Error::InvalidConfig(format!("{}: {x} is not a whole number", p.as_str())));
        }
        Ok(x as u64)
    }

    fn apply(&self, p: Parameter, file: &mut ScenarioFile, prox: &mut Proximity) -> Result<()> {
        match p {
            Parameter::Gamma => file.set_gamma(self.number(p)?),
            Parameter::Psi => file.set_psi_db(self.number(p)?),
            Parameter::N => file.antennas = self.count(p)? as usize,
            Parameter::Seed => file.seed = self.count(p)?,
            Parameter::Proximity => {
                *prox = match self {
                    Self::Text(s) if s == "close" => Proximity::Close,
                    Self::Text(s) if s == "distant" => Proximity::Distant,
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "proximity must be \"close\" or \"distant\", got `{other}`"
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub parameter: Parameter,
    pub values: Vec<SweepValue>,
}

/// Sweep description, usually read from a TOML file.
///
/// ```toml
/// parameter = "gamma"
/// values = [0.1, 1, 2, 4, 5]
/// trials = 10
/// scale = "paper"
/// output_dir = "out/fig3"
///
/// [series]
/// parameter = "psi"
/// values = [0, -3, -5]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Base scenario file; the reference layout when absent. Relative paths
    /// are resolved against the spec file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    pub parameter: Parameter,
    pub values: Vec<SweepValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Series>,
    #[serde(default = "one_trial")]
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Fixed values applied before the swept ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proximity: Option<Proximity>,
}

fn one_trial() -> u64 {
    1
}

impl SweepSpec {
    pub fn new(parameter: Parameter, values: Vec<SweepValue>) -> Self {
        Self {
            scenario: None,
            seed: None,
            scale: None,
            parameter,
            values,
            series: None,
            trials: 1,
            output_dir: None,
            gamma: None,
            psi_db: None,
            proximity: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut spec: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut spec.scenario, &mut spec.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one value".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if let Some(s) = &self.series {
            if s.values.is_empty() {
                return Err(Error::InvalidConfig("series needs at least one value".into()));
            }
            if s.parameter == self.parameter {
                return Err(Error::InvalidConfig("series and sweep use the same parameter".into()));
            }
        }
        Ok(())
    }

    /// Base scenario with seed, scale and fixed overrides applied.
    pub fn base_file(&self) -> Result<ScenarioFile> {
        let mut file = match &self.scenario {
            Some(p) => ScenarioFile::load(p)?,
            None => ScenarioFile::paper_layout(self.seed.unwrap_or(1)),
        };
        if let Some(seed) = self.seed {
            file.seed = seed;
        }
        if let Some(scale) = self.scale {
            scale.apply(&mut file);
        }
        if let Some(g) = self.gamma {
            file.set_gamma(g);
        }
        if let Some(p) = self.psi_db {
            file.set_psi_db(p);
        }
        Ok(file)
    }

    /// Grid points, series-major.
    pub fn points(&self) -> Vec<SweepPoint> {
        let series: Vec<Option<(Parameter, SweepValue)>> = match &self.series {
            Some(s) => s.values.iter().map(|v| Some((s.parameter, v.clone()))).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for s in series {
            for v in &self.values {
                out.push(SweepPoint {
                    index: out.len(),
                    series: s.clone(),
                    value: (self.parameter, v.clone()),
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub series: Option<(Parameter, SweepValue)>,
    pub value: (Parameter, SweepValue),
}

impl SweepPoint {
    pub fn series_label(&self) -> String {
        self.series
            .as_ref()
            .map_or_else(String::new, |(p, v)| format!("{}={}", p.as_str(), v))
    }
}

/// Outcome of one (point, trial) solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: usize,
    pub trial: u64,
    pub series: String,
    pub value: String,
    pub gamma: f64,
    pub psi_db: f64,
    pub proximity: Proximity,
    pub antennas: usize,
    pub seed: u64,
    /// `None` when the scenario could not be built.
    pub status: Option<SolveStatus>,
    pub error: Option<String>,
    pub diagnosis: Option<FailingFamily>,
    pub iterations: usize,
    pub objective: f64,
    /// `|sum t - Tr(J^-1)| / Tr(J^-1)`.
    pub epigraph_error: f64,
    pub crb_deg: Vec<f64>,
    pub sinr: Vec<f64>,
    pub snr_eve_db: f64,
    pub power: Vec<f64>,
    pub budget: Vec<f64>,
    pub tight: bool,
    pub tightness_reasons: Vec<String>,
    pub max_comm_ratio: f64,
    pub sensing_max_eigenvalue: f64,
    /// Largest `lambda2/lambda1` over AN covariances that are not negligible.
    pub max_an_ratio: f64,
    /// Largest eigenvalue of each AN covariance.
    pub an_eigenvalue: Vec<f64>,
    /// Eigenvalue level below which a matrix counts as zero.
    pub negligible_level: f64,
    pub an_peak_deg: Vec<f64>,
    pub an_theta_deg: Vec<f64>,
    pub an_peak_power: Vec<f64>,
    pub an_sidelobe_db: Vec<f64>,
    /// Pattern level at `theta_m` over the level at `theta_m +/- 10 deg`.
    pub an_directivity_db: Vec<f64>,
    pub sinr_slack_min: f64,
    pub solve_time: Duration,
}

impl SweepRow {
    fn blank(point: &SweepPoint, trial: u64, file: &ScenarioFile, prox: Proximity) -> Self {
        let gamma = match &file.gamma {
            Some(crate::scenario::ScalarOrList::Scalar(g)) => *g,
            _ => f64::NAN,
        };
        let psi_db = match (file.psi, file.psi_db) {
            (_, Some(p)) => p,
            (Some(p), None) => linear_to_db(p),
            _ => f64::NAN,
        };
        Self {
            point: point.index,
            trial,
            series: point.series_label(),
            value: point.value.1.to_string(),
            gamma,
            psi_db,
            proximity: prox,
            antennas: file.antennas,
            seed: file.seed,
            status: None,
            error: None,
            diagnosis: None,
            iterations: 0,
            objective: f64::NAN,
            epigraph_error: f64::NAN,
            crb_deg: Vec::new(),
            sinr: Vec::new(),
            snr_eve_db: f64::NAN,
            power: Vec::new(),
            budget: Vec::new(),
            tight: false,
            tightness_reasons: Vec::new(),
            max_comm_ratio: f64::NAN,
            sensing_max_eigenvalue: f64::NAN,
            max_an_ratio: f64::NAN,
            an_eigenvalue: Vec::new(),
            negligible_level: f64::NAN,
            an_peak_deg: Vec::new(),
            an_theta_deg: Vec::new(),
            an_peak_power: Vec::new(),
            an_sidelobe_db: Vec::new(),
            an_directivity_db: Vec::new(),
            sinr_slack_min: f64::NAN,
            solve_time: Duration::ZERO,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Some(SolveStatus::Optimal)
    }

    fn fill(&mut self, scn: &Scenario, sol: &DesignSolution) {
        self.status = Some(sol.report.status);
        self.diagnosis = sol.report.diagnosis;
        self.iterations = sol.report.iterations;
        self.objective = sol.report.objective;
        self.solve_time = sol.report.wall_time;
        self.budget = scn.config.power_budget.clone();
        if sol.report.status != SolveStatus::Optimal {
            self.error = Some(sol.report.message.clone());
            return;
        }
        self.epigraph_error = epigraph_error(&sol.epigraph, scn, &sol.vars);
        self.crb_deg = sol.achieved.crb_deg.clone();
        self.sinr = sol.achieved.sinr.clone();
        self.snr_eve_db = linear_to_db(sol.achieved.snr_eve);
        self.power = sol.achieved.power.clone();
        self.tight = sol.tightness.tight;
        self.tightness_reasons = sol.tightness.reasons.clone();
        self.max_comm_ratio = sol.rank.max_comm_ratio();
        self.sensing_max_eigenvalue = sol.rank.sensing_max_eigenvalue();
        self.max_an_ratio = sol
            .rank
            .an
            .iter()
            .filter(|r| r.largest() >= sol.rank.negligible_level)
            .map(|r| r.ratio)
            .fold(0.0, f64::max);
        self.negligible_level = sol.rank.negligible_level;
        self.an_eigenvalue = sol.rank.an.iter().map(|r| r.largest()).collect();
        self.an_peak_deg = sol.an.iter().map(|a| a.peak_deg).collect();
        self.an_theta_deg = sol.an.iter().map(|a| a.theta_deg).collect();
        self.an_peak_power = sol.an.iter().map(|a| a.peak_power).collect();
        self.an_sidelobe_db = sol.an.iter().map(|a| a.sidelobe_db).collect();
        self.an_directivity_db = sol
            .vars
            .r
            .iter()
            .zip(&scn.theta)
            .map(|(r, &t)| extract::an_directivity_db(r, t, 10.0))
            .collect();
        self.sinr_slack_min = self
            .sinr
            .iter()
            .zip(&scn.config.gamma)
            .map(|(s, g)| s / g)
            .fold(f64::INFINITY, f64::min);
    }
}

/// Relative gap between the epigraph sum and `Tr(J^-1)` by direct inversion.
pub fn epigraph_error(epigraph: &[f64], scn: &Scenario, vars: &LiftedVariables) -> f64 {
    let op = assemble_fim_operator(scn);
    match op.evaluate(vars).and_then(|j| fim::trace_inverse(&j)) {
        Ok(tr) => (epigraph.iter().sum::<f64>() - tr).abs() / tr,
        Err(_) => f64::INFINITY,
    }
}

/// Solve one scenario end to end with the default tolerance for its size.
pub fn solve_and_analyze(scn: &Scenario) -> Result<DesignSolution> {
    let (problem, sol) = sdp::solve_scenario(scn, default_tolerance(scn.antennas()));
    DesignSolution::analyze(scn, &problem.fim, sol, &TightnessThresholds::default())
}

fn run_job(spec: &SweepSpec, base: &ScenarioFile, point: &SweepPoint, trial: u64) -> SweepRow {
    let mut file = base.clone();
    let mut prox = spec.proximity.unwrap_or(Proximity::Distant);
    let applied = point
        .series
        .iter()
        .chain(std::iter::once(&point.value))
        .try_for_each(|(p, v)| v.apply(*p, &mut file, &mut prox));
    let mut row = SweepRow::blank(point, trial, &file, prox);
    let scn = applied
        .and_then(|_| file.resolve(trial, prox))
        .and_then(build_scenario);
    let scn = match scn {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    match solve_and_analyze(&scn) {
        Ok(sol) => row.fill(&scn, &sol),
        Err(e) => {
            row.status = Some(SolveStatus::NumericalFailure);
            row.error = Some(e.to_string());
        }
    }
    row
}

/// Per-point means over trials that solved to optimality.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub point: usize,
    pub series: String,
    pub value: String,
    pub trials: usize,
    pub optimal: usize,
    pub infeasible: usize,
    pub failed: usize,
    pub tight: usize,
    pub crb_deg: Vec<f64>,
    pub snr_eve_db: f64,
    pub an_peak_power: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl SweepResult {
    pub fn num_aps(&self) -> usize {
        self.rows.iter().map(|r| r.budget.len().max(r.crb_deg.len())).max().unwrap_or(0)
    }

    pub fn num_ues(&self) -> usize {
        self.rows.iter().map(|r| r.sinr.len()).max().unwrap_or(0)
    }

    pub fn point_rows(&self, point: usize) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.point == point)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let m = self.num_aps();
        self.spec
            .points()
            .iter()
            .map(|p| {
                let rows: Vec<&SweepRow> = self.point_rows(p.index).collect();
                let ok: Vec<&SweepRow> = rows.iter().copied().filter(|r| r.is_optimal()).collect();
                let col = |f: &dyn Fn(&SweepRow) -> f64| mean(ok.iter().map(|r| f(r)));
                SummaryRow {
                    point: p.index,
                    series: p.series_label(),
                    value: p.value.1.to_string(),
                    trials: rows.len(),
                    optimal: ok.len(),
                    infeasible: rows.iter().filter(|r| r.status == Some(SolveStatus::Infeasible)).count(),
                    failed: rows
                        .iter()
                        .filter(|r| matches!(r.status, None | Some(SolveStatus::NumericalFailure)))
                        .count(),
                    tight: ok.iter().filter(|r| r.tight).count(),
                    crb_deg: (0..m).map(|i| col(&|r| r.crb_deg[i])).collect(),
                    snr_eve_db: col(&|r| r.snr_eve_db),
                    an_peak_power: (0..m).map(|i| col(&|r| r.an_peak_power[i])).collect(),
                    objective: col(&|r| r.objective),
                }
            })
            .collect()
    }

    /// Summary row of the point whose series and swept values print as given.
    pub fn summary_at(&self, series: &str, value: &str) -> Option<SummaryRow> {
        self.summary().into_iter().find(|s| s.series == series && s.value == value)
    }

    fn row_header(&self) -> Vec<String> {
        let (m, k) = (self.num_aps(), self.num_ues());
        let mut h: Vec<String> = [
            "point", "trial", "series", "value", "gamma", "psi_db", "proximity", "N", "seed", "status", "diagnosis",
            "iterations", "objective", "epigraph_error",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((1..=m).map(|i| format!("crb_theta{i}_deg")));
        h.extend((1..=k).map(|i| format!("sinr{i}")));
        h.push("snr_eve_db".into());
        h.extend((1..=m).map(|i| format!("power{i}")));
        h.extend(["tight", "max_comm_ratio", "sensing_max_eig", "max_an_ratio"].map(String::from));
        for i in 1..=m {
            h.extend(
                ["an_eigenvalue", "an_theta_deg", "an_peak_deg", "an_peak_power", "an_sidelobe_db"]
                    .iter()
                    .map(|s| format!("{s}{i}")),
            );
        }
        h.push("error".into());
        h.push("solve_time_s".into());
        h
    }

    fn row_record(&self, r: &SweepRow) -> Vec<String> {
        let (m, k) = (self.num_aps(), self.num_ues());
        let g = |x: f64| if x.is_nan() { String::new() } else { format!("{x:.10e}") };
        let at = |v: &[f64], i: usize| v.get(i).map_or(String::new(), |&x| g(x));
        let mut rec = vec![
            r.point.to_string(),
            r.trial.to_string(),
            r.series.clone(),
            r.value.clone(),
            g(r.gamma),
            g(r.psi_db),
            r.proximity.as_str().into(),
            r.antennas.to_string(),
            r.seed.to_string(),
            r.status.map_or("error", SolveStatus::as_str).into(),
            r.diagnosis.map_or(String::new(), |d| d.as_str().into()),
            r.iterations.to_string(),
            g(r.objective),
            g(r.epigraph_error),
        ];
        rec.extend((0..m).map(|i| at(&r.crb_deg, i)));
        rec.extend((0..k).map(|i| at(&r.sinr, i)));
        rec.push(g(r.snr_eve_db));
        rec.extend((0..m).map(|i| at(&r.power, i)));
        rec.push(if r.is_optimal() { r.tight.to_string() } else { String::new() });
        rec.extend([r.max_comm_ratio, r.sensing_max_eigenvalue, r.max_an_ratio].map(g));
        for i in 0..m {
            rec.extend([
                at(&r.an_eigenvalue, i),
                at(&r.an_theta_deg, i),
                at(&r.an_peak_deg, i),
                at(&r.an_peak_power, i),
                at(&r.an_sidelobe_db, i),
            ]);
        }
        rec.push(r.error.clone().unwrap_or_default());
        rec.push(format!("{:.3}", r.solve_time.as_secs_f64()));
        rec
    }

    /// One row per (point, trial).
    pub fn write_rows_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.row_header()).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(self.row_record(r)).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let m = self.num_aps();
        let mut w = csv::Writer::from_writer(out);
        let mut h: Vec<String> = ["point", "series", "value", "trials", "optimal", "infeasible", "failed", "tight"]
            .map(String::from)
            .to_vec();
        h.extend((1..=m).map(|i| format!("mean_crb_theta{i}_deg")));
        h.push("mean_snr_eve_db".into());
        h.extend((1..=m).map(|i| format!("mean_an_peak_power{i}")));
        h.push("mean_objective".into());
        w.write_record(&h).map_err(csv_err)?;
        let g = |x: f64| if x.is_nan() { String::new() } else { format!("{x:.10e}") };
        for s in self.summary() {
            let mut rec = vec![
                s.point.to_string(),
                s.series.clone(),
                s.value.clone(),
                s.trials.to_string(),
                s.optimal.to_string(),
                s.infeasible.to_string(),
                s.failed.to_string(),
                s.tight.to_string(),
            ];
            rec.extend(s.crb_deg.iter().map(|&x| g(x)));
            rec.push(g(s.snr_eve_db));
            rec.extend(s.an_peak_power.iter().map(|&x| g(x)));
            rec.push(g(s.objective));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write `results.csv`, `summary.csv` and `plot.toml` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_rows_csv(std::fs::File::create(dir.join("results.csv"))?)?;
        self.write_summary_csv(std::fs::File::create(dir.join("summary.csv"))?)?;
        let plot = PlotDescription::for_sweep(self);
        std::fs::write(
            dir.join("plot.toml"),
            toml::to_string_pretty(&plot).map_err(|e| Error::InvalidConfig(e.to_string()))?,
        )?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Run every (point, trial) job on `workers` threads (0 = rayon default).
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    let base = spec.base_file()?;
    let points = spec.points();
    let jobs: Vec<(&SweepPoint, u64)> = points
        .iter()
        .flat_map(|p| (0..spec.trials).map(move |t| (p, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let rows = pool.install(|| jobs.par_iter().map(|(p, t)| run_job(spec, &base, p, *t)).collect());
    Ok(SweepResult {
        spec: spec.clone(),
        rows,
    })
}

/// Chart recipe that accompanies the CSV outputs.
#[derive(Debug, Clone, Serialize)]
pub struct PlotDescription {
    pub source: String,
    pub summary: String,
    pub x: String,
    pub group_by: Option<String>,
    pub series: Vec<PlotSeries>,
    pub reference: Vec<ReferenceCurve>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlotSeries {
    pub column: String,
    pub label: String,
    pub unit: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceCurve {
    pub name: String,
    pub column: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Published curves over `gamma in {0.1, 1, 2, 4, 5}` at the reference layout.
pub mod reference {
    pub const GAMMA: [f64; 5] = [0.1, 1.0, 2.0, 4.0, 5.0];
    /// `(psi_db, CRB theta_1 [deg], CRB theta_2 [deg])`.
    pub const CRB_VS_GAMMA: [(f64, [f64; 5], [f64; 5]); 3] = [
        (
            0.0,
            [0.389312, 0.395035, 0.402433, 0.419427, 0.428925],
            [0.151185, 0.153402, 0.156267, 0.162853, 0.166535],
        ),
        (
            -3.0,
            [0.389674, 0.395139, 0.402759, 0.419998, 0.429634],
            [0.151326, 0.153442, 0.156392, 0.163069, 0.166803],
        ),
        (
            -5.0,
            [0.389273, 0.395735, 0.403189, 0.420410, 0.430121],
            [0.151170, 0.153673, 0.156558, 0.163226, 0.166987],
        ),
    ];
    /// `(psi_db, achieved Eve SNR [dB])`.
    pub const EVE_SNR_VS_GAMMA: [(f64, [f64; 5]); 3] = [
        (0.0, [-0.0291, -0.0036, -0.0011, -0.0013, -0.0004]),
        (-3.0, [-3.0317, -3.0137, -3.0108, -3.0119, -3.0112]),
        (-5.0, [-5.2333, -5.2296, -5.2315, -5.2296, -5.2293]),
    ];
    /// Two UEs 0.5 m from the target, `psi = 0 dB`.
    pub const CLOSE_CRB: ([f64; 5], [f64; 5]) = (
        [0.389090, 0.400580, 0.437243, 0.597804, 0.823797],
        [0.151099, 0.155671, 0.170593, 0.236249, 0.331987],
    );
}

impl PlotDescription {
    pub fn for_sweep(res: &SweepResult) -> Self {
        let m = res.num_aps();
        let mut series: Vec<PlotSeries> = (1..=m)
            .map(|i| PlotSeries {
                column: format!("mean_crb_theta{i}_deg"),
                label: format!("CRB theta_{i}"),
                unit: "deg".into(),
            })
            .collect();
        series.push(PlotSeries {
            column: "mean_snr_eve_db".into(),
            label: "achieved Eve SNR".into(),
            unit: "dB".into(),
        });
        series.extend((1..=m).map(|i| PlotSeries {
            column: format!("mean_an_peak_power{i}"),
            label: format!("AN beampattern peak, AP {i}"),
            unit: "linear".into(),
        }));
        let mut reference = Vec::new();
        if res.spec.parameter == Parameter::Gamma {
            let x = reference::GAMMA.to_vec();
            for (psi, c1, c2) in reference::CRB_VS_GAMMA {
                reference.push(ReferenceCurve {
                    name: format!("CRB theta_1, psi={psi} dB"),
                    column: "mean_crb_theta1_deg".into(),
                    x: x.clone(),
                    y: c1.to_vec(),
                });
                reference.push(ReferenceCurve {
                    name: format!("CRB theta_2, psi={psi} dB"),
                    column: "mean_crb_theta2_deg".into(),
                    x: x.clone(),
                    y: c2.to_vec(),
                });
            }
            for (psi, snr) in reference::EVE_SNR_VS_GAMMA {
                reference.push(ReferenceCurve {
                    name: format!("Eve SNR, psi={psi} dB"),
                    column: "mean_snr_eve_db".into(),
                    x: x.clone(),
                    y: snr.to_vec(),
                });
            }
            let (c1, c2) = reference::CLOSE_CRB;
            for (i, y) in [c1, c2].into_iter().enumerate() {
                reference.push(ReferenceCurve {
                    name: format!("CRB theta_{}, close UEs", i + 1),
                    column: format!("mean_crb_theta{}_deg", i + 1),
                    x: x.clone(),
                    y: y.to_vec(),
                });
            }
        }
        Self {
            source: "results.csv".into(),
            summary: "summary.csv".into(),
            x: "value".into(),
            group_by: res.spec.series.as_ref().map(|_| "series".into()),
            series,
            reference,
        }
    }
}

/// One property of the validation suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `name,passed,measured,threshold,detail` lines.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["property", "passed", "measured", "threshold", "detail"])
            .map_err(csv_err)?;
        for c in &self.checks {
            w.write_record([
                c.name.to_string(),
                c.passed.to_string(),
                format!("{:.3e}", c.measured),
                format!("{:.3e}", c.threshold),
                c.detail.clone(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn below(name: &'static str, measured: f64, threshold: f64, detail: String) -> Check {
    Check {
        name,
        passed: measured < threshold,
        measured,
        threshold,
        detail,
    }
}

fn fim_oracle_check(seed: u64) -> Result<Check> {
    let mut worst = 0.0f64;
    for i in 0..4 {
        let scn = synth::random_scenario(seed + i, 2, 4, 2)?;
        let vars = synth::random_lifted(seed + 100 + i, &scn)?;
        let analytic = assemble_fim_operator(&scn).evaluate(&vars)?;
        let fd = oracle::fim_finite_difference(&scn, &vars, 1e-6);
        worst = worst.max(oracle::relative_frobenius(&analytic, &fd));
    }
    Ok(below("fim_oracle", worst, 1e-6, "4 instances, M=2, N=4, K=2".into()))
}

fn metric_equivalence_check(seed: u64) -> Result<Check> {
    let mut worst = 0.0f64;
    for i in 0..20 {
        let scn = synth::random_scenario(seed + i, 2, 4, 3)?;
        let (bf, r) = synth::random_beamformers(seed + 1000 + i, &scn, 1)?;
        let vars = LiftedVariables::from_beamformers(&bf, r.clone())?;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        for k in 0..scn.num_ues() {
            worst = worst.max(rel(
                sigmodel::sinr_ue(&scn, &vars, k)?,
                sigmodel::sinr_ue_beamformers(&scn, &bf, &r, k)?,
            ));
        }
        worst = worst.max(rel(sigmodel::snr_eve(&scn, &vars)?, sigmodel::snr_eve_beamformers(&scn, &bf, &r)?));
    }
    Ok(below("metric_equivalence", worst, 1e-10, "20 rank-one instances".into()))
}

/// Run the property suite on the desk-scale reference layout.
pub fn run_validation(seed: u64) -> Result<ValidationReport> {
    let mut checks = vec![fim_oracle_check(seed)?, metric_equivalence_check(seed)?];

    let mut file = ScenarioFile::paper_layout(seed);
    Scale::Desk.apply(&mut file);
    file.set_gamma(1.0);
    let scn = build_scenario(file.resolve(0, Proximity::Distant)?)?;
    let sol = solve_and_analyze(&scn)?;
    let optimal = sol.report.status == SolveStatus::Optimal;
    checks.push(Check {
        name: "desk_solve",
        passed: optimal,
        measured: sol.report.relative_gap,
        threshold: default_tolerance(scn.antennas()),
        detail: format!("status {}, {} iterations", sol.report.status.as_str(), sol.report.iterations),
    });
    checks.push(below(
        "epigraph_exactness",
        epigraph_error(&sol.epigraph, &scn, &sol.vars),
        1e-4,
        "desk-scale reference layout".into(),
    ));
    let snr_db = linear_to_db(sol.achieved.snr_eve);
    let psi_db = linear_to_db(scn.config.psi);
    checks.push(Check {
        name: "feasibility",
        passed: optimal
            && sol.achieved.snr_eve <= scn.config.psi * (1.0 + 1e-6)
            && sol
                .achieved
                .sinr
                .iter()
                .zip(&scn.config.gamma)
                .all(|(s, g)| *s >= g * (1.0 - 1e-6))
            && sol
                .achieved
                .power
                .iter()
                .zip(&scn.config.power_budget)
                .all(|(p, b)| *p <= b * (1.0 + 1e-6)),
        measured: snr_db - psi_db,
        threshold: 0.0,
        detail: format!("Eve SNR {snr_db:.4} dB against {psi_db:.1} dB"),
    });
    checks.push(Check {
        name: "tightness",
        passed: sol.tightness.tight,
        measured: sol.tightness.deltas.as_ref().map_or(f64::INFINITY, |d| d.max()),
        threshold: TightnessThresholds::default().metric_delta,
        detail: if sol.tightness.reasons.is_empty() {
            format!("max comm rank ratio {:.2e}", sol.rank.max_comm_ratio())
        } else {
            sol.tightness.reasons.join("; ")
        },
    });
    let crb_pos = sol.achieved.crb_deg.iter().all(|c| c.is_finite() && *c > 0.0);
    checks.push(Check {
        name: "crb_finite",
        passed: crb_pos,
        measured: sol.achieved.crb_deg.iter().copied().fold(0.0, f64::max),
        threshold: f64::INFINITY,
        detail: "CRB of every target angle is finite and positive".into(),
    });
    Ok(ValidationReport { checks })
}
