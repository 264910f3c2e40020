//! Post-solution analysis: rank diagnostics, beamformer recovery, tightness
//! verdicts and AN beampattern characterization.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fim::{crb_from_fim, FimOperator};
use crate::linalg::{self, c, CMat, CVec};
use crate::scenario::Scenario;
use crate::sdp::{SdpSolution, SolveReport};
use crate::sigmodel::{self, BeamformerSet, LiftedVariables};

/// Thresholds behind the "tight" verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TightnessThresholds {
    /// Largest accepted `lambda_2 / lambda_1` for a rank-one matrix.
    pub rank_ratio: f64,
    /// Sensing-stream eigenvalue ceiling, as a fraction of the largest budget.
    /// Matrices whose top eigenvalue is below this level count as zero.
    pub negligible_fraction: f64,
    /// Largest accepted relative change of any metric after extraction.
    pub metric_delta: f64,
}

impl Default for TightnessThresholds {
    fn default() -> Self {
        Self {
            rank_ratio: 1e-3,
            negligible_fraction: 1e-4,
            metric_delta: 1e-3,
        }
    }
}

/// Spectrum of one solved matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRank {
    pub name: String,
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// `lambda_2 / lambda_1` (0 for an all-zero matrix).
    pub ratio: f64,
}

impl MatrixRank {
    pub fn of(name: impl Into<String>, m: &CMat) -> Self {
        let eigenvalues = linalg::hermitian_eigenvalues(m);
        Self {
            name: name.into(),
            ratio: rank_one_ratio(&eigenvalues),
            eigenvalues,
        }
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// Rank-one within `ratio`, or numerically zero below `floor`.
    pub fn at_most_rank_one(&self, ratio: f64, floor: f64) -> bool {
        self.largest() < floor || self.ratio < ratio
    }
}

fn rank_one_ratio(eig: &[f64]) -> f64 {
    match eig {
        [] => 0.0,
        [l1, rest @ ..] => {
            if *l1 <= 0.0 {
                return 0.0;
            }
            rest.first().map_or(0.0, |l2| l2.max(0.0) / l1)
        }
    }
}

/// Spectra of every solved matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub comm: Vec<MatrixRank>,
    pub sensing: Option<MatrixRank>,
    pub an: Vec<MatrixRank>,
    /// Absolute eigenvalue level below which a matrix is treated as zero.
    pub negligible_level: f64,
}

impl RankReport {
    pub fn new(vars: &LiftedVariables, num_ues: usize, max_power: f64, th: &TightnessThresholds) -> Self {
        let comm = vars.w[..num_ues]
            .iter()
            .enumerate()
            .map(|(k, w)| MatrixRank::of(format!("W{}", k + 1), w))
            .collect();
        let sensing = vars
            .w
            .get(num_ues)
            .map(|w| MatrixRank::of(format!("W{}", num_ues + 1), w));
        let an = vars
            .r
            .iter()
            .enumerate()
            .map(|(m, r)| MatrixRank::of(format!("R{}", m + 1), r))
            .collect();
        Self {
            comm,
            sensing,
            an,
            negligible_level: th.negligible_fraction * max_power,
        }
    }

    pub fn max_comm_ratio(&self) -> f64 {
        self.comm.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn sensing_max_eigenvalue(&self) -> f64 {
        self.sensing.as_ref().map_or(0.0, MatrixRank::largest)
    }

    /// Violations of the rank criteria, one message per offending matrix.
    pub fn violations(&self, th: &TightnessThresholds) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.comm {
            if r.ratio >= th.rank_ratio {
                out.push(format!("{} has lambda2/lambda1 = {:.3e}", r.name, r.ratio));
            }
        }
        if let Some(s) = &self.sensing {
            if s.largest() >= self.negligible_level {
                out.push(format!("{} has eigenvalue {:.3e}", s.name, s.largest()));
            }
        }
        for r in &self.an {
            if !r.at_most_rank_one(th.rank_ratio, self.negligible_level) {
                out.push(format!("{} has lambda2/lambda1 = {:.3e}", r.name, r.ratio));
            }
        }
        out
    }
}

/// Make the first nonzero entry of `u` real and positive.
fn fix_phase(u: &mut CVec) {
    let peak = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = u.iter().find(|z| z.norm() > 1e-12 * peak).copied() {
        let rot = z.conj() / z.norm();
        u.iter_mut().for_each(|e| *e *= rot);
    }
}

/// Dominant eigenpair `(lambda, u)` with the phase convention applied.
fn dominant(m: &CMat) -> (Vec<f64>, f64, CVec) {
    let (vals, vecs) = linalg::hermitian_eig(m);
    let mut u = vecs.column(0).into_owned();
    fix_phase(&mut u);
    let l1 = vals[0];
    (vals, l1, u)
}

/// Recover `f_s = sqrt(lambda_1) u_1` for the first `num_streams` streams.
pub fn extract_beamformers(vars: &LiftedVariables, num_streams: usize, rank_ratio: f64) -> Result<BeamformerSet> {
    if num_streams > vars.num_streams() {
        return Err(Error::Dimension(format!(
            "requested {num_streams} streams, variables hold {}",
            vars.num_streams()
        )));
    }
    let mut stacked = Vec::with_capacity(num_streams);
    for (s, w) in vars.w[..num_streams].iter().enumerate() {
        let (vals, l1, u) = dominant(w);
        let ratio = rank_one_ratio(&vals);
        if ratio >= rank_ratio {
            return Err(Error::NotRankOne {
                what: format!("W{}", s + 1),
                ratio,
                spectrum: vals,
            });
        }
        stacked.push(u * c(l1.max(0.0).sqrt()));
    }
    BeamformerSet::from_stacked(vars.antennas(), vars.num_aps(), stacked)
}

/// Metrics of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub sinr: Vec<f64>,
    pub snr_eve: f64,
    pub power: Vec<f64>,
    /// Angle CRBs in degrees (`NaN` when the FIM is singular).
    pub crb_deg: Vec<f64>,
}

impl Metrics {
    pub fn lifted(scn: &Scenario, op: &FimOperator, vars: &LiftedVariables) -> Result<Self> {
        let sinr = (0..scn.num_ues())
            .map(|k| sigmodel::sinr_ue(scn, vars, k))
            .collect::<Result<_>>()?;
        let power = (0..scn.num_aps())
            .map(|m| sigmodel::ap_power(vars, m))
            .collect::<Result<_>>()?;
        let crb_deg = crb_or_nan(&op.evaluate(vars)?, op);
        Ok(Self {
            sinr,
            snr_eve: sigmodel::snr_eve(scn, vars)?,
            power,
            crb_deg,
        })
    }

    pub fn beamformers(scn: &Scenario, op: &FimOperator, bf: &BeamformerSet, r: &[CMat]) -> Result<Self> {
        let sinr = (0..scn.num_ues())
            .map(|k| sigmodel::sinr_ue_beamformers(scn, bf, r, k))
            .collect::<Result<_>>()?;
        let power = (0..scn.num_aps())
            .map(|m| sigmodel::ap_power_beamformers(bf, r, m))
            .collect();
        let q: Vec<CMat> = (0..scn.num_aps())
            .map(|m| {
                let mut qm = r[m].clone();
                for s in 0..bf.num_streams() {
                    let f = bf.block(s, m);
                    qm += linalg::outer(&f, &f);
                }
                qm
            })
            .collect();
        let crb_deg = crb_or_nan(&op.evaluate_covariances(&q)?, op);
        Ok(Self {
            sinr,
            snr_eve: sigmodel::snr_eve_beamformers(scn, bf, r)?,
            power,
            crb_deg,
        })
    }
}

fn crb_or_nan(j: &nalgebra::DMatrix<f64>, op: &FimOperator) -> Vec<f64> {
    crb_from_fim(j, op.layout).unwrap_or_else(|_| vec![f64::NAN; op.layout.aps])
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

/// Relative changes of every metric between the extracted beamformers and
/// the lifted solution.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDeltas {
    pub sinr: Vec<f64>,
    pub snr_eve: f64,
    pub power: Vec<f64>,
    pub crb: Vec<f64>,
}

impl MetricDeltas {
    fn between(extracted: &Metrics, lifted: &Metrics) -> Self {
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| rel(*x, *y)).collect();
        Self {
            sinr: zip(&extracted.sinr, &lifted.sinr),
            snr_eve: rel(extracted.snr_eve, lifted.snr_eve),
            power: zip(&extracted.power, &lifted.power),
            crb: zip(&extracted.crb_deg, &lifted.crb_deg),
        }
    }

    pub fn max(&self) -> f64 {
        self.sinr
            .iter()
            .chain(&self.power)
            .chain(&self.crb)
            .chain(std::iter::once(&self.snr_eve))
            .fold(0.0, |a, &b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessReport {
    pub tight: bool,
    pub rank: RankReport,
    /// `None` when extraction failed.
    pub deltas: Option<MetricDeltas>,
    pub reasons: Vec<String>,
}

/// Re-evaluate every metric with rank-one beamformers for the communication
/// streams (the sensing stream is dropped) and the solved AN covariances.
pub fn verify_tightness(
    scn: &Scenario,
    op: &FimOperator,
    vars: &LiftedVariables,
    th: &TightnessThresholds,
) -> Result<TightnessReport> {
    let max_p = scn.config.power_budget.iter().copied().fold(0.0, f64::max);
    let rank = RankReport::new(vars, scn.num_ues(), max_p, th);
    let mut reasons = rank.violations(th);
    let lifted = Metrics::lifted(scn, op, vars)?;
    let deltas = match extract_beamformers(vars, scn.num_ues(), th.rank_ratio) {
        Ok(bf) => {
            let extracted = Metrics::beamformers(scn, op, &bf, &vars.r)?;
            let d = MetricDeltas::between(&extracted, &lifted);
            if !(d.max() < th.metric_delta) {
                reasons.push(format!("metric delta {:.3e} after extraction", d.max()));
            }
            Some(d)
        }
        Err(e) => {
            reasons.push(e.to_string());
            None
        }
    };
    Ok(TightnessReport {
        tight: reasons.is_empty(),
        rank,
        deltas,
        reasons,
    })
}

/// Shape of an AN beampattern.
#[derive(Debug, Clone, PartialEq)]
pub struct AnCharacterization {
    pub ap: usize,
    /// Target angle seen from this AP.
    pub theta_deg: f64,
    /// Argmax of the dominant eigenvector's pattern.
    pub peak_deg: f64,
    /// Unnormalized `||a^H R||^2` at the peak.
    pub peak_power: f64,
    pub width_3db_deg: f64,
    /// Largest level outside the main lobe (first nulls), dB below the peak.
    pub sidelobe_db: f64,
    pub rank_ratio: f64,
    pub degenerate: bool,
}

/// Grid step used by [`characterize_an`].
pub const AN_GRID_STEP_DEG: f64 = 0.05;

pub fn characterize_an(r: &CMat, scn: &Scenario, m: usize) -> Result<AnCharacterization> {
    if m >= scn.num_aps() {
        return Err(Error::Dimension(format!("AP index {m} out of range")));
    }
    let grid = sigmodel::angle_grid_deg(AN_GRID_STEP_DEG);
    let full = sigmodel::an_beampattern(r, &grid)?;
    let (vals, l1, u) = dominant(r);
    let theta_deg = scn.theta[m] * 180.0 / PI;
    if full.degenerate || l1 <= 0.0 {
        return Ok(AnCharacterization {
            ap: m,
            theta_deg,
            peak_deg: f64::NAN,
            peak_power: 0.0,
            width_3db_deg: f64::NAN,
            sidelobe_db: f64::NAN,
            rank_ratio: 0.0,
            degenerate: true,
        });
    }
    let dom = sigmodel::an_beampattern(&linalg::outer(&u, &u), &grid)?;
    let peak = dom.argmax();

    let p = &full.power;
    let (mut lo, mut hi) = (peak, peak);
    while lo > 0 && full.gain_db[lo - 1] >= full.gain_db[peak] - 3.0 {
        lo -= 1;
    }
    while hi + 1 < p.len() && full.gain_db[hi + 1] >= full.gain_db[peak] - 3.0 {
        hi += 1;
    }
    let width_3db_deg = (hi - lo) as f64 * AN_GRID_STEP_DEG;
    let (mut lo, mut hi) = (peak, peak);
    while lo > 0 && p[lo - 1] <= p[lo] {
        lo -= 1;
    }
    while hi + 1 < p.len() && p[hi + 1] <= p[hi] {
        hi += 1;
    }
    let peak_db = full.gain_db[peak];
    let sidelobe_db = (0..p.len())
        .filter(|&i| i < lo || i > hi)
        .map(|i| full.gain_db[i] - peak_db)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AnCharacterization {
        ap: m,
        theta_deg,
        peak_deg: grid[peak] * 180.0 / PI,
        peak_power: p[peak],
        width_3db_deg,
        sidelobe_db,
        rank_ratio: rank_one_ratio(&vals),
        degenerate: false,
    })
}

/// Pattern level at `theta_m` relative to the larger of the levels at
/// `theta_m +/- offset_deg`, in dB.
pub fn an_directivity_db(r: &CMat, theta: f64, offset_deg: f64) -> f64 {
    let at = sigmodel::an_beam_power(r, theta);
    let off = offset_deg * PI / 180.0;
    let side = sigmodel::an_beam_power(r, theta + off).max(sigmodel::an_beam_power(r, theta - off));
    10.0 * (at / side.max(f64::MIN_POSITIVE)).log10()
}

/// Everything known about a solved design.
#[derive(Debug, Clone)]
pub struct DesignSolution {
    pub vars: LiftedVariables,
    pub epigraph: Vec<f64>,
    pub report: SolveReport,
    /// Communication beamformers, or the reason extraction failed.
    pub beamformers: std::result::Result<BeamformerSet, String>,
    pub rank: RankReport,
    pub tightness: TightnessReport,
    pub achieved: Metrics,
    pub an: Vec<AnCharacterization>,
}

impl DesignSolution {
    pub fn analyze(scn: &Scenario, op: &FimOperator, sol: SdpSolution, th: &TightnessThresholds) -> Result<Self> {
        let tightness = verify_tightness(scn, op, &sol.vars, th)?;
        let beamformers = extract_beamformers(&sol.vars, scn.num_ues(), th.rank_ratio).map_err(|e| e.to_string());
        let achieved = Metrics::lifted(scn, op, &sol.vars)?;
        let an = (0..scn.num_aps())
            .map(|m| characterize_an(&sol.vars.r[m], scn, m))
            .collect::<Result<_>>()?;
        Ok(Self {
            rank: tightness.rank.clone(),
            vars: sol.vars,
            epigraph: sol.epigraph,
            report: sol.report,
            beamformers,
            tightness,
            achieved,
            an,
        })
    }

    /// Plain-text dossier with embedded CSV blocks.
    pub fn write_report<W: Write>(&self, scn: &Scenario, mut w: W) -> std::io::Result<()> {
        let r = &self.report;
        writeln!(w, "[solve]")?;
        writeln!(w, "status = {}", r.status.as_str())?;
        writeln!(w, "objective = {:.10e}", r.objective)?;
        writeln!(w, "dual_objective = {:.10e}", r.dual_objective)?;
        writeln!(w, "iterations = {}", r.iterations)?;
        writeln!(w, "max_primal_residual = {:.3e}", r.max_primal_residual)?;
        writeln!(w, "relative_gap = {:.3e}", r.relative_gap)?;
        writeln!(w, "wall_time_s = {:.3}", r.wall_time.as_secs_f64())?;
        writeln!(w, "message = {}", r.message)?;
        if let Some(d) = r.diagnosis {
            writeln!(w, "first_infeasible_family = {}", d.as_str())?;
        }
        writeln!(w)?;
        writeln!(w, "[activity]")?;
        writeln!(w, "constraint,slack")?;
        for a in &r.activity {
            writeln!(w, "{},{:.6e}", a.name, a.slack)?;
        }
        writeln!(w)?;
        writeln!(w, "[metrics]")?;
        writeln!(w, "quantity,index,value")?;
        for (k, v) in self.achieved.sinr.iter().enumerate() {
            writeln!(w, "sinr,{},{:.8e}", k + 1, v)?;
        }
        writeln!(w, "snr_eve_db,,{:.6}", 10.0 * self.achieved.snr_eve.log10())?;
        for (m, v) in self.achieved.power.iter().enumerate() {
            writeln!(w, "power,{},{:.8e}", m + 1, v)?;
        }
        for (m, v) in self.achieved.crb_deg.iter().enumerate() {
            writeln!(w, "crb_deg,{},{:.8e}", m + 1, v)?;
        }
        for (i, t) in self.epigraph.iter().enumerate() {
            writeln!(w, "epigraph,{},{:.8e}", i + 1, t)?;
        }
        writeln!(w)?;
        writeln!(w, "[tightness]")?;
        writeln!(w, "tight = {}", self.tightness.tight)?;
        for reason in &self.tightness.reasons {
            writeln!(w, "reason = {reason}")?;
        }
        if let Some(d) = &self.tightness.deltas {
            writeln!(w, "max_metric_delta = {:.3e}", d.max())?;
        }
        writeln!(w)?;
        writeln!(w, "[spectra]")?;
        writeln!(w, "matrix,index,eigenvalue")?;
        let all = self.rank.comm.iter().chain(self.rank.sensing.iter()).chain(&self.rank.an);
        for mr in all {
            for (i, v) in mr.eigenvalues.iter().take(4).enumerate() {
                writeln!(w, "{},{},{:.6e}", mr.name, i + 1, v)?;
            }
        }
        writeln!(w)?;
        writeln!(w, "[an]")?;
        writeln!(w, "ap,theta_deg,peak_deg,peak_power,width_3db_deg,sidelobe_db,rank_ratio")?;
        for a in &self.an {
            writeln!(
                w,
                "{},{:.4},{:.4},{:.6e},{:.4},{:.3},{:.3e}",
                a.ap + 1,
                a.theta_deg,
                a.peak_deg,
                a.peak_power,
                a.width_3db_deg,
                a.sidelobe_db,
                a.rank_ratio
            )?;
        }
        if let Ok(bf) = &self.beamformers {
            writeln!(w)?;
            writeln!(w, "[beamformers]")?;
            writeln!(w, "stream,ap,antenna,re,im")?;
            for s in 0..bf.num_streams() {
                for m in 0..scn.num_aps() {
                    for (n, z) in bf.block(s, m).iter().enumerate() {
                        writeln!(w, "{},{},{},{:.10e},{:.10e}", s + 1, m + 1, n, z.re, z.im)?;
                    }
                }
            }
        }
        Ok(())
    }
}
