//! Waveform model and closed-form performance metrics.
//!
//! Each metric is available in lifted form (stream covariances `W_s` and AN
//! covariances `R_m`) and in beamformer form. For rank-one lifts
//! `W_s = f_s f_s^H` the two agree exactly.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};
use crate::scenario::{steering_vector, Scenario};

/// Stream covariances `W_s` (each `NM x NM`) and per-AP AN covariances
/// `R_m` (each `N x N`).
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVariables {
    pub w: Vec<CMat>,
    pub r: Vec<CMat>,
    antennas: usize,
}

impl LiftedVariables {
    /// Builds the set, replacing every matrix with its Hermitian part.
    pub fn new(w: Vec<CMat>, r: Vec<CMat>) -> Result<Self> {
        let aps = r.len();
        if aps == 0 {
            return Err(Error::Dimension("at least one AN covariance is required".into()));
        }
        let n = r[0].nrows();
        for (i, rm) in r.iter().enumerate() {
            if rm.nrows() != n || rm.ncols() != n {
                return Err(Error::Dimension(format!("R[{i}] is not {n}x{n}")));
            }
        }
        for (s, ws) in w.iter().enumerate() {
            if ws.nrows() != n * aps || ws.ncols() != n * aps {
                return Err(Error::Dimension(format!("W[{s}] is not {0}x{0}", n * aps)));
            }
        }
        let w = w.iter().map(linalg::hermitian_part).collect();
        let r = r.iter().map(linalg::hermitian_part).collect();
        Ok(Self { w, r, antennas: n })
    }

    pub fn zeros(antennas: usize, aps: usize, streams: usize) -> Self {
        let nm = antennas * aps;
        Self {
            w: vec![CMat::zeros(nm, nm); streams],
            r: vec![CMat::zeros(antennas, antennas); aps],
            antennas,
        }
    }

    /// Rank-one lift of a beamformer set plus the given AN covariances.
    pub fn from_beamformers(bf: &BeamformerSet, r: Vec<CMat>) -> Result<Self> {
        let w = bf.stacked.iter().map(|f| linalg::outer(f, f)).collect();
        Self::new(w, r)
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn num_aps(&self) -> usize {
        self.r.len()
    }

    pub fn num_streams(&self) -> usize {
        self.w.len()
    }

    /// Diagonal block `W_{m,s}`.
    pub fn w_block(&self, s: usize, m: usize) -> CMat {
        let n = self.antennas;
        self.w[s].view((m * n, m * n), (n, n)).into_owned()
    }

    /// `Q_m = sum_s W_{m,s} + R_m`: covariance of the total signal leaving AP `m`.
    pub fn ap_covariance(&self, m: usize) -> CMat {
        let mut q = self.r[m].clone();
        for s in 0..self.num_streams() {
            q += self.w_block(s, m);
        }
        q
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            w: self.w.iter().map(|x| x * c(k)).collect(),
            r: self.r.iter().map(|x| x * c(k)).collect(),
            antennas: self.antennas,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_like(other)?;
        Ok(Self {
            w: self.w.iter().zip(&other.w).map(|(a, b)| a + b).collect(),
            r: self.r.iter().zip(&other.r).map(|(a, b)| a + b).collect(),
            antennas: self.antennas,
        })
    }

    fn check_like(&self, other: &Self) -> Result<()> {
        if self.antennas != other.antennas
            || self.num_aps() != other.num_aps()
            || self.num_streams() != other.num_streams()
        {
            return Err(Error::Dimension("lifted variable sets have different shapes".into()));
        }
        Ok(())
    }

    /// Smallest eigenvalue over all matrices, relative to the largest trace.
    pub fn min_relative_eigenvalue(&self) -> f64 {
        let all = self.w.iter().chain(self.r.iter());
        let scale = all.clone().map(linalg::trace_re).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        all.map(linalg::min_eigenvalue).fold(f64::INFINITY, f64::min) / scale
    }

    pub(crate) fn check_scenario(&self, scn: &Scenario) -> Result<()> {
        if self.antennas != scn.antennas()
            || self.num_aps() != scn.num_aps()
            || self.num_streams() != scn.num_streams()
        {
            return Err(Error::Dimension(format!(
                "variables (N={}, M={}, S={}) do not match scenario (N={}, M={}, S={})",
                self.antennas,
                self.num_aps(),
                self.num_streams(),
                scn.antennas(),
                scn.num_aps(),
                scn.num_streams()
            )));
        }
        Ok(())
    }
}

/// Precoders `f_{m,s}`, stored per stream in stacked form `f_s` of length `NM`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub antennas: usize,
    pub aps: usize,
    pub stacked: Vec<CVec>,
}

impl BeamformerSet {
    pub fn from_stacked(antennas: usize, aps: usize, stacked: Vec<CVec>) -> Result<Self> {
        if let Some(bad) = stacked.iter().position(|f| f.len() != antennas * aps) {
            return Err(Error::Dimension(format!("f[{bad}] has wrong length")));
        }
        Ok(Self {
            antennas,
            aps,
            stacked,
        })
    }

    /// From per-stream lists of per-AP blocks, `blocks[s][m]`.
    pub fn from_blocks(blocks: &[Vec<CVec>]) -> Result<Self> {
        let aps = blocks.first().map_or(0, Vec::len);
        let antennas = blocks.first().and_then(|b| b.first()).map_or(0, |f| f.len());
        let mut stacked = Vec::with_capacity(blocks.len());
        for (s, per_ap) in blocks.iter().enumerate() {
            if per_ap.len() != aps || per_ap.iter().any(|f| f.len() != antennas) {
                return Err(Error::Dimension(format!("stream {s} has inconsistent blocks")));
            }
            let mut f = CVec::zeros(antennas * aps);
            for (m, fm) in per_ap.iter().enumerate() {
                f.rows_mut(m * antennas, antennas).copy_from(fm);
            }
            stacked.push(f);
        }
        Ok(Self {
            antennas,
            aps,
            stacked,
        })
    }

    pub fn num_streams(&self) -> usize {
        self.stacked.len()
    }

    /// `f_{m,s}`.
    pub fn block(&self, s: usize, m: usize) -> CVec {
        self.stacked[s].rows(m * self.antennas, self.antennas).into_owned()
    }

    pub fn blocks(&self) -> Vec<Vec<CVec>> {
        (0..self.num_streams())
            .map(|s| (0..self.aps).map(|m| self.block(s, m)).collect())
            .collect()
    }
}

fn check_ue(scn: &Scenario, k: usize) -> Result<()> {
    if k >= scn.num_ues() {
        return Err(Error::Dimension(format!("UE index {k} out of range (K = {})", scn.num_ues())));
    }
    Ok(())
}

/// SINR of UE `k`, with multi-user interference and AN treated as noise.
pub fn sinr_ue(scn: &Scenario, vars: &LiftedVariables, k: usize) -> Result<f64> {
    vars.check_scenario(scn)?;
    check_ue(scn, k)?;
    let h = &scn.h[k];
    let signal = linalg::quad_form(h, &vars.w[k]);
    let interference: f64 = (0..vars.num_streams())
        .filter(|&s| s != k)
        .map(|s| linalg::quad_form(h, &vars.w[s]))
        .sum();
    let an: f64 = (0..scn.num_aps())
        .map(|m| linalg::quad_form(&scn.h_block(m, k), &vars.r[m]))
        .sum();
    Ok(signal / (interference + an + scn.config.sigma2_c))
}

/// Beamformer form of [`sinr_ue`]. The per-AP contributions of stream `s`
/// add coherently at the UE, `|sum_m h_{m,k}^H f_{m,s}|^2`, which is what the
/// lifted trace `Tr(h_k h_k^H W_s)` evaluates for `W_s = f_s f_s^H`.
pub fn sinr_ue_beamformers(scn: &Scenario, bf: &BeamformerSet, r: &[CMat], k: usize) -> Result<f64> {
    check_ue(scn, k)?;
    if bf.aps != scn.num_aps() || bf.antennas != scn.antennas() || r.len() != scn.num_aps() {
        return Err(Error::Dimension("beamformers do not match scenario".into()));
    }
    let gain = |s: usize| -> f64 {
        (0..scn.num_aps())
            .map(|m| scn.h_block(m, k).dotc(&bf.block(s, m)))
            .sum::<crate::linalg::C64>()
            .norm_sqr()
    };
    let signal = if k < bf.num_streams() { gain(k) } else { 0.0 };
    let interference: f64 = (0..bf.num_streams()).filter(|&s| s != k).map(gain).sum();
    let an: f64 = (0..scn.num_aps())
        .map(|m| linalg::quad_form(&scn.h_block(m, k), &r[m]))
        .sum();
    Ok(signal / (interference + an + scn.config.sigma2_c))
}

/// Eavesdropper SNR from the monostatic echo paths.
pub fn snr_eve(scn: &Scenario, vars: &LiftedVariables) -> Result<f64> {
    vars.check_scenario(scn)?;
    let mut num = 0.0;
    let mut an = 0.0;
    for m in 0..scn.num_aps() {
        let a = scn.target_steering(m);
        let d2 = scn.monostatic_delta2(m);
        for s in 0..vars.num_streams() {
            num += d2 * linalg::quad_form(&a, &vars.w_block(s, m));
        }
        an += d2 * linalg::quad_form(&a, &vars.r[m]);
    }
    Ok(num / (an + scn.config.sigma2_s))
}

pub fn snr_eve_beamformers(scn: &Scenario, bf: &BeamformerSet, r: &[CMat]) -> Result<f64> {
    if bf.aps != scn.num_aps() || bf.antennas != scn.antennas() || r.len() != scn.num_aps() {
        return Err(Error::Dimension("beamformers do not match scenario".into()));
    }
    let mut num = 0.0;
    let mut an = 0.0;
    for m in 0..scn.num_aps() {
        let a = scn.target_steering(m);
        let d2 = scn.monostatic_delta2(m);
        for s in 0..bf.num_streams() {
            num += d2 * a.dotc(&bf.block(s, m)).norm_sqr();
        }
        an += d2 * linalg::quad_form(&a, &r[m]);
    }
    Ok(num / (an + scn.config.sigma2_s))
}

/// Transmit power of AP `m`: `Tr(sum_s W_{m,s}) + Tr(R_m)`.
pub fn ap_power(vars: &LiftedVariables, m: usize) -> Result<f64> {
    if m >= vars.num_aps() {
        return Err(Error::Dimension(format!("AP index {m} out of range")));
    }
    Ok(linalg::trace_re(&vars.ap_covariance(m)))
}

pub fn ap_power_beamformers(bf: &BeamformerSet, r: &[CMat], m: usize) -> f64 {
    (0..bf.num_streams()).map(|s| bf.block(s, m).norm_squared()).sum::<f64>() + linalg::trace_re(&r[m])
}

/// Beampattern over an angle grid, normalized to a 0 dB maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct Beampattern {
    pub theta: Vec<f64>,
    pub gain_db: Vec<f64>,
    /// Unnormalized linear power at each grid point.
    pub power: Vec<f64>,
    /// Set when the covariance is zero; the pattern is then flat at 0 dB.
    pub degenerate: bool,
}

impl Beampattern {
    fn from_power(theta: &[f64], power: Vec<f64>) -> Self {
        let peak = power.iter().copied().fold(0.0, f64::max);
        let degenerate = !(peak > 0.0);
        let gain_db = if degenerate {
            vec![0.0; power.len()]
        } else {
            power.iter().map(|&p| 10.0 * (p / peak).max(1e-300).log10()).collect()
        };
        Self {
            theta: theta.to_vec(),
            gain_db,
            power,
            degenerate,
        }
    }

    pub fn argmax(&self) -> usize {
        self.power
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0
    }
}

/// `||a(theta)^H R||^2`, the squared norm of the row vector.
pub fn an_beam_power(r: &CMat, theta: f64) -> f64 {
    let a = steering_vector(theta, r.nrows());
    (r.adjoint() * a).norm_squared()
}

/// AN beampattern `||a(theta)^H R||^2` in dB relative to its grid maximum.
pub fn an_beampattern(r: &CMat, theta_grid: &[f64]) -> Result<Beampattern> {
    if theta_grid.is_empty() {
        return Err(Error::Dimension("empty angle grid".into()));
    }
    let power = theta_grid.iter().map(|&t| an_beam_power(r, t)).collect();
    Ok(Beampattern::from_power(theta_grid, power))
}

/// Alternative quadratic-form pattern `a(theta)^H R a(theta)`.
pub fn an_beampattern_quadratic(r: &CMat, theta_grid: &[f64]) -> Result<Beampattern> {
    if theta_grid.is_empty() {
        return Err(Error::Dimension("empty angle grid".into()));
    }
    let power = theta_grid
        .iter()
        .map(|&t| linalg::quad_form(&steering_vector(t, r.nrows()), r).max(0.0))
        .collect();
    Ok(Beampattern::from_power(theta_grid, power))
}

/// Uniform grid over `[-90, 90]` degrees with the given step, in radians.
pub fn angle_grid_deg(step_deg: f64) -> Vec<f64> {
    let n = (180.0 / step_deg).round() as usize;
    (0..=n).map(|i| (-90.0 + i as f64 * step_deg) * PI / 180.0).collect()
}
