//! Network geometry, steering vectors and channel generation.
//!
//! Every AP carries a half-wavelength ULA whose axis is parallel to the
//! x-axis. Angles are measured from broadside (+y), positive towards +x, so a
//! point straight in front of an AP sits at angle zero.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CVec, C64, J};

/// ULA response `a_n = exp(j pi n sin(theta))`, `n = 0..N-1`.
pub fn steering_vector(theta: f64, n: usize) -> CVec {
    let s = theta.sin();
    CVec::from_fn(n, |i, _| C64::from_polar(1.0, PI * i as f64 * s))
}

/// Derivative of [`steering_vector`] with respect to the angle.
pub fn steering_derivative(theta: f64, n: usize) -> CVec {
    let (s, cth) = theta.sin_cos();
    CVec::from_fn(n, |i, _| {
        let k = PI * i as f64;
        J * (k * cth) * C64::from_polar(1.0, k * s)
    })
}

/// Angle of `target` seen from an array at `origin`, measured from broadside.
pub fn broadside_angle(origin: [f64; 2], target: [f64; 2]) -> f64 {
    (target[0] - origin[0]).atan2(target[1] - origin[1])
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Line-of-sight communication channel with distance-dependent gain
/// `beta = (d_ref / d)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    #[serde(default = "ChannelModel::default_reference_distance")]
    pub reference_distance_m: f64,
    #[serde(default = "ChannelModel::default_exponent")]
    pub pathloss_exponent: f64,
}

impl ChannelModel {
    fn default_reference_distance() -> f64 {
        40.0
    }

    fn default_exponent() -> f64 {
        2.0
    }

    pub fn gain(&self, distance_m: f64) -> f64 {
        (self.reference_distance_m / distance_m).powf(self.pathloss_exponent)
    }
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            reference_distance_m: Self::default_reference_distance(),
            pathloss_exponent: Self::default_exponent(),
        }
    }
}

/// Fully resolved scenario parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    pub eve_position: [f64; 2],
    /// Antennas per AP array.
    pub antennas: usize,
    /// Per-AP power budget in watts.
    pub power_budget: Vec<f64>,
    pub sigma2_c: f64,
    pub sigma2_s: f64,
    /// Swerling-I gain variance, indexed `[rx][tx]`.
    pub delta2: Vec<Vec<f64>>,
    /// Per-UE SINR floors (linear).
    pub gamma: Vec<f64>,
    /// Eavesdropper SNR ceiling (linear).
    pub psi: f64,
    pub channel: ChannelModel,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    /// One stream per UE plus the sensing stream.
    pub fn num_streams(&self) -> usize {
        self.num_ues() + 1
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_aps();
        let k = self.num_ues();
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if m == 0 {
            return bad("at least one AP is required".into());
        }
        let finite = |p: &[f64; 2]| p[0].is_finite() && p[1].is_finite();
        if !self.ap_positions.iter().all(finite)
            || !self.ue_positions.iter().all(finite)
            || !finite(&self.eve_position)
        {
            return bad("positions must be finite".into());
        }
        if self.antennas < 2 {
            return bad(format!("antennas per AP must be >= 2, got {}", self.antennas));
        }
        if self.power_budget.len() != m || self.power_budget.iter().any(|&p| !(p > 0.0)) {
            return bad("power budget must hold one positive value per AP".into());
        }
        if !(self.sigma2_c > 0.0) || !(self.sigma2_s > 0.0) {
            return bad("noise variances must be positive".into());
        }
        if self.delta2.len() != m
            || self.delta2.iter().any(|row| row.len() != m || row.iter().any(|&d| !(d > 0.0)))
        {
            return bad(format!("delta2 must be a positive {m}x{m} matrix"));
        }
        if self.gamma.len() != k || self.gamma.iter().any(|&g| !(g >= 0.0) || !g.is_finite()) {
            return bad("gamma must hold one finite non-negative value per UE".into());
        }
        if !(self.psi > 0.0) {
            return bad("psi must be positive".into());
        }
        if !(self.channel.reference_distance_m > 0.0) || !self.channel.pathloss_exponent.is_finite() {
            return bad("invalid channel model".into());
        }
        for (i, ap) in self.ap_positions.iter().enumerate() {
            if distance(*ap, self.eve_position) == 0.0 {
                return bad(format!("Eve coincides with AP {i}; its angle is undefined"));
            }
            for (j, ue) in self.ue_positions.iter().enumerate() {
                if distance(*ap, *ue) == 0.0 {
                    return bad(format!("UE {j} coincides with AP {i}"));
                }
            }
        }
        Ok(())
    }
}

/// A built scenario: the configuration plus every quantity derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// Target angle seen from each AP (radians).
    pub theta: Vec<f64>,
    /// Radar channel gains, `alpha[(rx, tx)]`.
    pub alpha: DMatrix<C64>,
    /// Communication channels `h[k]`, stacked over APs (length `N * M`).
    pub h: Vec<CVec>,
}

impl Scenario {
    pub fn antennas(&self) -> usize {
        self.config.antennas
    }

    pub fn num_aps(&self) -> usize {
        self.config.num_aps()
    }

    pub fn num_ues(&self) -> usize {
        self.config.num_ues()
    }

    pub fn num_streams(&self) -> usize {
        self.config.num_streams()
    }

    /// Per-AP block `h_{m,k}`.
    pub fn h_block(&self, m: usize, k: usize) -> CVec {
        let n = self.antennas();
        self.h[k].rows(m * n, n).into_owned()
    }

    /// Target steering vector at AP `m`.
    pub fn target_steering(&self, m: usize) -> CVec {
        steering_vector(self.theta[m], self.antennas())
    }

    pub fn target_steering_derivative(&self, m: usize) -> CVec {
        steering_derivative(self.theta[m], self.antennas())
    }

    /// Monostatic gain variance `delta_m^m`.
    pub fn monostatic_delta2(&self, m: usize) -> f64 {
        self.config.delta2[m][m]
    }

    /// Angle of UE `k` seen from AP `m`.
    pub fn ue_angle(&self, m: usize, k: usize) -> f64 {
        broadside_angle(self.config.ap_positions[m], self.config.ue_positions[k])
    }
}

/// Build a scenario. Radar gains are drawn from CN(0, delta2) with a
/// generator seeded by `config.seed`, so the result is a pure function of
/// the configuration.
pub fn build_scenario(config: ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let m = config.num_aps();
    let n = config.antennas;
    let theta: Vec<f64> = config
        .ap_positions
        .iter()
        .map(|&ap| broadside_angle(ap, config.eve_position))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut alpha = DMatrix::<C64>::zeros(m, m);
    for rx in 0..m {
        for tx in 0..m {
            let sd = (config.delta2[rx][tx] / 2.0).sqrt();
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            alpha[(rx, tx)] = C64::new(sd * re, sd * im);
        }
    }

    let h = config
        .ue_positions
        .iter()
        .map(|&ue| {
            let mut hk = CVec::zeros(n * m);
            for (mi, &ap) in config.ap_positions.iter().enumerate() {
                let beta = config.channel.gain(distance(ap, ue));
                let block = steering_vector(broadside_angle(ap, ue), n) * C64::new(beta.sqrt(), 0.0);
                hk.rows_mut(mi * n, n).copy_from(&block);
            }
            hk
        })
        .collect();

    Ok(Scenario {
        config,
        theta,
        alpha,
        h,
    })
}

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

impl ScalarOrList {
    pub fn scaled(&self, k: f64) -> Self {
        match self {
            Self::Scalar(x) => Self::Scalar(x * k),
            Self::List(v) => Self::List(v.iter().map(|x| x * k).collect()),
        }
    }

    fn expand(&self, len: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Self::Scalar(v) => Ok(vec![*v; len]),
            Self::List(v) if v.len() == len => Ok(v.clone()),
            Self::List(v) => Err(Error::InvalidConfig(format!(
                "{what}: expected {len} values, got {}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrMatrix {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

/// UE placement: explicit coordinates, or `count` UEs drawn uniformly in an
/// axis-aligned box (redrawn per trial from the seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UePlacement {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default = "UePlacement::default_box_min")]
    pub box_min: [f64; 2],
    #[serde(default = "UePlacement::default_box_max")]
    pub box_max: [f64; 2],
}

impl UePlacement {
    fn default_box_min() -> [f64; 2] {
        [20.0, 30.0]
    }

    fn default_box_max() -> [f64; 2] {
        [60.0, 70.0]
    }

    pub fn random(count: usize) -> Self {
        Self {
            positions: None,
            count: Some(count),
            box_min: Self::default_box_min(),
            box_max: Self::default_box_max(),
        }
    }

    /// Resolve the UE coordinates for a given trial.
    pub fn resolve(&self, seed: u64, trial: u64) -> Result<Vec<[f64; 2]>> {
        match (&self.positions, self.count) {
            (Some(p), None) => Ok(p.clone()),
            (Some(p), Some(c)) if c == p.len() => Ok(p.clone()),
            (None, Some(count)) => {
                if !(self.box_min[0] <= self.box_max[0] && self.box_min[1] <= self.box_max[1]) {
                    return Err(Error::InvalidConfig("UE box is empty".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1 + trial);
                Ok((0..count)
                    .map(|_| {
                        [
                            rng.random_range(self.box_min[0]..=self.box_max[0]),
                            rng.random_range(self.box_min[1]..=self.box_max[1]),
                        ]
                    })
                    .collect())
            }
            _ => Err(Error::InvalidConfig(
                "ues: give either `positions` or `count` (with an optional box)".into(),
            )),
        }
    }
}

/// Where UEs sit relative to the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proximity {
    /// Placement as configured.
    Distant,
    /// The first two UEs moved to 0.5 m left and right of the target.
    Close,
}

impl Proximity {
    pub const CLOSE_OFFSET_M: f64 = 0.5;

    pub fn apply(self, ues: &mut [[f64; 2]], eve: [f64; 2]) {
        if self == Self::Close {
            let offsets = [-Self::CLOSE_OFFSET_M, Self::CLOSE_OFFSET_M];
            for (ue, dx) in ues.iter_mut().zip(offsets) {
                *ue = [eve[0] + dx, eve[1]];
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Distant => "distant",
            Self::Close => "close",
        }
    }
}

/// On-disk scenario description (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    pub antennas: usize,
    pub ap_positions: Vec<[f64; 2]>,
    pub eve_position: [f64; 2],
    pub ues: UePlacement,
    #[serde(default = "one")]
    pub power_budget_w: ScalarOrList,
    #[serde(default = "unit")]
    pub sigma2_c: f64,
    #[serde(default = "unit")]
    pub sigma2_s: f64,
    pub delta2: ScalarOrMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<ScalarOrList>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_db: Option<ScalarOrList>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_db: Option<f64>,
    #[serde(default)]
    pub channel: ChannelModel,
}

fn one() -> ScalarOrList {
    ScalarOrList::Scalar(1.0)
}

fn unit() -> f64 {
    1.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Target position used by the reference layout.
pub const REFERENCE_EVE_POSITION: [f64; 2] = [66.0, 40.0];

impl ScenarioFile {
    /// Two APs at `[10, 0]` and `[80, 0]`, 30-element arrays, four UEs drawn
    /// in a 40 m x 40 m box, unit budgets and noise, delta2 = 0.1,
    /// gamma = 0.1 and psi = 0 dB.
    pub fn paper_layout(seed: u64) -> Self {
        Self {
            seed,
            antennas: 30,
            ap_positions: vec![[10.0, 0.0], [80.0, 0.0]],
            eve_position: REFERENCE_EVE_POSITION,
            ues: UePlacement::random(4),
            power_budget_w: one(),
            sigma2_c: 1.0,
            sigma2_s: 1.0,
            delta2: ScalarOrMatrix::Scalar(0.1),
            gamma: Some(ScalarOrList::Scalar(0.1)),
            gamma_db: None,
            psi: None,
            psi_db: Some(0.0),
            channel: ChannelModel::default(),
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
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario file serializes")
    }

    /// Set a uniform linear SINR floor.
    pub fn set_gamma(&mut self, gamma: f64) {
        self.gamma = Some(ScalarOrList::Scalar(gamma));
        self.gamma_db = None;
    }

    pub fn set_psi_db(&mut self, psi_db: f64) {
        self.psi_db = Some(psi_db);
        self.psi = None;
    }

    /// Resolve to a [`ScenarioConfig`] for the given trial (which only
    /// affects randomly placed UEs).
    pub fn resolve(&self, trial: u64, proximity: Proximity) -> Result<ScenarioConfig> {
        let m = self.ap_positions.len();
        let mut ues = self.ues.resolve(self.seed, trial)?;
        if proximity == Proximity::Close && ues.len() < 2 {
            return Err(Error::InvalidConfig("close proximity needs at least two UEs".into()));
        }
        proximity.apply(&mut ues, self.eve_position);
        let k = ues.len();
        let gamma = match (&self.gamma, &self.gamma_db) {
            (Some(g), None) => g.expand(k, "gamma")?,
            (None, Some(g)) => g.expand(k, "gamma_db")?.into_iter().map(db_to_linear).collect(),
            (None, None) => return Err(Error::InvalidConfig("one of gamma / gamma_db is required".into())),
            (Some(_), Some(_)) => return Err(Error::InvalidConfig("gamma and gamma_db are exclusive".into())),
        };
        let psi = match (self.psi, self.psi_db) {
            (Some(p), None) => p,
            (None, Some(p)) => db_to_linear(p),
            (None, None) => return Err(Error::InvalidConfig("one of psi / psi_db is required".into())),
            (Some(_), Some(_)) => return Err(Error::InvalidConfig("psi and psi_db are exclusive".into())),
        };
        let delta2 = match &self.delta2 {
            ScalarOrMatrix::Scalar(d) => vec![vec![*d; m]; m],
            ScalarOrMatrix::Matrix(rows) => rows.clone(),
        };
        Ok(ScenarioConfig {
            ap_positions: self.ap_positions.clone(),
            ue_positions: ues,
            eve_position: self.eve_position,
            antennas: self.antennas,
            power_budget: self.power_budget_w.expand(m, "power_budget_w")?,
            sigma2_c: self.sigma2_c,
            sigma2_s: self.sigma2_s,
            delta2,
            gamma,
            psi,
            channel: self.channel,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: C64, b: C64, tol: f64) {
        assert!((a - b).norm() < tol, "{a} vs {b}");
    }

    #[test]
    fn steering_at_broadside_is_all_ones() {
        let a = steering_vector(0.0, 4);
        for z in a.iter() {
            assert_close(*z, C64::new(1.0, 0.0), 1e-15);
        }
    }

    #[test]
    fn steering_at_endfire_alternates() {
        let a = steering_vector(PI / 2.0, 3);
        assert_close(a[0], C64::new(1.0, 0.0), 1e-15);
        assert_close(a[1], C64::new(-1.0, 0.0), 1e-15);
        assert_close(a[2], C64::new(1.0, 0.0), 1e-14);
    }

    #[test]
    fn derivative_closed_forms() {
        let d = steering_derivative(0.0, 3);
        assert_eq!(d[0], C64::new(0.0, 0.0));
        assert_close(d[1], C64::new(0.0, PI), 1e-15);
        assert_close(d[2], C64::new(0.0, 2.0 * PI), 1e-15);
        let d = steering_derivative(PI / 2.0, 5);
        assert!(d.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn derivative_matches_central_difference() {
        let (theta, n, h) = (0.7, 8, 1e-6);
        let fd = (steering_vector(theta + h, n) - steering_vector(theta - h, n)) / C64::new(2.0 * h, 0.0);
        let d = steering_derivative(theta, n);
        for i in 0..n {
            assert!((fd[i] - d[i]).norm() < 1e-5);
        }
    }

    #[test]
    fn conjugate_product_sums_to_phase_derivative() {
        let (theta, n) = (0.3, 30);
        let a = steering_vector(theta, n);
        let d = steering_derivative(theta, n);
        let s: C64 = a.iter().zip(d.iter()).map(|(x, y)| x.conj() * y).sum();
        let expected: f64 = (0..n).map(|i| PI * i as f64 * theta.cos()).sum();
        assert!(s.re.abs() < 1e-9);
        assert!((s.im - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn broadside_target_has_zero_angle() {
        assert_eq!(broadside_angle([10.0, 0.0], [10.0, 25.0]), 0.0);
        assert!(broadside_angle([10.0, 0.0], [20.0, 10.0]) > 0.0);
    }

    #[test]
    fn paper_layout_dimensions() {
        let cfg = ScenarioFile::paper_layout(3).resolve(0, Proximity::Distant).unwrap();
        let scn = build_scenario(cfg).unwrap();
        assert_eq!(scn.num_streams(), 5);
        assert_eq!(crate::fim::EtaLayout::new(scn.num_aps()).dim(), 10);
        assert_ne!(scn.theta[0], scn.theta[1]);
        assert!(scn.h.iter().all(|h| h.len() == 60));
    }

    #[test]
    fn same_seed_is_bitwise_reproducible() {
        let f = ScenarioFile::paper_layout(11);
        let a = build_scenario(f.resolve(2, Proximity::Distant).unwrap()).unwrap();
        let b = build_scenario(f.resolve(2, Proximity::Distant).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = build_scenario(f.resolve(3, Proximity::Distant).unwrap()).unwrap();
        assert_ne!(a.config.ue_positions, c.config.ue_positions);
        assert_eq!(a.alpha, c.alpha);
    }

    #[test]
    fn eve_on_top_of_ap_is_rejected() {
        let mut f = ScenarioFile::paper_layout(1);
        f.eve_position = [10.0, 0.0];
        let cfg = f.resolve(0, Proximity::Distant).unwrap();
        assert!(matches!(build_scenario(cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn close_proximity_flanks_the_target() {
        let f = ScenarioFile::paper_layout(1);
        let cfg = f.resolve(0, Proximity::Close).unwrap();
        let eve = cfg.eve_position;
        assert_eq!(cfg.ue_positions[0], [eve[0] - 0.5, eve[1]]);
        assert_eq!(cfg.ue_positions[1], [eve[0] + 0.5, eve[1]]);
    }

    #[test]
    fn toml_round_trip_and_db_inputs() {
        let text = r#"
            seed = 5
            antennas = 8
            ap_positions = [[10.0, 0.0], [80.0, 0.0]]
            eve_position = [50.0, 40.0]
            delta2 = [[0.1, 0.2], [0.2, 0.1]]
            gamma_db = 3.0
            psi_db = -3.0
            power_budget_w = [1.0, 2.0]

            [ues]
            positions = [[30.0, 20.0], [40.0, 30.0]]
        "#;
        let f = ScenarioFile::from_toml_str(text).unwrap();
        let cfg = f.resolve(0, Proximity::Distant).unwrap();
        assert!((cfg.gamma[0] - 1.995262315).abs() < 1e-8);
        assert!((cfg.psi - 0.501187234).abs() < 1e-8);
        assert_eq!(cfg.power_budget, vec![1.0, 2.0]);
        assert_eq!(cfg.delta2[0][1], 0.2);
        let again = ScenarioFile::from_toml_str(&f.to_toml_string()).unwrap();
        assert_eq!(again, f);
    }
}
