//! Random instances for property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::scenario::{build_scenario, ChannelModel, Scenario, ScenarioConfig};
use crate::sigmodel::{BeamformerSet, LiftedVariables};

/// Random geometry, budgets and noise levels with `aps` APs of `antennas`
/// elements and `ues` UEs, targets kept away from endfire.
pub fn random_scenario(seed: u64, aps: usize, antennas: usize, ues: usize) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ap_positions: Vec<[f64; 2]> = (0..aps).map(|m| [10.0 + 60.0 * m as f64, 0.0]).collect();
    let eve_position = [rng.random_range(20.0..60.0), rng.random_range(20.0..60.0)];
    let ue_positions = (0..ues)
        .map(|_| [rng.random_range(0.0..80.0), rng.random_range(10.0..70.0)])
        .collect();
    let delta2 = (0..aps)
        .map(|_| (0..aps).map(|_| rng.random_range(0.05..0.5)).collect())
        .collect();
    build_scenario(ScenarioConfig {
        ap_positions,
        ue_positions,
        eve_position,
        antennas,
        power_budget: (0..aps).map(|_| rng.random_range(0.5..2.0)).collect(),
        sigma2_c: rng.random_range(0.5..2.0),
        sigma2_s: rng.random_range(0.5..2.0),
        delta2,
        gamma: vec![0.5; ues],
        psi: 1.0,
        channel: ChannelModel::default(),
        seed: rng.random(),
    })
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> CVec {
    CVec::from_fn(len, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

/// Random beamformers for every stream and random AN covariances of the
/// given rank.
pub fn random_beamformers(seed: u64, scn: &Scenario, an_rank: usize) -> Result<(BeamformerSet, Vec<CMat>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m) = (scn.antennas(), scn.num_aps());
    let stacked = (0..scn.num_streams()).map(|_| gaussian_vec(&mut rng, n * m) * c(0.3)).collect();
    let bf = BeamformerSet::from_stacked(n, m, stacked)?;
    let r = (0..m)
        .map(|_| {
            (0..an_rank).fold(CMat::zeros(n, n), |acc, _| {
                let v = gaussian_vec(&mut rng, n) * c(0.2);
                acc + linalg::outer(&v, &v)
            })
        })
        .collect();
    Ok((bf, r))
}

/// Random full-rank lifted variables.
pub fn random_lifted(seed: u64, scn: &Scenario) -> Result<LiftedVariables> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m) = (scn.antennas(), scn.num_aps());
    let psd = |rng: &mut ChaCha8Rng, size: usize| {
        let g = CMat::from_fn(size, size, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        });
        &g * g.adjoint() * c(0.05)
    };
    let w = (0..scn.num_streams()).map(|_| psd(&mut rng, n * m)).collect();
    let r = (0..m).map(|_| psd(&mut rng, n)).collect();
    LiftedVariables::new(w, r)
}
