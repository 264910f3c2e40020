use sisac::fim::{assemble_fim_operator, trace_inverse};
use sisac::linalg::{self, CMat, CVec};
use sisac::scenario::{build_scenario, ChannelModel, Scenario, ScenarioConfig};
use sisac::sdp::{build_problem, solve};
use sisac::{SolveStatus, C64};

/// Single AP, single UE, two antennas, Eve ceiling out of reach.
pub fn tiny_scenario() -> Scenario {
    build_scenario(ScenarioConfig {
        ap_positions: vec![[0.0, 0.0]],
        ue_positions: vec![[-20.0, 25.0]],
        eve_position: [12.0, 30.0],
        antennas: 2,
        power_budget: vec![1.0],
        sigma2_c: 1.0,
        sigma2_s: 1.0,
        delta2: vec![vec![0.5]],
        gamma: vec![1.5],
        psi: 1e6,
        channel: ChannelModel::default(),
        seed: 9,
    })
    .unwrap()
}

/// `(relaxation optimum, best value of the exhaustive search)`.
///
/// The FIM depends on `Q = f1 f1^H + f2 f2^H` only, and for a given `Q` the
/// largest SINR a rank-one split reaches is `h^H Q h / sigma2_c`, attained by
/// `f1 = Q h / sqrt(h^H Q h)` with `f2` spanning the remainder. The search
/// runs over every `Q` with full trace on a grid, builds that explicit split
/// and keeps the splits that meet the SINR floor.
pub fn relaxation_vs_exhaustive_search(scn: &Scenario) -> (f64, f64) {
    let op = assemble_fim_operator(scn);
    let sol = solve(&build_problem(scn, &op), 1e-9);
    assert_eq!(sol.report.status, SolveStatus::Optimal);

    let h: CVec = scn.h_block(0, 0);
    let gamma = scn.config.gamma[0];
    let p = scn.config.power_budget[0];
    let noise = scn.config.sigma2_c;
    let c = |re: f64, im: f64| C64::new(re, im);
    let mut best = f64::INFINITY;
    let (na, nb, nphi) = (120, 60, 120);
    for ia in 0..=na {
        let a = ia as f64 / na as f64;
        let bmax = (a * (1.0 - a)).sqrt();
        for ib in 0..=nb {
            let b = bmax * ib as f64 / nb as f64;
            for ip in 0..nphi {
                let phi = 2.0 * std::f64::consts::PI * ip as f64 / nphi as f64;
                let off = c(b * phi.cos(), b * phi.sin()) * p;
                let q = CMat::from_row_slice(2, 2, &[c(a * p, 0.0), off, off.conj(), c((1.0 - a) * p, 0.0)]);
                let hq = linalg::quad_form(&h, &q);
                if hq <= 0.0 || hq / noise < gamma {
                    continue;
                }
                let f1 = &q * &h / c(hq.sqrt(), 0.0);
                let (vals, vecs) = linalg::hermitian_eig(&(&q - linalg::outer(&f1, &f1)));
                let f2: CVec = vecs.column(0) * c(vals[0].max(0.0).sqrt(), 0.0);
                let sinr = f1.dotc(&h).norm_sqr() / (f2.dotc(&h).norm_sqr() + noise);
                if sinr < gamma * (1.0 - 1e-12) {
                    continue;
                }
                let cov = linalg::outer(&f1, &f1) + linalg::outer(&f2, &f2);
                if let Ok(t) = op.evaluate_covariances(&[cov]).and_then(|j| trace_inverse(&j)) {
                    best = best.min(t);
                }
            }
        }
    }
    (sol.report.objective, best)
}
