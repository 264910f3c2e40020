//! Finite-difference reference for the Fisher information.
//!
//! Works directly on the noise-free echo model and never touches the
//! analytic operator in [`crate::fim`]. Each per-AP, per-stream transmit
//! covariance `W_{m,s} + R_m / S` is split into eigen-components; every
//! component is an independent deterministic excitation of one AP, so the
//! expectation over symbols and AN becomes a plain sum over components.

use nalgebra::DMatrix;

use crate::fim::{EtaLayout, Param};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::scenario::{steering_vector, Scenario};
use crate::sigmodel::LiftedVariables;

/// Unknowns in decoded form.
#[derive(Debug, Clone)]
struct Params {
    alpha: DMatrix<C64>,
    theta: Vec<f64>,
}

impl Params {
    fn nominal(scn: &Scenario) -> Self {
        Self {
            alpha: scn.alpha.clone(),
            theta: scn.theta.clone(),
        }
    }

    fn perturbed(&self, layout: EtaLayout, index: usize, delta: f64) -> Self {
        let mut p = self.clone();
        match layout.param(index) {
            Param::AlphaRe { rx, tx } => p.alpha[(rx, tx)].re += delta,
            Param::AlphaIm { rx, tx } => p.alpha[(rx, tx)].im += delta,
            Param::Theta(m) => p.theta[m] += delta,
        }
        p
    }
}

/// Stacked echo `[g_1; ...; g_M]` when only AP `tx` transmits `phi`.
fn echo(p: &Params, n: usize, tx: usize, phi: &CVec) -> CVec {
    let m = p.theta.len();
    let a_tx = steering_vector(p.theta[tx], n);
    let proj = a_tx.dotc(phi);
    let mut g = CVec::zeros(n * m);
    for rx in 0..m {
        let a_rx = steering_vector(p.theta[rx], n);
        g.rows_mut(rx * n, n).copy_from(&(a_rx * (p.alpha[(rx, tx)] * proj)));
    }
    g
}

/// FIM by central differences of the echo model, step `h`.
pub fn fim_finite_difference(scn: &Scenario, vars: &LiftedVariables, h: f64) -> DMatrix<f64> {
    let m = scn.num_aps();
    let n = scn.antennas();
    let s_count = vars.num_streams();
    let layout = EtaLayout::new(m);
    let d = layout.dim();
    let nominal = Params::nominal(scn);
    let plus: Vec<Params> = (0..d).map(|i| nominal.perturbed(layout, i, h)).collect();
    let minus: Vec<Params> = (0..d).map(|i| nominal.perturbed(layout, i, -h)).collect();

    let mut jm = DMatrix::<f64>::zeros(d, d);
    for s in 0..s_count {
        for tx in 0..m {
            let cov: CMat = vars.w_block(s, tx) + &vars.r[tx] * c(1.0 / s_count as f64);
            let (vals, vecs) = linalg::hermitian_eig(&cov);
            for (r, &lambda) in vals.iter().enumerate() {
                if lambda <= 0.0 {
                    continue;
                }
                let phi: CVec = vecs.column(r) * c(lambda.sqrt());
                let grads: Vec<CVec> = (0..d)
                    .map(|i| (echo(&plus[i], n, tx, &phi) - echo(&minus[i], n, tx, &phi)) / c(2.0 * h))
                    .collect();
                for i in 0..d {
                    for j in i..d {
                        let v = grads[i].dotc(&grads[j]).re;
                        jm[(i, j)] += v;
                        if i != j {
                            jm[(j, i)] += v;
                        }
                    }
                }
            }
        }
    }
    jm * (2.0 / scn.config.sigma2_s)
}

/// Relative Frobenius distance `||a - b|| / ||b||`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
