//! Fisher information of the multistatic radar observation as a linear
//! operator of the lifted transmit covariances.
//!
//! The noise-free echo at AP `m` for stream `s` is
//! `g_{m,s} = sum_{m'} alpha_{m'}^m a(theta_m) a(theta_{m'})^H phi_{m',s}`.
//! Differentiating with respect to any entry `i` of the parameter vector
//! gives `d_i g_{m,s} = sum_{m'} D^i_{m,m'} phi_{m',s}`, where every
//! `D^i_{m,m'}` is a combination of outer products `u v^H` with
//! `u in {a(theta_m), a'(theta_m)}` and `v in {a(theta_{m'}), a'(theta_{m'})}`.
//! Transmit signals of different APs and streams are uncorrelated, so
//!
//! ```text
//! E[(d_i g_s)^H d_j g_s] = sum_{m'} Tr( C^{ij}_{m'} (W_{m',s} + R_{m'}/S) ),
//! C^{ij}_{m'} = sum_m (D^i_{m,m'})^H D^j_{m,m'}.
//! ```
//!
//! Summing over streams, `J_ij = (2/sigma_s^2) sum_{m'} Re Tr(C^{ij}_{m'} Q_{m'})`
//! with `Q_{m'} = sum_s W_{m',s} + R_{m'}`. Each `C^{ij}_{m'}` lives in the span of
//! `V_{m'} = [a(theta_{m'}), a'(theta_{m'})]`, so it is stored as a 2x2 kernel
//! `K` with `C = V K V^H`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64, J};
use crate::scenario::{steering_derivative, steering_vector, Scenario};
use crate::sigmodel::LiftedVariables;

/// Positions of the unknowns inside the parameter vector
/// `[Re a_1^1, Im a_1^1, ..., Re a_M^M, Im a_M^M, theta_1, ..., theta_M]`.
/// Gains are ordered receive-major: `(rx, tx) = (0,0), (0,1), ..., (M-1,M-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EtaLayout {
    pub aps: usize,
}

/// Which unknown a parameter index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    AlphaRe { rx: usize, tx: usize },
    AlphaIm { rx: usize, tx: usize },
    Theta(usize),
}

impl EtaLayout {
    pub fn new(aps: usize) -> Self {
        Self { aps }
    }

    pub fn dim(&self) -> usize {
        2 * self.aps * self.aps + self.aps
    }

    pub fn alpha_re(&self, rx: usize, tx: usize) -> usize {
        2 * (rx * self.aps + tx)
    }

    pub fn alpha_im(&self, rx: usize, tx: usize) -> usize {
        self.alpha_re(rx, tx) + 1
    }

    pub fn theta(&self, m: usize) -> usize {
        2 * self.aps * self.aps + m
    }

    pub fn param(&self, index: usize) -> Param {
        let gains = 2 * self.aps * self.aps;
        if index >= gains {
            return Param::Theta(index - gains);
        }
        let pair = index / 2;
        let (rx, tx) = (pair / self.aps, pair % self.aps);
        if index % 2 == 0 {
            Param::AlphaRe { rx, tx }
        } else {
            Param::AlphaIm { rx, tx }
        }
    }

    /// Upper-triangle pairs `(i, j)`, `i <= j`, in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let d = self.dim();
        (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect()
    }
}

/// One outer-product term `coef * u v^H` of a derivative block, with `u`
/// chosen at the receiving AP and `v` at the transmitting AP (index 0 for
/// the steering vector, 1 for its derivative).
#[derive(Debug, Clone, Copy)]
struct DerivTerm {
    rx: usize,
    tx: usize,
    u: usize,
    v: usize,
    coef: C64,
}

fn derivative_terms(scn: &Scenario, param: Param) -> Vec<DerivTerm> {
    let m = scn.num_aps();
    match param {
        Param::AlphaRe { rx, tx } => vec![DerivTerm {
            rx,
            tx,
            u: 0,
            v: 0,
            coef: c(1.0),
        }],
        Param::AlphaIm { rx, tx } => vec![DerivTerm {
            rx,
            tx,
            u: 0,
            v: 0,
            coef: J,
        }],
        Param::Theta(p) => {
            let mut out = Vec::new();
            for rx in 0..m {
                for tx in 0..m {
                    let alpha = scn.alpha[(rx, tx)];
                    // receive side: d/dtheta_p a(theta_rx)
                    if rx == p {
                        out.push(DerivTerm {
                            rx,
                            tx,
                            u: 1,
                            v: 0,
                            coef: alpha,
                        });
                    }
                    // transmit side: d/dtheta_p a(theta_tx)^H
                    if tx == p {
                        out.push(DerivTerm {
                            rx,
                            tx,
                            u: 0,
                            v: 1,
                            coef: alpha,
                        });
                    }
                }
            }
            out
        }
    }
}

/// The Fisher information as a linear map of the per-AP transmit
/// covariances `Q_m = sum_s W_{m,s} + R_m`.
///
/// Stream covariances enter only through their diagonal `N x N` blocks and
/// every stream shares the same coefficients, so the coefficient of `W_s` is
/// the block-diagonal matrix `blkdiag_m(C^{ij}_m)` for every `s`, and the
/// coefficient of `R_m` is `C^{ij}_m`.
#[derive(Debug, Clone)]
pub struct FimOperator {
    pub layout: EtaLayout,
    /// `2 / sigma_s^2`.
    pub scale: f64,
    /// `V_m = [a(theta_m), a'(theta_m)]`, one `N x 2` frame per AP.
    pub frames: Vec<CMat>,
    /// `kernels[p][m]` is the Hermitian 2x2 kernel of upper-triangle pair `p`
    /// (see [`EtaLayout::pairs`]) on AP `m`.
    pub kernels: Vec<Vec<Matrix2<C64>>>,
    pairs: Vec<(usize, usize)>,
}

/// Build the operator for a scenario, using its nominal gains and angles.
pub fn assemble_fim_operator(scn: &Scenario) -> FimOperator {
    let m = scn.num_aps();
    let n = scn.antennas();
    let layout = EtaLayout::new(m);
    let frames: Vec<CMat> = (0..m)
        .map(|ap| {
            let mut v = CMat::zeros(n, 2);
            v.set_column(0, &steering_vector(scn.theta[ap], n));
            v.set_column(1, &steering_derivative(scn.theta[ap], n));
            v
        })
        .collect();
    // receive-side Gram matrices [a, a']^H [a, a']
    let grams: Vec<Matrix2<C64>> = frames
        .iter()
        .map(|v| {
            let g = v.adjoint() * v;
            Matrix2::new(g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)])
        })
        .collect();

    let terms: Vec<Vec<DerivTerm>> = (0..layout.dim())
        .map(|i| derivative_terms(scn, layout.param(i)))
        .collect();
    let pairs = layout.pairs();
    let kernels = pairs
        .iter()
        .map(|&(i, j)| {
            let mut per_ap = vec![Matrix2::<C64>::zeros(); m];
            for ti in &terms[i] {
                for tj in terms[j].iter().filter(|t| t.rx == ti.rx && t.tx == ti.tx) {
                    per_ap[ti.tx][(ti.v, tj.v)] += ti.coef.conj() * tj.coef * grams[ti.rx][(ti.u, tj.u)];
                }
            }
            for k in per_ap.iter_mut() {
                *k = (*k + k.adjoint()) * c(0.5);
            }
            per_ap
        })
        .collect();

    FimOperator {
        layout,
        scale: 2.0 / scn.config.sigma2_s,
        frames,
        kernels,
        pairs,
    }
}

impl FimOperator {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn antennas(&self) -> usize {
        self.frames[0].nrows()
    }

    /// Dense coefficient `C^{ij}_m = V_m K V_m^H` (without the `2/sigma^2` scale).
    pub fn coefficient(&self, i: usize, j: usize, m: usize) -> CMat {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let p = self.pair_index(a, b);
        let k = &self.kernels[p][m];
        let kd = CMat::from_fn(2, 2, |r, s| k[(r, s)]);
        &self.frames[m] * kd * self.frames[m].adjoint()
    }

    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        let d = self.dim();
        debug_assert!(i <= j && j < d);
        // row i of the row-major upper triangle starts at i*d - i(i-1)/2
        i * d - (i * i.saturating_sub(1)) / 2 + j - i
    }

    /// Evaluate the FIM at per-AP transmit covariances.
    pub fn evaluate_covariances(&self, q: &[CMat]) -> Result<DMatrix<f64>> {
        if q.len() != self.frames.len() {
            return Err(Error::Dimension(format!(
                "expected {} AP covariances, got {}",
                self.frames.len(),
                q.len()
            )));
        }
        let compressed: Vec<Matrix2<C64>> = q
            .iter()
            .zip(&self.frames)
            .map(|(qm, v)| {
                let g = v.adjoint() * qm * v;
                Matrix2::new(g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)])
            })
            .collect();
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            let v: f64 = self.kernels[p]
                .iter()
                .zip(&compressed)
                .map(|(k, g)| (k * g).trace().re)
                .sum::<f64>()
                * self.scale;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
        Ok(out)
    }

    pub fn evaluate(&self, vars: &LiftedVariables) -> Result<DMatrix<f64>> {
        if vars.num_aps() != self.frames.len() || vars.antennas() != self.antennas() {
            return Err(Error::Dimension("lifted variables do not match FIM operator".into()));
        }
        let q: Vec<CMat> = (0..vars.num_aps()).map(|m| vars.ap_covariance(m)).collect();
        self.evaluate_covariances(&q)
    }

    /// Dump every dense coefficient as CSV rows `i,j,ap,row,col,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# scale={}", self.scale)?;
        writeln!(w, "i,j,ap,row,col,re,im")?;
        for &(i, j) in &self.pairs {
            for m in 0..self.frames.len() {
                let cm = self.coefficient(i, j, m);
                for r in 0..cm.nrows() {
                    for s in 0..cm.ncols() {
                        let z = cm[(r, s)];
                        writeln!(w, "{i},{j},{m},{r},{s},{:e},{:e}", z.re, z.im)?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn evaluate_fim(op: &FimOperator, vars: &LiftedVariables) -> Result<DMatrix<f64>> {
    op.evaluate(vars)
}

fn singular(j: &DMatrix<f64>) -> Error {
    let eig = SymmetricEigen::new(j.clone()).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = j.nrows() as f64 * f64::EPSILON * max.max(f64::MIN_POSITIVE);
    let deficiency = eig.iter().filter(|&&v| v <= tol).count().max(1);
    Error::SingularFim {
        deficiency,
        dim: j.nrows(),
    }
}

/// Inverse of a symmetric positive-definite FIM; fails explicitly when the
/// matrix is singular or numerically indefinite.
pub fn invert_fim(j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (j + j.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone()).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= sym.nrows() as f64 * f64::EPSILON * max {
        return Err(singular(&sym));
    }
    let chol = nalgebra::Cholesky::new(sym.clone()).ok_or_else(|| singular(&sym))?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

pub fn trace_inverse(j: &DMatrix<f64>) -> Result<f64> {
    Ok(invert_fim(j)?.trace())
}

/// Angle CRBs in degrees from a FIM.
pub fn crb_from_fim(j: &DMatrix<f64>, layout: EtaLayout) -> Result<Vec<f64>> {
    let inv = invert_fim(j)?;
    Ok((0..layout.aps)
        .map(|m| {
            let idx = layout.theta(m);
            inv[(idx, idx)].max(0.0).sqrt() * 180.0 / PI
        })
        .collect())
}

/// `CRB_theta_m = sqrt([J^-1]_{theta_m})`, converted to degrees.
pub fn crb_theta(op: &FimOperator, vars: &LiftedVariables) -> Result<Vec<f64>> {
    crb_from_fim(&op.evaluate(vars)?, op.layout)
}

/// Reciprocal condition number `lambda_min / lambda_max` of a symmetric matrix.
pub fn reciprocal_condition(j: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new((j + j.transpose()) * 0.5).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::scenario::{build_scenario, Proximity, ScenarioFile};

    fn scenario(aps: usize, n: usize) -> Scenario {
        let mut f = ScenarioFile::paper_layout(9);
        f.antennas = n;
        f.ap_positions.truncate(aps);
        f.ues = crate::scenario::UePlacement::random(2);
        build_scenario(f.resolve(0, Proximity::Distant).unwrap()).unwrap()
    }

    #[test]
    fn layout_indexing_is_bijective() {
        let l = EtaLayout::new(3);
        assert_eq!(l.dim(), 21);
        let mut seen = vec![false; l.dim()];
        for rx in 0..3 {
            for tx in 0..3 {
                for idx in [l.alpha_re(rx, tx), l.alpha_im(rx, tx)] {
                    assert!(!seen[idx]);
                    seen[idx] = true;
                }
                assert_eq!(l.param(l.alpha_re(rx, tx)), Param::AlphaRe { rx, tx });
                assert_eq!(l.param(l.alpha_im(rx, tx)), Param::AlphaIm { rx, tx });
            }
        }
        for m in 0..3 {
            assert_eq!(l.theta(m), 18 + m);
            assert_eq!(l.param(l.theta(m)), Param::Theta(m));
        }
    }

    #[test]
    fn pair_index_matches_enumeration() {
        let op = assemble_fim_operator(&scenario(2, 4));
        for (p, &(i, j)) in op.pairs().iter().enumerate() {
            assert_eq!(op.pair_index(i, j), p);
        }
    }

    #[test]
    fn zero_input_gives_zero_fim() {
        let scn = scenario(2, 4);
        let op = assemble_fim_operator(&scn);
        let vars = LiftedVariables::zeros(4, 2, scn.num_streams());
        assert!(op.evaluate(&vars).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_ap_gain_entry_matches_closed_form() {
        let scn = scenario(1, 5);
        let op = assemble_fim_operator(&scn);
        let a = scn.target_steering(0);
        let u = linalg::embed_block(&crate::scenario::steering_vector(0.3, 5), 0, 1);
        let mut vars = LiftedVariables::zeros(5, 1, scn.num_streams());
        vars.w[0] = linalg::outer(&u, &u);
        vars.w[1] = linalg::outer(&a, &a) * c(0.2);
        vars.r[0] = CMat::identity(5, 5) * c(0.1);
        let jm = op.evaluate(&vars).unwrap();
        let s = scn.num_streams() as f64;
        let mut expected = 0.0;
        for st in 0..scn.num_streams() {
            let per = vars.w_block(st, 0) + &vars.r[0] * c(1.0 / s);
            expected += 5.0 * linalg::quad_form(&a, &per);
        }
        expected *= 2.0 / scn.config.sigma2_s;
        let idx = op.layout.alpha_re(0, 0);
        assert!((jm[(idx, idx)] - expected).abs() < 1e-10 * expected);
        // the imaginary part carries the same information and is uncoupled
        let im = op.layout.alpha_im(0, 0);
        assert!((jm[(im, im)] - expected).abs() < 1e-10 * expected);
        assert!(jm[(idx, im)].abs() < 1e-10 * expected);
    }

    #[test]
    fn crb_of_synthetic_matrices() {
        let layout = EtaLayout::new(2);
        let crb = crb_from_fim(&DMatrix::identity(10, 10), layout).unwrap();
        for v in crb {
            assert!((v - 57.295_779_513_082_32).abs() < 1e-9);
        }
        let mut jm = DMatrix::identity(10, 10);
        jm[(8, 8)] = 4.0;
        jm[(9, 9)] = 25.0;
        let crb = crb_from_fim(&jm, layout).unwrap();
        assert!((crb[0] - 0.5f64.to_degrees()).abs() < 1e-12);
        assert!((crb[1] - 0.2f64.to_degrees()).abs() < 1e-12);
    }

    #[test]
    fn singular_fim_is_reported() {
        let mut jm = DMatrix::identity(10, 10);
        jm[(3, 3)] = 0.0;
        jm[(9, 9)] = 0.0;
        match crb_from_fim(&jm, EtaLayout::new(2)) {
            Err(Error::SingularFim { deficiency, dim }) => {
                assert_eq!(deficiency, 2);
                assert_eq!(dim, 10);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn halving_noise_doubles_information() {
        let scn = scenario(2, 4);
        let mut scn2 = scn.clone();
        scn2.config.sigma2_s *= 2.0;
        let mut vars = LiftedVariables::zeros(4, 2, scn.num_streams());
        vars.r[0] = CMat::identity(4, 4);
        vars.r[1] = CMat::identity(4, 4) * c(0.5);
        let a = assemble_fim_operator(&scn).evaluate(&vars).unwrap();
        let b = assemble_fim_operator(&scn2).evaluate(&vars).unwrap();
        assert!((a - b * 2.0).abs().max() < 1e-12);
    }

    #[test]
    fn csv_dump_has_one_row_per_entry() {
        let scn = scenario(1, 3);
        let op = assemble_fim_operator(&scn);
        let mut buf = Vec::new();
        op.write_csv(&mut buf).unwrap();
        let lines = String::from_utf8(buf).unwrap().lines().count();
        assert_eq!(lines, 2 + op.pairs().len() * 9);
    }
}
