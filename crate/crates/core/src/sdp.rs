//! The relaxed waveform design problem as a conic program.
//!
//! Decision variables are the stream covariances `W_s` (one `NM x NM` block
//! per stream), the AN covariances `R_m` (one `N x N` block per AP), and one
//! `(d+1) x (d+1)` Schur block per FIM dimension `d = 2M^2 + M`:
//!
//! ```text
//! Z_i = [ J   e_i ]  >= 0   <=>   t_i >= [J^-1]_ii   (for J > 0)
//!       [ e_i' t_i ]
//! ```
//!
//! so minimizing `sum_i t_i` minimizes `Tr(J^-1)`. The epigraph values `t_i`
//! are the bottom-right entries of the Schur blocks. Only the first Schur
//! block is tied to the FIM operator; the others copy its leading `d x d`
//! part. Internally the FIM is expressed in a diagonally rescaled basis
//! `D J D`, where `D` normalizes the FIM of an isotropic full-power
//! transmission to a unit diagonal; the objective weights undo the scaling so
//! the reported `t_i` refer to the unscaled FIM.
//!
//! SINR, Eve-SNR and power constraints are inequalities with explicit
//! nonnegative slacks collected in a single orthant block.

use std::time::Duration;

use nalgebra::Matrix2;

use crate::fim::{assemble_fim_operator, FimOperator};
use crate::linalg::{c, CMat, C64};
use crate::scenario::Scenario;
use crate::sigmodel::LiftedVariables;
use crate::solver::{
    self, Block, BlockValue, Coef, ConicBackend, ConicProblem, ConicSolution, ConicStatus, InteriorPoint,
    SolverSettings, Term,
};

/// Stopping tolerance for a given array size: `1e-8` for `N <= 8`, `1e-6` above.
pub fn default_tolerance(antennas: usize) -> f64 {
    if antennas <= 8 {
        1e-8
    } else {
        1e-6
    }
}

/// Constraint families that can be included in a problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Families {
    fim: bool,
    sinr: bool,
    snr: bool,
}

impl Families {
    const ALL: Self = Self {
        fim: true,
        sinr: true,
        snr: true,
    };
}

/// Where each inequality's slack lives in the orthant block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlackLayout {
    pub sinr: Vec<usize>,
    pub snr: Option<usize>,
    pub power: Vec<usize>,
}

/// A design problem built for one scenario.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    pub conic: ConicProblem,
    pub fim: FimOperator,
    pub w_blocks: Vec<usize>,
    pub r_blocks: Vec<usize>,
    pub schur_blocks: Vec<usize>,
    pub slack_block: usize,
    pub slacks: SlackLayout,
    /// Diagonal of the FIM rescaling `D`.
    pub fim_scaling: Vec<f64>,
    antennas: usize,
    aps: usize,
}

fn kernel(k: &Matrix2<C64>, scale: f64) -> CMat {
    CMat::from_fn(2, 2, |r, s| k[(r, s)] * scale)
}

fn term(block: usize, coef: Coef) -> Term {
    Term { block, coef }
}

fn slack(block: usize, index: usize, value: f64) -> Term {
    term(block, Coef::Diag { index, value })
}

/// Build the relaxed design problem for `scn` with FIM operator `fim_op`.
pub fn build_problem(scn: &Scenario, fim_op: &FimOperator) -> DesignProblem {
    assemble(scn, fim_op, Families::ALL)
}

/// Convenience wrapper that assembles the FIM operator as well.
pub fn build_problem_for(scn: &Scenario) -> DesignProblem {
    build_problem(scn, &assemble_fim_operator(scn))
}

fn isotropic_scaling(scn: &Scenario, fim_op: &FimOperator) -> Vec<f64> {
    let n = scn.antennas();
    let q: Vec<CMat> = scn
        .config
        .power_budget
        .iter()
        .map(|&p| CMat::identity(n, n) * c(p / n as f64))
        .collect();
    let jref = fim_op
        .evaluate_covariances(&q)
        .expect("operator and scenario have matching AP counts");
    (0..fim_op.dim())
        .map(|i| {
            let v = jref[(i, i)];
            if v > 0.0 && v.is_finite() {
                1.0 / v.sqrt()
            } else {
                1.0
            }
        })
        .collect()
}

fn assemble(scn: &Scenario, fim_op: &FimOperator, fam: Families) -> DesignProblem {
    let n = scn.antennas();
    let m_aps = scn.num_aps();
    let k_ues = scn.num_ues();
    let s_count = scn.num_streams();
    let nm = n * m_aps;
    let d = fim_op.dim();
    let gamma = &scn.config.gamma;
    let psi = scn.config.psi;
    let mut p = ConicProblem::default();

    // W_s blocks, all sharing the same frame list
    let mut w_template = Block::hermitian("", nm);
    let w_v: Vec<usize> = (0..m_aps)
        .map(|m| {
            let mut u = CMat::zeros(nm, 2);
            u.view_mut((m * n, 0), (n, 2)).copy_from(&fim_op.frames[m]);
            w_template.add_frame(u)
        })
        .collect();
    let w_h: Vec<usize> = scn.h.iter().map(|h| w_template.add_vector_frame(h)).collect();
    let w_e: Vec<usize> = (0..m_aps)
        .map(|m| {
            let mut u = CMat::zeros(nm, n);
            u.view_mut((m * n, 0), (n, n)).fill_with_identity();
            w_template.add_frame(u)
        })
        .collect();
    let w_blocks: Vec<usize> = (0..s_count)
        .map(|s| {
            let mut b = w_template.clone();
            b.name = format!("W{}", s + 1);
            p.add_block(b)
        })
        .collect();

    // R_m blocks
    let mut r_v = 0;
    let mut r_h = Vec::new();
    let mut r_e = 0;
    let r_blocks: Vec<usize> = (0..m_aps)
        .map(|m| {
            let mut b = Block::hermitian(format!("R{}", m + 1), n);
            r_v = b.add_frame(fim_op.frames[m].clone());
            r_h = (0..k_ues).map(|k| b.add_vector_frame(&scn.h_block(m, k))).collect();
            r_e = b.add_frame(CMat::identity(n, n));
            p.add_block(b)
        })
        .collect();

    // Schur blocks
    let mut schur_blocks = Vec::new();
    let mut unit_first = 0;
    if fam.fim {
        for i in 0..d {
            let mut b = Block::hermitian(format!("Z{}", i + 1), d + 1);
            unit_first = b.add_unit_frames();
            schur_blocks.push(p.add_block(b));
        }
    }

    // slacks
    let mut next = 0;
    let mut take = |on: bool| {
        on.then(|| {
            next += 1;
            next - 1
        })
    };
    let sinr_slacks: Vec<usize> = (0..k_ues).filter_map(|_| take(fam.sinr)).collect();
    let snr_slack = take(fam.snr);
    let power_slacks: Vec<usize> = (0..m_aps).filter_map(|_| take(true)).collect();
    let slack_block = p.add_block(Block::nonneg("slack", next));

    let fim_scaling = if fam.fim {
        isotropic_scaling(scn, fim_op)
    } else {
        vec![1.0; d]
    };

    if fam.fim {
        let z1 = schur_blocks[0];
        // Z_1[i,j] = (D J D)_ij
        for (pi, &(i, j)) in fim_op.pairs().iter().enumerate() {
            let sc = fim_op.scale * fim_scaling[i] * fim_scaling[j];
            let mut terms = vec![term(z1, Coef::entry(unit_first, i, j, 1.0))];
            for m in 0..m_aps {
                let km = &fim_op.kernels[pi][m];
                if km.iter().all(|z| z.norm() == 0.0) {
                    continue;
                }
                let kk = kernel(km, -sc);
                for &wb in &w_blocks {
                    terms.push(term(
                        wb,
                        Coef::Frame {
                            frame: w_v[m],
                            kernel: kk.clone(),
                        },
                    ));
                }
                terms.push(term(
                    r_blocks[m],
                    Coef::Frame {
                        frame: r_v,
                        kernel: kk,
                    },
                ));
            }
            p.add_constraint(format!("fim[{i},{j}]"), terms, 0.0);
        }
        for (bi, &zb) in schur_blocks.iter().enumerate().skip(1) {
            for &(i, j) in fim_op.pairs() {
                p.add_constraint(
                    format!("copy{}[{i},{j}]", bi + 1),
                    vec![
                        term(zb, Coef::entry(unit_first, i, j, 1.0)),
                        term(z1, Coef::entry(unit_first, i, j, -1.0)),
                    ],
                    0.0,
                );
            }
        }
        for (bi, &zb) in schur_blocks.iter().enumerate() {
            for r in 0..d {
                p.add_constraint(
                    format!("unit{}[{r}]", bi + 1),
                    vec![term(zb, Coef::entry(unit_first, r, d, 1.0))],
                    if r == bi { 1.0 } else { 0.0 },
                );
            }
            p.objective.push(term(
                zb,
                Coef::entry(unit_first, d, d, fim_scaling[bi] * fim_scaling[bi]),
            ));
        }
    } else {
        // minimum total power
        for &wb in &w_blocks {
            for &f in &w_e {
                p.objective.push(term(
                    wb,
                    Coef::Frame {
                        frame: f,
                        kernel: CMat::identity(n, n),
                    },
                ));
            }
        }
        for &rb in &r_blocks {
            p.objective.push(term(
                rb,
                Coef::Frame {
                    frame: r_e,
                    kernel: CMat::identity(n, n),
                },
            ));
        }
    }

    if fam.sinr {
        for k in 0..k_ues {
            let mut terms: Vec<Term> = w_blocks
                .iter()
                .enumerate()
                .map(|(s, &wb)| term(wb, Coef::scalar_frame(w_h[k], if s == k { 1.0 } else { -gamma[k] })))
                .collect();
            for &rb in &r_blocks {
                terms.push(term(rb, Coef::scalar_frame(r_h[k], -gamma[k])));
            }
            terms.push(slack(slack_block, sinr_slacks[k], -1.0));
            p.add_constraint(format!("sinr{}", k + 1), terms, gamma[k] * scn.config.sigma2_c);
        }
    }

    if fam.snr {
        let mut terms = Vec::new();
        for m in 0..m_aps {
            let d2 = scn.monostatic_delta2(m);
            let sel = |v: f64| CMat::from_fn(2, 2, |r, s| if r == 0 && s == 0 { c(v) } else { c(0.0) });
            for &wb in &w_blocks {
                terms.push(term(
                    wb,
                    Coef::Frame {
                        frame: w_v[m],
                        kernel: sel(d2),
                    },
                ));
            }
            terms.push(term(
                r_blocks[m],
                Coef::Frame {
                    frame: r_v,
                    kernel: sel(-psi * d2),
                },
            ));
        }
        terms.push(slack(slack_block, snr_slack.expect("slack allocated"), 1.0));
        p.add_constraint("snr_eve", terms, psi * scn.config.sigma2_s);
    }

    for m in 0..m_aps {
        let mut terms: Vec<Term> = w_blocks
            .iter()
            .map(|&wb| {
                term(
                    wb,
                    Coef::Frame {
                        frame: w_e[m],
                        kernel: CMat::identity(n, n),
                    },
                )
            })
            .collect();
        terms.push(term(
            r_blocks[m],
            Coef::Frame {
                frame: r_e,
                kernel: CMat::identity(n, n),
            },
        ));
        terms.push(slack(slack_block, power_slacks[m], 1.0));
        p.add_constraint(format!("power{}", m + 1), terms, scn.config.power_budget[m]);
    }

    DesignProblem {
        conic: p,
        fim: fim_op.clone(),
        w_blocks,
        r_blocks,
        schur_blocks,
        slack_block,
        slacks: SlackLayout {
            sinr: sinr_slacks,
            snr: snr_slack,
            power: power_slacks,
        },
        fim_scaling,
        antennas: n,
        aps: m_aps,
    }
}

impl DesignProblem {
    pub fn num_sinr_constraints(&self) -> usize {
        self.slacks.sinr.len()
    }

    pub fn dim(&self) -> usize {
        self.fim.dim()
    }

    /// Export in SDPA sparse format for cross-checking with external solvers.
    pub fn write_sdpa(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        solver::write_sdpa(&self.conic, out)
    }

    fn lifted(&self, x: &[BlockValue]) -> LiftedVariables {
        let w = self.w_blocks.iter().map(|&b| x[b].as_hermitian().clone()).collect();
        let r = self.r_blocks.iter().map(|&b| x[b].as_hermitian().clone()).collect();
        LiftedVariables::new(w, r).expect("block shapes come from the builder")
    }

    /// Unscaled epigraph values `t_i`.
    fn epigraph(&self, x: &[BlockValue]) -> Vec<f64> {
        let d = self.dim();
        self.schur_blocks
            .iter()
            .enumerate()
            .map(|(i, &b)| x[b].as_hermitian()[(d, d)].re * self.fim_scaling[i] * self.fim_scaling[i])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Infeasible => "infeasible",
            Self::NumericalFailure => "numerical_failure",
        }
    }
}

/// Slack of one inequality at the returned point (nonnegative when satisfied).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintActivity {
    pub name: String,
    pub slack: f64,
}

/// First constraint family that turns the problem infeasible when families
/// are added one at a time: power, then SINR, then Eve SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailingFamily {
    Power,
    Sinr,
    EveSnr,
    /// Every staged probe is feasible; the full problem failed for another reason.
    None,
}

impl FailingFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Power => "power",
            Self::Sinr => "sinr",
            Self::EveSnr => "eve_snr",
            Self::None => "none",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// `sum_i t_i`.
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub max_primal_residual: f64,
    pub relative_gap: f64,
    pub activity: Vec<ConstraintActivity>,
    pub wall_time: Duration,
    pub message: String,
    pub diagnosis: Option<FailingFamily>,
}

/// Solution of a design problem.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub vars: LiftedVariables,
    /// Epigraph values `t_i`, `sum_i t_i >= Tr(J^-1)`.
    pub epigraph: Vec<f64>,
    pub report: SolveReport,
}

fn settings_for(tol: f64) -> SolverSettings {
    SolverSettings {
        tolerance: tol,
        ..SolverSettings::default()
    }
}

fn status_of(sol: &ConicSolution) -> SolveStatus {
    match sol.status {
        ConicStatus::Optimal => SolveStatus::Optimal,
        ConicStatus::PrimalInfeasible => SolveStatus::Infeasible,
        ConicStatus::NumericalFailure => SolveStatus::NumericalFailure,
    }
}

/// Solve with the default interior-point backend.
pub fn solve(problem: &DesignProblem, tol: f64) -> SdpSolution {
    solve_with(problem, tol, &InteriorPoint)
}

pub fn solve_with(problem: &DesignProblem, tol: f64, backend: &dyn ConicBackend) -> SdpSolution {
    let sol = backend.solve(&problem.conic, &settings_for(tol));
    let status = status_of(&sol);
    let vars = problem.lifted(&sol.x);
    let epigraph = problem.epigraph(&sol.x);
    let slacks = sol.x[problem.slack_block].as_nonneg();
    let mut activity = Vec::new();
    for (k, &i) in problem.slacks.sinr.iter().enumerate() {
        activity.push(ConstraintActivity {
            name: format!("sinr{}", k + 1),
            slack: slacks[i],
        });
    }
    if let Some(i) = problem.slacks.snr {
        activity.push(ConstraintActivity {
            name: "snr_eve".into(),
            slack: slacks[i],
        });
    }
    for (m, &i) in problem.slacks.power.iter().enumerate() {
        activity.push(ConstraintActivity {
            name: format!("power{}", m + 1),
            slack: slacks[i],
        });
    }
    SdpSolution {
        vars,
        report: SolveReport {
            status,
            objective: epigraph.iter().sum(),
            dual_objective: sol.dual_objective,
            iterations: sol.iterations,
            max_primal_residual: sol.max_primal_residual,
            relative_gap: sol.relative_gap,
            activity,
            wall_time: sol.wall_time,
            message: sol.message,
            diagnosis: None,
        },
        epigraph,
    }
}

/// Staged feasibility probe: power only, then with SINR floors, then with
/// the Eve-SNR ceiling, each with a minimum-power objective.
pub fn diagnose_infeasibility(scn: &Scenario, fim_op: &FimOperator, tol: f64) -> FailingFamily {
    let stages = [
        (
            FailingFamily::Power,
            Families {
                fim: false,
                sinr: false,
                snr: false,
            },
        ),
        (
            FailingFamily::Sinr,
            Families {
                fim: false,
                sinr: true,
                snr: false,
            },
        ),
        (
            FailingFamily::EveSnr,
            Families {
                fim: false,
                sinr: true,
                snr: true,
            },
        ),
    ];
    for (family, fam) in stages {
        let probe = assemble(scn, fim_op, fam);
        let sol = InteriorPoint.solve(&probe.conic, &settings_for(tol));
        if sol.status == ConicStatus::PrimalInfeasible {
            return family;
        }
    }
    FailingFamily::None
}

/// Build, solve, and run the staged diagnosis when the solve reports
/// infeasibility.
pub fn solve_scenario(scn: &Scenario, tol: f64) -> (DesignProblem, SdpSolution) {
    let problem = build_problem_for(scn);
    let mut sol = solve(&problem, tol);
    if sol.report.status == SolveStatus::Infeasible {
        sol.report.diagnosis = Some(diagnose_infeasibility(scn, &problem.fim, tol));
    }
    (problem, sol)
}

/// Shape summary `(antennas, aps)` of the problem.
impl DesignProblem {
    pub fn shape(&self) -> (usize, usize) {
        (self.antennas, self.aps)
    }
}
