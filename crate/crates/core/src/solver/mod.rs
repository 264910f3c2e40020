//! Standard-form conic programs over Hermitian PSD blocks and a nonnegative
//! orthant, plus a primal-dual interior-point backend.
//!
//! The primal problem is
//!
//! ```text
//! minimize    <C, X>
//! subject to  <A_i, X> = b_i,   i = 1..m
//!             X_b >= 0 (PSD, or elementwise for orthant blocks)
//! ```
//!
//! with `<A, X> = Re Tr(A X)` on Hermitian blocks. Coefficient matrices are
//! stored in factored form: each Hermitian block owns a list of *frames*
//! (tall matrices `U`) and every coefficient is a sum of `U_l K U_r^H` terms
//! with small kernels `K`. Low-rank steering and channel outer products, and
//! sparse entries (frames of unit vectors), both fit this shape, which keeps
//! the Schur-complement assembly cheap for large blocks.

mod export;
mod ipm;

pub use export::write_sdpa;
pub use ipm::InteriorPoint;

use std::time::Duration;

use crate::linalg::{CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Hermitian positive semidefinite `size x size` matrix.
    Hermitian,
    /// `size` nonnegative scalars.
    Nonneg,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub name: String,
    pub kind: BlockKind,
    pub size: usize,
    /// Column groups referenced by coefficients (Hermitian blocks only).
    pub frames: Vec<CMat>,
}

impl Block {
    pub fn hermitian(name: impl Into<String>, size: usize) -> Self {
        Self {
            name: name.into(),
            kind: BlockKind::Hermitian,
            size,
            frames: Vec::new(),
        }
    }

    pub fn nonneg(name: impl Into<String>, size: usize) -> Self {
        Self {
            name: name.into(),
            kind: BlockKind::Nonneg,
            size,
            frames: Vec::new(),
        }
    }

    /// Register a frame and return its index.
    pub fn add_frame(&mut self, u: CMat) -> usize {
        assert_eq!(self.kind, BlockKind::Hermitian, "frames belong to Hermitian blocks");
        assert_eq!(u.nrows(), self.size, "frame height must match block size");
        self.frames.push(u);
        self.frames.len() - 1
    }

    pub fn add_vector_frame(&mut self, v: &CVec) -> usize {
        self.add_frame(CMat::from_column_slice(v.len(), 1, v.as_slice()))
    }

    /// Register unit-vector frames `e_0 .. e_{size-1}`; returns the first index.
    pub fn add_unit_frames(&mut self) -> usize {
        let first = self.frames.len();
        for i in 0..self.size {
            let mut u = CMat::zeros(self.size, 1);
            u[(i, 0)] = C64::new(1.0, 0.0);
            self.frames.push(u);
        }
        first
    }
}

/// One coefficient term on a block.
#[derive(Debug, Clone)]
pub enum Coef {
    /// `U_f K U_f^H` with Hermitian `K`.
    Frame { frame: usize, kernel: CMat },
    /// Hermitian part of `U_l K U_r^H`.
    Cross { left: usize, right: usize, kernel: CMat },
    /// Scalar weight on entry `index` of an orthant block.
    Diag { index: usize, value: f64 },
}

impl Coef {
    pub fn scalar_frame(frame: usize, value: f64) -> Self {
        Self::Frame {
            frame,
            kernel: CMat::from_element(1, 1, C64::new(value, 0.0)),
        }
    }

    /// Symmetric unit entry `(p, q)` of a block with unit frames starting at
    /// `first`: selects `Re X_pq`.
    pub fn entry(first: usize, p: usize, q: usize, value: f64) -> Self {
        if p == q {
            Self::scalar_frame(first + p, value)
        } else {
            Self::Cross {
                left: first + p,
                right: first + q,
                kernel: CMat::from_element(1, 1, C64::new(value, 0.0)),
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Term {
    pub block: usize,
    pub coef: Coef,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<Term>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    pub blocks: Vec<Block>,
    pub objective: Vec<Term>,
    pub constraints: Vec<Constraint>,
}

impl ConicProblem {
    pub fn add_block(&mut self, block: Block) -> usize {
        self.blocks.push(block);
        self.blocks.len() - 1
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, terms: Vec<Term>, rhs: f64) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn constraint_index(&self, name: &str) -> Option<usize> {
        self.constraints.iter().position(|c| c.name == name)
    }

    /// Check that every term references a declared block and frame with
    /// consistent kernel shapes.
    pub fn validate(&self) -> Result<(), String> {
        let check = |t: &Term, ctx: &str| -> Result<(), String> {
            let b = self
                .blocks
                .get(t.block)
                .ok_or_else(|| format!("{ctx}: unknown block {}", t.block))?;
            let frame_cols = |f: usize| -> Result<usize, String> {
                b.frames
                    .get(f)
                    .map(|u| u.ncols())
                    .ok_or_else(|| format!("{ctx}: unknown frame {f} on block {}", b.name))
            };
            match (&t.coef, b.kind) {
                (Coef::Frame { frame, kernel }, BlockKind::Hermitian) => {
                    let r = frame_cols(*frame)?;
                    if kernel.shape() != (r, r) {
                        return Err(format!("{ctx}: kernel shape mismatch on {}", b.name));
                    }
                }
                (Coef::Cross { left, right, kernel }, BlockKind::Hermitian) => {
                    if kernel.shape() != (frame_cols(*left)?, frame_cols(*right)?) {
                        return Err(format!("{ctx}: kernel shape mismatch on {}", b.name));
                    }
                }
                (Coef::Diag { index, .. }, BlockKind::Nonneg) => {
                    if *index >= b.size {
                        return Err(format!("{ctx}: index {index} out of range on {}", b.name));
                    }
                }
                _ => return Err(format!("{ctx}: coefficient kind does not match block {}", b.name)),
            }
            Ok(())
        };
        for t in &self.objective {
            check(t, "objective")?;
        }
        for c in &self.constraints {
            for t in &c.terms {
                check(t, &c.name)?;
            }
        }
        Ok(())
    }

    pub fn num_variables(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Hermitian => b.size * b.size,
                BlockKind::Nonneg => b.size,
            })
            .sum()
    }
}

/// Value of one block in a solution.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockValue {
    Hermitian(CMat),
    Nonneg(Vec<f64>),
}

impl BlockValue {
    pub fn as_hermitian(&self) -> &CMat {
        match self {
            Self::Hermitian(m) => m,
            Self::Nonneg(_) => panic!("block is an orthant block"),
        }
    }

    pub fn as_nonneg(&self) -> &[f64] {
        match self {
            Self::Nonneg(v) => v,
            Self::Hermitian(_) => panic!("block is a Hermitian block"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    PrimalInfeasible,
    /// No convergence, stalled progress, or a breakdown in the linear algebra.
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: ConicStatus,
    pub x: Vec<BlockValue>,
    pub z: Vec<BlockValue>,
    pub y: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `max_i |<A_i, X> - b_i|` in the original scaling.
    pub max_primal_residual: f64,
    /// Relative primal infeasibility, dual infeasibility and gap at exit.
    pub relative_primal_infeasibility: f64,
    pub relative_dual_infeasibility: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub wall_time: Duration,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stopping tolerance on relative gap and relative infeasibilities.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Threshold for accepting a primal-infeasibility certificate.
    pub infeasibility_tolerance: f64,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 120,
            infeasibility_tolerance: 1e-8,
            verbose: false,
        }
    }
}

/// A solver that accepts [`ConicProblem`]s.
pub trait ConicBackend {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &ConicProblem, settings: &SolverSettings) -> ConicSolution;
}

/// Independent re-check of a returned solution straight from the problem
/// data: residuals evaluated through the frames, cone membership through
/// eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub max_primal_residual: f64,
    pub min_primal_eigenvalue: f64,
    pub min_dual_eigenvalue: f64,
    pub max_dual_residual: f64,
    pub duality_gap: f64,
}

/// `<A, X>` for one constraint or objective term list.
pub fn apply_terms(problem: &ConicProblem, terms: &[Term], x: &[BlockValue]) -> f64 {
    terms
        .iter()
        .map(|t| {
            let b = &problem.blocks[t.block];
            match (&t.coef, &x[t.block]) {
                (Coef::Frame { frame, kernel }, BlockValue::Hermitian(xm)) => {
                    let u = &b.frames[*frame];
                    crate::linalg::re_trace_product(kernel, &(u.adjoint() * xm * u))
                }
                (Coef::Cross { left, right, kernel }, BlockValue::Hermitian(xm)) => {
                    let (ul, ur) = (&b.frames[*left], &b.frames[*right]);
                    crate::linalg::re_trace_product(kernel, &(ur.adjoint() * xm * ul))
                }
                (Coef::Diag { index, value }, BlockValue::Nonneg(v)) => value * v[*index],
                _ => panic!("coefficient does not match block value"),
            }
        })
        .sum()
}

/// Dense Hermitian matrix (or orthant vector) of `sum_i w_i A_i` on one block.
pub fn dense_block(problem: &ConicProblem, block: usize, weighted: &[(f64, &[Term])]) -> BlockValue {
    let b = &problem.blocks[block];
    match b.kind {
        BlockKind::Hermitian => {
            let mut out = CMat::zeros(b.size, b.size);
            for (w, terms) in weighted {
                for t in terms.iter().filter(|t| t.block == block) {
                    match &t.coef {
                        Coef::Frame { frame, kernel } => {
                            let u = &b.frames[*frame];
                            out += u * kernel * u.adjoint() * C64::new(*w, 0.0);
                        }
                        Coef::Cross { left, right, kernel } => {
                            let m = &b.frames[*left] * kernel * b.frames[*right].adjoint();
                            out += (&m + m.adjoint()) * C64::new(0.5 * w, 0.0);
                        }
                        Coef::Diag { .. } => unreachable!(),
                    }
                }
            }
            BlockValue::Hermitian(out)
        }
        BlockKind::Nonneg => {
            let mut out = vec![0.0; b.size];
            for (w, terms) in weighted {
                for t in terms.iter().filter(|t| t.block == block) {
                    if let Coef::Diag { index, value } = t.coef {
                        out[index] += w * value;
                    }
                }
            }
            BlockValue::Nonneg(out)
        }
    }
}

pub fn self_check(problem: &ConicProblem, sol: &ConicSolution) -> SelfCheck {
    let max_primal_residual = problem
        .constraints
        .iter()
        .map(|c| (apply_terms(problem, &c.terms, &sol.x) - c.rhs).abs())
        .fold(0.0, f64::max);
    let min_eig = |vals: &[BlockValue]| {
        vals.iter()
            .map(|v| match v {
                BlockValue::Hermitian(m) => crate::linalg::min_eigenvalue(m),
                BlockValue::Nonneg(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
            })
            .fold(f64::INFINITY, f64::min)
    };
    // dual residual C - sum y_i A_i - Z, block by block
    let mut weighted: Vec<(f64, &[Term])> = vec![(1.0, &problem.objective[..])];
    for (c, &yi) in problem.constraints.iter().zip(&sol.y) {
        weighted.push((-yi, &c.terms[..]));
    }
    let mut max_dual_residual = 0.0f64;
    for (bi, z) in sol.z.iter().enumerate() {
        let r = dense_block(problem, bi, &weighted);
        let dev = match (r, z) {
            (BlockValue::Hermitian(r), BlockValue::Hermitian(z)) => {
                (r - z).iter().map(|e| e.norm()).fold(0.0, f64::max)
            }
            (BlockValue::Nonneg(r), BlockValue::Nonneg(z)) => {
                r.iter().zip(z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            }
            _ => f64::INFINITY,
        };
        max_dual_residual = max_dual_residual.max(dev);
    }
    let duality_gap = apply_terms(problem, &problem.objective, &sol.x)
        - problem.constraints.iter().zip(&sol.y).map(|(c, y)| c.rhs * y).sum::<f64>();
    SelfCheck {
        max_primal_residual,
        min_primal_eigenvalue: min_eig(&sol.x),
        min_dual_eigenvalue: min_eig(&sol.z),
        max_dual_residual,
        duality_gap,
    }
}
