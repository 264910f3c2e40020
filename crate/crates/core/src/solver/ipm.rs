//! Infeasible primal-dual path-following method with the HKM search
//! direction and Mehrotra predictor-corrector steps.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{
    BlockKind, BlockValue, Coef, ConicBackend, ConicProblem, ConicSolution, ConicStatus, SolverSettings,
};
use crate::linalg::{self, c, CMat, C64};

/// Default backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl ConicBackend for InteriorPoint {
    fn name(&self) -> &'static str {
        "hkm-interior-point"
    }

    fn solve(&self, problem: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
        let start = Instant::now();
        let mut solver = Workspace::new(problem);
        let mut sol = solver.run(settings);
        sol.wall_time = start.elapsed();
        sol
    }
}

/// Oriented piece `weight * U_left K U_right^H` of constraint `row`.
#[derive(Debug, Clone)]
struct Piece {
    row: usize,
    left: usize,
    right: usize,
    kernel: CMat,
    weight: f64,
}

#[derive(Debug, Clone)]
struct HermBlock {
    n: usize,
    u_all: CMat,
    /// `(first column, width)` of every frame inside `u_all`.
    spans: Vec<(usize, usize)>,
    pieces: Vec<Piece>,
    c: CMat,
}

#[derive(Debug, Clone)]
struct OrthantBlock {
    n: usize,
    /// `(row, index, value)`
    entries: Vec<(usize, usize, f64)>,
    c: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Blk {
    Herm(HermBlock),
    Orth(OrthantBlock),
}

#[derive(Debug, Clone)]
enum Val {
    H(CMat),
    L(DVector<f64>),
}

impl Val {
    fn h(&self) -> &CMat {
        match self {
            Val::H(m) => m,
            Val::L(_) => unreachable!(),
        }
    }

    fn l(&self) -> &DVector<f64> {
        match self {
            Val::L(v) => v,
            Val::H(_) => unreachable!(),
        }
    }

    fn axpy(&mut self, a: f64, other: &Val) {
        match (self, other) {
            (Val::H(x), Val::H(d)) => {
                *x += d * c(a);
                linalg::hermitize(x);
            }
            (Val::L(x), Val::L(d)) => x.axpy(a, d, 1.0),
            _ => unreachable!(),
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            Val::H(m) => m.iter().map(|z| z.norm_sqr()).sum(),
            Val::L(v) => v.norm_squared(),
        }
    }

    fn inner(&self, other: &Val) -> f64 {
        match (self, other) {
            (Val::H(a), Val::H(b)) => a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum(),
            (Val::L(a), Val::L(b)) => a.dot(b),
            _ => unreachable!(),
        }
    }

    fn sub(&self, other: &Val) -> Val {
        match (self, other) {
            (Val::H(a), Val::H(b)) => Val::H(a - b),
            (Val::L(a), Val::L(b)) => Val::L(a - b),
            _ => unreachable!(),
        }
    }
}

fn frame_gram(blk: &HermBlock, y: &CMat) -> CMat {
    blk.u_all.adjoint() * y * &blk.u_all
}

/// `Re Tr(K G[right, left])` for one piece.
fn piece_inner(p: &Piece, g: &CMat, spans: &[(usize, usize)]) -> f64 {
    let (r0, rw) = spans[p.right];
    let (l0, lw) = spans[p.left];
    let mut acc = 0.0;
    for a in 0..lw {
        for b in 0..rw {
            let k = p.kernel[(a, b)];
            let v = g[(r0 + b, l0 + a)];
            acc += k.re * v.re - k.im * v.im;
        }
    }
    acc * p.weight
}

/// `Re Tr(K_p G1[r_p, l_q] K_q G2[r_q, l_p])`, unweighted.
fn piece_pair(p: &Piece, q: &Piece, g1: &CMat, g2: &CMat, spans: &[(usize, usize)]) -> f64 {
    let (lp0, lpw) = spans[p.left];
    let (rp0, rpw) = spans[p.right];
    let (lq0, lqw) = spans[q.left];
    let (rq0, rqw) = spans[q.right];
    if lpw == 1 && rpw == 1 && lqw == 1 && rqw == 1 {
        let v = p.kernel[(0, 0)] * g1[(rp0, lq0)] * q.kernel[(0, 0)] * g2[(rq0, lp0)];
        return v.re;
    }
    let t1 = &p.kernel * g1.view((rp0, lq0), (rpw, lqw));
    let t2 = &q.kernel * g2.view((rq0, lp0), (rqw, lpw));
    let mut acc = 0.0;
    for a in 0..lpw {
        for b in 0..lqw {
            let x = t1[(a, b)];
            let y = t2[(b, a)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

struct Workspace {
    blocks: Vec<Blk>,
    b: DVector<f64>,
    m: usize,
    /// Per-row scaling applied to `A_i`, `b_i`.
    row_scale: Vec<f64>,
    /// Scaling applied to `C`.
    c_scale: f64,
}

impl Workspace {
    fn new(problem: &ConicProblem) -> Self {
        let m = problem.constraints.len();
        let mut blocks: Vec<Blk> = problem
            .blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Hermitian => {
                    let total: usize = b.frames.iter().map(|f| f.ncols()).sum();
                    let mut u_all = CMat::zeros(b.size, total.max(1));
                    let mut spans = Vec::with_capacity(b.frames.len());
                    let mut col = 0;
                    for f in &b.frames {
                        u_all.view_mut((0, col), (b.size, f.ncols())).copy_from(f);
                        spans.push((col, f.ncols()));
                        col += f.ncols();
                    }
                    Blk::Herm(HermBlock {
                        n: b.size,
                        u_all,
                        spans,
                        pieces: Vec::new(),
                        c: CMat::zeros(b.size, b.size),
                    })
                }
                BlockKind::Nonneg => Blk::Orth(OrthantBlock {
                    n: b.size,
                    entries: Vec::new(),
                    c: vec![0.0; b.size],
                }),
            })
            .collect();

        for (row, con) in problem.constraints.iter().enumerate() {
            for t in &con.terms {
                match (&mut blocks[t.block], &t.coef) {
                    (Blk::Herm(hb), Coef::Frame { frame, kernel }) => hb.pieces.push(Piece {
                        row,
                        left: *frame,
                        right: *frame,
                        kernel: linalg::hermitian_part(kernel),
                        weight: 1.0,
                    }),
                    (Blk::Herm(hb), Coef::Cross { left, right, kernel }) => {
                        hb.pieces.push(Piece {
                            row,
                            left: *left,
                            right: *right,
                            kernel: kernel.clone(),
                            weight: 0.5,
                        });
                        hb.pieces.push(Piece {
                            row,
                            left: *right,
                            right: *left,
                            kernel: kernel.adjoint(),
                            weight: 0.5,
                        });
                    }
                    (Blk::Orth(ob), Coef::Diag { index, value }) => ob.entries.push((row, *index, *value)),
                    _ => panic!("coefficient kind does not match block kind"),
                }
            }
        }
        for (bi, blk) in blocks.iter_mut().enumerate() {
            match (blk, super::dense_block(problem, bi, &[(1.0, &problem.objective[..])])) {
                (Blk::Herm(hb), BlockValue::Hermitian(cm)) => hb.c = cm,
                (Blk::Orth(ob), BlockValue::Nonneg(cv)) => ob.c = cv,
                _ => unreachable!(),
            }
        }

        let b = DVector::from_iterator(m, problem.constraints.iter().map(|c| c.rhs));
        let mut ws = Self {
            blocks,
            b,
            m,
            row_scale: vec![1.0; m],
            c_scale: 1.0,
        };
        ws.equilibrate();
        ws
    }

    /// Scale every constraint row to unit Frobenius norm and `C` to unit norm.
    fn equilibrate(&mut self) {
        let mut norms = vec![0.0; self.m];
        for blk in &self.blocks {
            match blk {
                Blk::Herm(hb) => {
                    let g0 = hb.u_all.adjoint() * &hb.u_all;
                    // accumulate ||A_i||^2 = sum over piece pairs of the same row
                    let mut by_row: HashMap<usize, Vec<&Piece>> = HashMap::new();
                    for p in &hb.pieces {
                        by_row.entry(p.row).or_default().push(p);
                    }
                    for (row, ps) in by_row {
                        let mut s = 0.0;
                        for p in &ps {
                            for q in &ps {
                                s += p.weight * q.weight * piece_pair(p, q, &g0, &g0, &hb.spans);
                            }
                        }
                        norms[row] += s;
                    }
                }
                Blk::Orth(ob) => {
                    for &(row, _, v) in &ob.entries {
                        norms[row] += v * v;
                    }
                }
            }
        }
        for (i, n2) in norms.iter().enumerate() {
            let n = n2.max(0.0).sqrt();
            self.row_scale[i] = if n > 0.0 { 1.0 / n } else { 1.0 };
        }
        let c_norm: f64 = self
            .blocks
            .iter()
            .map(|blk| match blk {
                Blk::Herm(hb) => hb.c.iter().map(|z| z.norm_sqr()).sum::<f64>(),
                Blk::Orth(ob) => ob.c.iter().map(|v| v * v).sum::<f64>(),
            })
            .sum::<f64>()
            .sqrt();
        self.c_scale = if c_norm > 0.0 { 1.0 / c_norm } else { 1.0 };
        let rs = self.row_scale.clone();
        let cs = self.c_scale;
        for blk in &mut self.blocks {
            match blk {
                Blk::Herm(hb) => {
                    for p in &mut hb.pieces {
                        p.weight *= rs[p.row];
                    }
                    hb.c *= c(cs);
                }
                Blk::Orth(ob) => {
                    for e in &mut ob.entries {
                        e.2 *= rs[e.0];
                    }
                    for v in &mut ob.c {
                        *v *= cs;
                    }
                }
            }
        }
        for i in 0..self.m {
            self.b[i] *= rs[i];
        }
    }

    fn nu(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                Blk::Herm(h) => h.n,
                Blk::Orth(o) => o.n,
            })
            .sum::<usize>() as f64
    }

    /// `A(Y)` for a list of block values (Hermitian parts are implied).
    fn apply_a(&self, y: &[Val]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, v) in self.blocks.iter().zip(y) {
            match blk {
                Blk::Herm(hb) => {
                    let g = frame_gram(hb, v.h());
                    for p in &hb.pieces {
                        out[p.row] += piece_inner(p, &g, &hb.spans);
                    }
                }
                Blk::Orth(ob) => {
                    let x = v.l();
                    for &(row, idx, val) in &ob.entries {
                        out[row] += val * x[idx];
                    }
                }
            }
        }
        out
    }

    /// `sum_i y_i A_i`, block by block.
    fn apply_at(&self, y: &DVector<f64>) -> Vec<Val> {
        self.blocks
            .iter()
            .map(|blk| match blk {
                Blk::Herm(hb) => {
                    let mut acc: HashMap<(usize, usize), CMat> = HashMap::new();
                    for p in &hb.pieces {
                        let w = y[p.row] * p.weight;
                        if w == 0.0 {
                            continue;
                        }
                        let e = acc
                            .entry((p.left, p.right))
                            .or_insert_with(|| CMat::zeros(p.kernel.nrows(), p.kernel.ncols()));
                        *e += &p.kernel * c(w);
                    }
                    let mut out = CMat::zeros(hb.n, hb.n);
                    let mut keys: Vec<_> = acc.keys().copied().collect();
                    keys.sort_unstable();
                    for key in keys {
                        let k = &acc[&key];
                        let (l0, lw) = hb.spans[key.0];
                        let (r0, rw) = hb.spans[key.1];
                        let ul = hb.u_all.columns(l0, lw);
                        let ur = hb.u_all.columns(r0, rw);
                        out += ul * (k * ur.adjoint());
                    }
                    linalg::hermitize(&mut out);
                    Val::H(out)
                }
                Blk::Orth(ob) => {
                    let mut out = DVector::zeros(ob.n);
                    for &(row, idx, val) in &ob.entries {
                        out[idx] += y[row] * val;
                    }
                    Val::L(out)
                }
            })
            .collect()
    }

    fn c_val(&self) -> Vec<Val> {
        self.blocks
            .iter()
            .map(|blk| match blk {
                Blk::Herm(hb) => Val::H(hb.c.clone()),
                Blk::Orth(ob) => Val::L(DVector::from_vec(ob.c.clone())),
            })
            .collect()
    }

    /// Schur complement `M_ij = <A_i, X A_j Z^{-1}>`.
    fn schur(&self, x: &[Val], zinv: &[Val], z: &[Val]) -> DMatrix<f64> {
        let mut mm = DMatrix::<f64>::zeros(self.m, self.m);
        for (bi, blk) in self.blocks.iter().enumerate() {
            match blk {
                Blk::Herm(hb) => {
                    let g1 = frame_gram(hb, x[bi].h());
                    let g2 = frame_gram(hb, zinv[bi].h());
                    let ps = &hb.pieces;
                    for p in ps {
                        for q in ps {
                            if q.row < p.row {
                                continue;
                            }
                            mm[(p.row, q.row)] += p.weight * q.weight * piece_pair(p, q, &g1, &g2, &hb.spans);
                        }
                    }
                }
                Blk::Orth(ob) => {
                    let (xv, zv) = (x[bi].l(), z[bi].l());
                    let mut by_idx: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
                    for &(row, idx, val) in &ob.entries {
                        by_idx.entry(idx).or_default().push((row, val));
                    }
                    for (idx, list) in by_idx {
                        let d = xv[idx] / zv[idx];
                        for &(ri, vi) in &list {
                            for &(rj, vj) in &list {
                                if rj >= ri {
                                    mm[(ri, rj)] += vi * vj * d;
                                }
                            }
                        }
                    }
                }
            }
        }
        for i in 0..self.m {
            for j in 0..i {
                mm[(i, j)] = mm[(j, i)];
            }
        }
        mm
    }

    fn run(&mut self, settings: &SolverSettings) -> ConicSolution {
        let nu = self.nu();
        let cval = self.c_val();
        let b_norm = self.b.norm();
        let c_norm: f64 = cval.iter().map(Val::norm_sq).sum::<f64>().sqrt();

        // starting point
        let mut x: Vec<Val> = Vec::new();
        let mut z: Vec<Val> = Vec::new();
        for blk in &self.blocks {
            match blk {
                Blk::Herm(hb) => {
                    let n = hb.n as f64;
                    let xi = 10f64.max(n.sqrt()) * (1.0 + self.b.amax());
                    let zeta = 10f64.max(n.sqrt()) * (1.0 + c_norm);
                    x.push(Val::H(CMat::identity(hb.n, hb.n) * c(xi)));
                    z.push(Val::H(CMat::identity(hb.n, hb.n) * c(zeta)));
                }
                Blk::Orth(ob) => {
                    let xi = 10.0 * (1.0 + self.b.amax());
                    let zeta = 10.0 * (1.0 + c_norm);
                    x.push(Val::L(DVector::from_element(ob.n, xi)));
                    z.push(Val::L(DVector::from_element(ob.n, zeta)));
                }
            }
        }
        let mut y = DVector::<f64>::zeros(self.m);

        let mut status = ConicStatus::NumericalFailure;
        let mut message = String::from("iteration limit reached");
        let mut iterations = 0;
        let (mut rel_p, mut rel_d, mut rel_gap) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut tiny_steps = 0;
        let mut best: Option<(f64, Vec<Val>, DVector<f64>, Vec<Val>)> = None;

        for iter in 0..=settings.max_iterations {
            iterations = iter;
            let ax = self.apply_a(&x);
            let rp = &self.b - &ax;
            let aty = self.apply_at(&y);
            let rd: Vec<Val> = cval
                .iter()
                .zip(&aty)
                .zip(&z)
                .map(|((cv, av), zv)| cv.sub(av).sub(zv))
                .collect();
            let pobj: f64 = cval.iter().zip(&x).map(|(cv, xv)| cv.inner(xv)).sum();
            let dobj = self.b.dot(&y);
            let gap: f64 = x.iter().zip(&z).map(|(a, b)| a.inner(b)).sum();
            let mu = gap / nu;
            let rd_norm = rd.iter().map(Val::norm_sq).sum::<f64>().sqrt();
            rel_p = rp.norm() / (1.0 + b_norm);
            rel_d = rd_norm / (1.0 + c_norm);
            rel_gap = gap.abs() / (1.0 + pobj.abs() + dobj.abs());
            if settings.verbose {
                eprintln!(
                    "{iter:3} pobj {pobj:+.8e} dobj {dobj:+.8e} gap {rel_gap:.2e} pinf {rel_p:.2e} dinf {rel_d:.2e}"
                );
            }
            let merit = rel_p.max(rel_d).max(rel_gap);
            if best.as_ref().map_or(true, |b| merit < b.0) {
                best = Some((merit, x.clone(), y.clone(), z.clone()));
            }
            if merit < settings.tolerance {
                status = ConicStatus::Optimal;
                message = "converged".into();
                break;
            }
            if dobj > 0.0 {
                // A*(y) + Z = C - Rd; a vanishing ratio certifies primal infeasibility
                let cert: f64 = cval
                    .iter()
                    .zip(&rd)
                    .map(|(cv, r)| cv.sub(r).norm_sq())
                    .sum::<f64>()
                    .sqrt()
                    / dobj;
                if cert < settings.infeasibility_tolerance {
                    status = ConicStatus::PrimalInfeasible;
                    message = format!("primal infeasibility certificate (ratio {cert:.2e})");
                    break;
                }
            }
            if iter == settings.max_iterations {
                break;
            }

            // factorizations
            let mut chol_x = Vec::with_capacity(x.len());
            let mut chol_z = Vec::with_capacity(z.len());
            let mut zinv: Vec<Val> = Vec::with_capacity(z.len());
            let mut breakdown = false;
            for (xv, zv) in x.iter().zip(&z) {
                match (xv, zv) {
                    (Val::H(xm), Val::H(zm)) => {
                        let (cx, cz) = match (linalg::cholesky(xm), linalg::cholesky(zm)) {
                            (Some(a), Some(b)) => (a, b),
                            _ => {
                                breakdown = true;
                                break;
                            }
                        };
                        let mut zi = cz.inverse();
                        linalg::hermitize(&mut zi);
                        zinv.push(Val::H(zi));
                        chol_x.push(Some(cx));
                        chol_z.push(Some(cz));
                    }
                    (Val::L(_), Val::L(zl)) => {
                        zinv.push(Val::L(zl.map(|v| 1.0 / v)));
                        chol_x.push(None);
                        chol_z.push(None);
                    }
                    _ => unreachable!(),
                }
            }
            if breakdown {
                message = "loss of positive definiteness".into();
                break;
            }
            let mm = self.schur(&x, &zinv, &z);
            let Some(chol_m) = factor_schur(mm) else {
                message = "Schur complement factorization failed".into();
                break;
            };

            // X Rd Z^{-1}
            let xrdzi: Vec<Val> = x
                .iter()
                .zip(&rd)
                .zip(&zinv)
                .map(|((xv, r), zi)| match (xv, r, zi) {
                    (Val::H(xm), Val::H(rm), Val::H(zm)) => Val::H(xm * rm * zm),
                    (Val::L(xl), Val::L(rl), Val::L(zl)) => Val::L(xl.component_mul(rl).component_mul(zl)),
                    _ => unreachable!(),
                })
                .collect();
            let a_xrdzi = self.apply_a(&xrdzi);

            // predictor
            let k_pred: Vec<Val> = x.iter().map(|v| neg(v)).collect();
            let (dx_p, dy_p, dz_p) = self.direction(&k_pred, &rp, &a_xrdzi, &rd, &x, &zinv, &chol_m);
            let ap = step_length(&x, &dx_p, &chol_x, 1.0);
            let ad = step_length(&z, &dz_p, &chol_z, 1.0);
            let mut gap_aff = 0.0;
            for i in 0..x.len() {
                let mut xa = x[i].clone();
                xa.axpy(ap, &dx_p[i]);
                let mut za = z[i].clone();
                za.axpy(ad, &dz_p[i]);
                gap_aff += xa.inner(&za);
            }
            let mu_aff = gap_aff / nu;
            let expon = if ap.min(ad) > 0.5 { 3.0 } else { 2.0 };
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powf(expon).clamp(1e-6, 1.0);

            // corrector
            let k_corr: Vec<Val> = (0..x.len())
                .map(|i| match (&x[i], &zinv[i], &dx_p[i], &dz_p[i]) {
                    (Val::H(xm), Val::H(zi), Val::H(dxp), Val::H(dzp)) => {
                        let mut k = zi * c(sigma * mu) - xm;
                        let mut soc = dxp * dzp * zi;
                        linalg::hermitize(&mut soc);
                        k -= soc;
                        Val::H(k)
                    }
                    (Val::L(xl), Val::L(zi), Val::L(dxp), Val::L(dzp)) => {
                        Val::L(zi * (sigma * mu) - xl - dxp.component_mul(dzp).component_mul(zi))
                    }
                    _ => unreachable!(),
                })
                .collect();
            let (dx, dy, dz) = self.direction(&k_corr, &rp, &a_xrdzi, &rd, &x, &zinv, &chol_m);
            let _ = dy_p;
            let tau = if merit < 1e-4 { 0.99 } else { 0.95 };
            let ap = step_length(&x, &dx, &chol_x, 1.0 / tau) * tau;
            let ad = step_length(&z, &dz, &chol_z, 1.0 / tau) * tau;
            if ap.min(ad) < 1e-8 {
                tiny_steps += 1;
                if tiny_steps > 3 {
                    message = "stalled: step lengths vanished".into();
                    break;
                }
            } else {
                tiny_steps = 0;
            }
            for i in 0..x.len() {
                x[i].axpy(ap, &dx[i]);
                z[i].axpy(ad, &dz[i]);
            }
            y.axpy(ad, &dy, 1.0);
        }

        if status == ConicStatus::NumericalFailure {
            if let Some((_, bx, by, bz)) = best.take() {
                x = bx;
                y = by;
                z = bz;
            }
        }
        self.finish(status, message, iterations, x, y, z, rel_p, rel_d, rel_gap)
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        k: &[Val],
        rp: &DVector<f64>,
        a_xrdzi: &DVector<f64>,
        rd: &[Val],
        x: &[Val],
        zinv: &[Val],
        chol_m: &Cholesky<f64, nalgebra::Dyn>,
    ) -> (Vec<Val>, DVector<f64>, Vec<Val>) {
        let rhs = rp - self.apply_a(k) + a_xrdzi;
        let dy = chol_m.solve(&rhs);
        let atdy = self.apply_at(&dy);
        let dz: Vec<Val> = rd.iter().zip(&atdy).map(|(r, a)| r.sub(a)).collect();
        let dx: Vec<Val> = (0..x.len())
            .map(|i| match (&k[i], &x[i], &dz[i], &zinv[i]) {
                (Val::H(km), Val::H(xm), Val::H(dzm), Val::H(zi)) => {
                    let mut t = xm * dzm * zi;
                    linalg::hermitize(&mut t);
                    let mut d = km - t;
                    linalg::hermitize(&mut d);
                    Val::H(d)
                }
                (Val::L(kl), Val::L(xl), Val::L(dzl), Val::L(zi)) => {
                    Val::L(kl - xl.component_mul(dzl).component_mul(zi))
                }
                _ => unreachable!(),
            })
            .collect();
        (dx, dy, dz)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        status: ConicStatus,
        message: String,
        iterations: usize,
        x: Vec<Val>,
        y: DVector<f64>,
        z: Vec<Val>,
        rel_p: f64,
        rel_d: f64,
        rel_gap: f64,
    ) -> ConicSolution {
        let ax = self.apply_a(&x);
        let max_primal_residual = (0..self.m)
            .map(|i| ((ax[i] - self.b[i]) / self.row_scale[i]).abs())
            .fold(0.0, f64::max);
        let cs = self.c_scale;
        let to_value = |v: Val, scale: f64| match v {
            Val::H(m) => BlockValue::Hermitian(m * c(scale)),
            Val::L(v) => BlockValue::Nonneg(v.iter().map(|e| e * scale).collect()),
        };
        let y_orig: Vec<f64> = (0..self.m).map(|i| y[i] * self.row_scale[i] / cs).collect();
        let x_out: Vec<BlockValue> = x.into_iter().map(|v| to_value(v, 1.0)).collect();
        let z_out: Vec<BlockValue> = z.into_iter().map(|v| to_value(v, 1.0 / cs)).collect();
        let b_orig: Vec<f64> = (0..self.m).map(|i| self.b[i] / self.row_scale[i]).collect();
        let dual_objective = b_orig.iter().zip(&y_orig).map(|(b, y)| b * y).sum();
        let primal_objective = self
            .blocks
            .iter()
            .zip(&x_out)
            .map(|(blk, xv)| match (blk, xv) {
                (Blk::Herm(hb), BlockValue::Hermitian(xm)) => linalg::re_trace_product(&hb.c, xm),
                (Blk::Orth(ob), BlockValue::Nonneg(xl)) => ob.c.iter().zip(xl).map(|(a, b)| a * b).sum(),
                _ => unreachable!(),
            })
            .sum::<f64>()
            / cs;
        ConicSolution {
            status,
            x: x_out,
            z: z_out,
            y: y_orig,
            primal_objective,
            dual_objective,
            max_primal_residual,
            relative_primal_infeasibility: rel_p,
            relative_dual_infeasibility: rel_d,
            relative_gap: rel_gap,
            iterations,
            wall_time: Default::default(),
            message,
        }
    }
}

fn neg(v: &Val) -> Val {
    match v {
        Val::H(m) => Val::H(-m),
        Val::L(l) => Val::L(-l),
    }
}

fn factor_schur(mut mm: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let n = mm.nrows();
    let max_diag = (0..n).map(|i| mm[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut reg = 0.0;
    for _ in 0..6 {
        if let Some(ch) = Cholesky::new(mm.clone()) {
            return Some(ch);
        }
        let next = if reg == 0.0 { 1e-14 * max_diag } else { reg * 100.0 };
        for i in 0..n {
            mm[(i, i)] += next - reg;
        }
        reg = next;
    }
    None
}

/// Largest step in `[0, cap]` keeping every block of `v + a * dv` interior.
fn step_length(v: &[Val], dv: &[Val], chol: &[Option<Cholesky<C64, nalgebra::Dyn>>], cap: f64) -> f64 {
    let mut a = cap;
    for i in 0..v.len() {
        match (&v[i], &dv[i]) {
            (Val::H(_), Val::H(d)) => {
                let ch = chol[i].as_ref().expect("Hermitian block has a Cholesky factor");
                a = a.min(linalg::max_psd_step(ch, d, cap));
            }
            (Val::L(x), Val::L(d)) => {
                for (xi, di) in x.iter().zip(d.iter()) {
                    if *di < 0.0 {
                        a = a.min(-xi / di);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    a.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{self_check, Block, Coef, Term};

    fn trace_one_problem(cm: &CMat) -> ConicProblem {
        let n = cm.nrows();
        let mut p = ConicProblem::default();
        let mut blk = Block::hermitian("X", n);
        let id = blk.add_frame(CMat::identity(n, n));
        let b = p.add_block(blk);
        p.objective.push(Term {
            block: b,
            coef: Coef::Frame {
                frame: id,
                kernel: cm.clone(),
            },
        });
        p.add_constraint(
            "trace",
            vec![Term {
                block: b,
                coef: Coef::Frame {
                    frame: id,
                    kernel: CMat::identity(n, n),
                },
            }],
            1.0,
        );
        p
    }

    #[test]
    fn trace_constrained_minimum_is_smallest_eigenvalue() {
        let a = CMat::from_fn(4, 4, |i, j| C64::new((i + 2 * j) as f64 * 0.3, (i as f64 - j as f64) * 0.7));
        let cm = linalg::hermitian_part(&a);
        let p = trace_one_problem(&cm);
        let sol = InteriorPoint.solve(&p, &SolverSettings::default());
        assert_eq!(sol.status, ConicStatus::Optimal, "{}", sol.message);
        assert!((sol.primal_objective - linalg::min_eigenvalue(&cm)).abs() < 1e-6);
        let chk = self_check(&p, &sol);
        assert!(chk.max_primal_residual < 1e-7);
        assert!(chk.max_dual_residual < 1e-6);
        assert!(chk.min_primal_eigenvalue > -1e-9);
    }

    #[test]
    fn orthant_lp() {
        let mut p = ConicProblem::default();
        let b = p.add_block(Block::nonneg("x", 2));
        p.objective = vec![
            Term { block: b, coef: Coef::Diag { index: 0, value: 1.0 } },
            Term { block: b, coef: Coef::Diag { index: 1, value: 2.0 } },
        ];
        p.add_constraint(
            "sum",
            vec![
                Term { block: b, coef: Coef::Diag { index: 0, value: 1.0 } },
                Term { block: b, coef: Coef::Diag { index: 1, value: 1.0 } },
            ],
            3.0,
        );
        let sol = InteriorPoint.solve(&p, &SolverSettings::default());
        assert_eq!(sol.status, ConicStatus::Optimal);
        assert!((sol.primal_objective - 3.0).abs() < 1e-6);
        assert!((sol.dual_objective - 3.0).abs() < 1e-6);
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let mut p = trace_one_problem(&CMat::identity(3, 3));
        p.constraints[0].rhs = -1.0;
        let sol = InteriorPoint.solve(&p, &SolverSettings::default());
        assert_eq!(sol.status, ConicStatus::PrimalInfeasible, "{}", sol.message);
    }

    #[test]
    fn cross_entries_select_real_part() {
        // maximize Re X_01 subject to X_00 = X_11 = 1: optimum 1
        let mut p = ConicProblem::default();
        let mut blk = Block::hermitian("X", 2);
        let first = blk.add_unit_frames();
        let b = p.add_block(blk);
        p.objective.push(Term { block: b, coef: Coef::entry(first, 0, 1, -1.0) });
        p.add_constraint("d0", vec![Term { block: b, coef: Coef::entry(first, 0, 0, 1.0) }], 1.0);
        p.add_constraint("d1", vec![Term { block: b, coef: Coef::entry(first, 1, 1, 1.0) }], 1.0);
        let sol = InteriorPoint.solve(&p, &SolverSettings::default());
        assert_eq!(sol.status, ConicStatus::Optimal);
        assert!((sol.primal_objective + 1.0).abs() < 1e-6);
    }
}
