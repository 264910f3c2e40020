use std::fmt::Write as _;
use std::io::Write;

use super::{dense_block, BlockKind, BlockValue, ConicProblem, Term};
use crate::linalg::CMat;

/// Entries below this magnitude are omitted from the export.
const DROP: f64 = 1e-15;

/// Real symmetric embedding `[[Re, -Im], [Im, Re]]` scaled by one half, so
/// that `Re Tr(A X)` equals the trace inner product of the embedded matrices
/// when `X` is embedded without scaling.
fn embed(a: &CMat) -> Vec<(usize, usize, f64)> {
    let n = a.nrows();
    let mut out = Vec::new();
    for i in 0..2 * n {
        for j in i..2 * n {
            let (bi, bj) = (i % n, j % n);
            let z = a[(bi, bj)];
            let v = match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            };
            if v.abs() > DROP {
                out.push((i, j, 0.5 * v));
            }
        }
    }
    out
}

fn block_entries(problem: &ConicProblem, block: usize, terms: &[Term], scale: f64) -> Vec<(usize, usize, f64)> {
    match dense_block(problem, block, &[(scale, terms)]) {
        BlockValue::Hermitian(m) => embed(&m),
        BlockValue::Nonneg(v) => v
            .into_iter()
            .enumerate()
            .filter(|(_, x)| x.abs() > DROP)
            .map(|(i, x)| (i, i, x))
            .collect(),
    }
}

/// Write the problem in SDPA sparse format (`.dat-s`).
///
/// Hermitian blocks are embedded as real symmetric blocks of twice the size.
/// The SDPA primal `max Tr(F0 Y)` with `Tr(F_i Y) = c_i` maps to our problem
/// with `F0 = -C`, `F_i = A_i` and `c = b`.
pub fn write_sdpa(problem: &ConicProblem, out: &mut impl Write) -> std::io::Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "\"{} constraints\"", problem.constraints.len());
    let _ = writeln!(text, "{}", problem.constraints.len());
    let _ = writeln!(text, "{}", problem.blocks.len());
    let sizes: Vec<String> = problem
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Hermitian => (2 * b.size).to_string(),
            BlockKind::Nonneg => format!("-{}", b.size),
        })
        .collect();
    let _ = writeln!(text, "{}", sizes.join(" "));
    let rhs: Vec<String> = problem.constraints.iter().map(|c| format!("{:.17e}", c.rhs)).collect();
    let _ = writeln!(text, "{}", rhs.join(" "));

    let emit = |mat: usize, terms: &[Term], scale: f64, text: &mut String| {
        for bi in 0..problem.blocks.len() {
            for (i, j, v) in block_entries(problem, bi, terms, scale) {
                let _ = writeln!(text, "{mat} {} {} {} {:.17e}", bi + 1, i + 1, j + 1, v);
            }
        }
    };
    emit(0, &problem.objective, -1.0, &mut text);
    for (k, c) in problem.constraints.iter().enumerate() {
        emit(k + 1, &c.terms, 1.0, &mut text);
    }
    out.write_all(text.as_bytes())
}
