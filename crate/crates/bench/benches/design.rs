use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sisac::experiments::Scale;
use sisac::fim::assemble_fim_operator;
use sisac::sdp::{build_problem, default_tolerance, solve};
use sisac::{DesignSolution, TightnessThresholds};
use sisac_bench::{reference_scenario, sample_variables};

fn fim(c: &mut Criterion) {
    let mut group = c.benchmark_group("fim");
    for scale in [Scale::Desk, Scale::Paper] {
        let scn = reference_scenario(scale);
        let vars = sample_variables(&scn);
        let op = assemble_fim_operator(&scn);
        group.bench_with_input(BenchmarkId::new("assemble", scale.as_str()), &scn, |b, scn| {
            b.iter(|| assemble_fim_operator(scn))
        });
        group.bench_with_input(BenchmarkId::new("evaluate", scale.as_str()), &vars, |b, vars| {
            b.iter(|| op.evaluate(vars).unwrap())
        });
    }
    group.finish();
}

fn sdp(c: &mut Criterion) {
    let mut group = c.benchmark_group("sdp");
    group.sample_size(10);
    for scale in [Scale::Desk, Scale::Paper] {
        let scn = reference_scenario(scale);
        let op = assemble_fim_operator(&scn);
        group.bench_function(BenchmarkId::new("build", scale.as_str()), |b| {
            b.iter(|| build_problem(&scn, &op))
        });
    }
    let scn = reference_scenario(Scale::Desk);
    let op = assemble_fim_operator(&scn);
    let problem = build_problem(&scn, &op);
    let tol = default_tolerance(scn.antennas());
    group.bench_function("solve/desk", |b| b.iter(|| solve(&problem, tol)));
    let sol = solve(&problem, tol);
    group.bench_function("analyze/desk", |b| {
        b.iter(|| DesignSolution::analyze(&scn, &op, sol.clone(), &TightnessThresholds::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, fim, sdp);
criterion_main!(benches);
