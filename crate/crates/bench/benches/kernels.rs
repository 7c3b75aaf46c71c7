use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cwbnlw_core::conv::{power, Path};
use cwbnlw_core::{
    assemble, ball_sites, invert_with_certificate, newton_step, resonant_set, solve_coupled, ConvolutionConfig,
    FourierField, NewtonState, OperatorKind, ProblemParams, SolverConfig, StepContext,
};

fn field(d: usize, r: i64) -> FourierField {
    let pairs = ball_sites(d, r)
        .into_iter()
        .filter(|xi| xi.is_representative())
        .map(|xi| {
            let v = (-(xi.one_norm() as f64)).exp();
            (xi, v)
        });
    FourierField::from_pairs(d, pairs).unwrap()
}

fn cube(c: &mut Criterion) {
    let cfg = ConvolutionConfig::default();
    let mut group = c.benchmark_group("cube");
    for (d, r) in [(1, 8), (1, 16), (2, 4), (2, 6)] {
        let f = field(d, r);
        let label = format!("d{d}_r{r}");
        group.bench_with_input(BenchmarkId::new("direct", &label), &f, |b, f| {
            b.iter(|| power(black_box(f), 3, &cfg, Path::Direct).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fft", &label), &f, |b, f| {
            b.iter(|| power(black_box(f), 3, &cfg, Path::Fft).unwrap())
        });
    }
    group.finish();
}

fn operator(c: &mut Criterion) {
    let params = ProblemParams::new(vec![1], 2f64.sqrt(), 0.05, 1e-3).unwrap();
    let scfg = SolverConfig::default();
    let sol = solve_coupled(1.5, &params, &scfg).unwrap();
    let mut group = c.benchmark_group("assemble_invert");
    group.sample_size(20);
    for n in [8i64, 16, 32] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| {
                let op = assemble(
                    &sol.u,
                    sol.state.lambda_sq,
                    &params,
                    n,
                    OperatorKind::TTilde,
                    &scfg.conv,
                )
                .unwrap();
                invert_with_certificate(&op, scfg.schedule.c2, scfg.schedule.c, &scfg.cert)
            })
        });
    }
    group.finish();

    let s = resonant_set(&params);
    let amps = sol.state.amplitudes();
    let ctx = StepContext {
        amps: &amps,
        lambda_sq: sol.state.lambda_sq,
        schedule: &scfg.schedule,
        params: &params,
        s: &s,
        conv: &scfg.conv,
        cert: &scfg.cert,
    };
    let start = NewtonState::initial(&amps, sol.state.lambda_sq, &scfg.schedule, &params, &s, &scfg.conv).unwrap();
    c.bench_function("newton_step", |b| {
        b.iter(|| newton_step(black_box(&start), &ctx).unwrap())
    });
}

criterion_group!(benches, cube, operator);
criterion_main!(benches);
