use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sfi_bench::lock_exchange;
use sfi_core::assembly::Problem;
use sfi_core::newton::{Strategy, TolerancePolicy};
use sfi_core::sfi::{sfi_step, OuterConfig, QnConfig, QnWorkspace};
use sfi_core::units::days_to_s;

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    for n in [15, 30] {
        let case = lock_exchange(n);
        let problem = Problem::new(&case.grid, &case.model, &[], &case.initial, days_to_s(1.0));
        let p = case.initial.p.clone();
        let s = case.initial.s.clone();
        let x = case.initial.transport_vector();
        let ut = problem.total_velocities(&p, &s).unwrap();
        group.bench_with_input(BenchmarkId::new("pressure", n), &n, |b, _| {
            b.iter(|| problem.assemble_pressure(black_box(&p), &s, true).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("transport", n), &n, |b, _| {
            b.iter(|| problem.assemble_transport(black_box(&x), &p, &ut, true).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("coupled", n), &n, |b, _| {
            b.iter(|| problem.assemble_fi(black_box(&p), &x, true).unwrap())
        });
    }
    group.finish();
}

fn linear_solve(c: &mut Criterion) {
    let case = lock_exchange(30);
    let problem = Problem::new(&case.grid, &case.model, &[], &case.initial, days_to_s(1.0));
    let x = case.initial.transport_vector();
    let rs = problem.assemble_fi(&case.initial.p, &x, true).unwrap();
    let jac = rs.jacobian.unwrap();
    c.bench_function("banded_lu_coupled_30x30", |b| {
        b.iter(|| jac.clone().solve(black_box(&rs.residual)).unwrap())
    });
}

fn qn_update(c: &mut Criterion) {
    let n = 3600;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin().abs() * 0.5).collect();
    c.bench_function("qn_update_m3_3600", |b| {
        b.iter(|| {
            let mut ws = QnWorkspace::new(QnConfig::default(), 1);
            let mut xk = x.clone();
            for k in 0..6 {
                let t: Vec<f64> = xk.iter().map(|v| 0.8 * v + 0.01 * k as f64).collect();
                xk = ws.update(&xk, &t);
            }
            black_box(xk)
        })
    });
}

fn outer_step(c: &mut Criterion) {
    let case = lock_exchange(10);
    let problem = Problem::new(&case.grid, &case.model, &[], &case.initial, days_to_s(5.0));
    let outer = OuterConfig {
        p_scale: Some(case.initial.p[0]),
        ..OuterConfig::default()
    };
    let mut group = c.benchmark_group("sfi_step_10x10");
    group.sample_size(10);
    for s in [Strategy::Tight, Strategy::AdaptiveRelax] {
        let policy = TolerancePolicy::preset(s);
        group.bench_function(s.name(), |b| {
            b.iter(|| sfi_step(&problem, &policy, &QnConfig::default(), &outer).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, linear_solve, qn_update, outer_step);
criterion_main!(benches);
