use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use indexforms_bench::{flipped_problem, point_reference, torus_pair, torus_superconnection};
use indexforms_core::base_forms::C64;
use indexforms_core::boundary_family::{
    perturb_section, relative_eta_form, relative_index, IndexMethod,
};
use indexforms_core::cylinder_aps::{calderon_trace, relative_heat_trace};
use indexforms_core::zeta_traces::{
    hurwitz_zeta, pseudo_trace, ModelOperator, ModelRegulator, TraceMethod,
};

fn hurwitz(c: &mut Criterion) {
    c.bench_function("hurwitz_zeta", |b| {
        b.iter(|| hurwitz_zeta(black_box(C64::new(-1.5, 0.3)), black_box(0.37)))
    });
    let delta = ModelRegulator {
        a: 0.25,
        order: 1.0,
    };
    let f = ModelOperator::abs_power(2.0);
    c.bench_function("pseudo_trace/closed_form", |b| {
        b.iter(|| pseudo_trace(black_box(&f), &delta, TraceMethod::ClosedForm))
    });
}

fn sections(c: &mut Criterion) {
    let mut group = c.benchmark_group("relative_index");
    for n in [16, 64] {
        let pi = point_reference(n);
        let q = perturb_section(&pi, 3, 1.0, 7).unwrap();
        group.bench_with_input(BenchmarkId::new("trace", n), &n, |b, _| {
            b.iter(|| relative_index(&pi, &q, IndexMethod::Trace))
        });
        group.bench_with_input(BenchmarkId::new("svd", n), &n, |b, _| {
            b.iter(|| relative_index(&pi, &q, IndexMethod::Svd))
        });
    }
    group.finish();

    let (twisted, reference, conn) = torus_pair(12, 2);
    c.bench_function("relative_eta_form/12x12", |b| {
        b.iter(|| relative_eta_form(&twisted, &reference, &conn))
    });
}

fn chern(c: &mut Criterion) {
    let mut group = c.benchmark_group("chern_form");
    group.sample_size(10);
    let a = torus_superconnection(12, 2);
    group.bench_function("12x12", |b| b.iter(|| a.chern_form(black_box(0.5))));
    group.bench_function("transgression/12x12", |b| {
        b.iter(|| a.transgression_form(black_box(0.5)))
    });
    group.finish();
}

fn cylinder(c: &mut Criterion) {
    let (flipped, aps) = flipped_problem(16, 3, 11);
    c.bench_function("calderon_trace/16", |b| b.iter(|| calderon_trace(&flipped)));
    c.bench_function("relative_heat_trace/16", |b| {
        b.iter(|| relative_heat_trace(&flipped, &aps, black_box(0.1)))
    });
}

criterion_group!(benches, hurwitz, sections, chern, cylinder);
criterion_main!(benches);
