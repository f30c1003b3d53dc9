use condsub::conditioning::sample_strip;
use condsub::ladderbox::{g_S_joint_density, sample_box_pair, V_box};
use condsub::lastpassage::local_time_normalization;
use condsub::mc::par_map;
use condsub::models::sample_path;
use condsub::potential::potential_numeric;
use condsub::{
    CtmcSpec, EulerInversion, LadderBoxLaw, LastPassageLaw, RngStream, SampleMode, StripLaw, StripMethod,
    SubordinatorSpec,
};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn paths(c: &mut Criterion) {
    let stable = SubordinatorSpec::stable(0.5).unwrap();
    let cpd = SubordinatorSpec::compound_poisson_drift(1.0, 5.0, condsub::JumpLaw::Exponential { rate: 1.0 }).unwrap();
    let mut rng = RngStream::new(1, 0).rng();
    c.bench_function("stable grid path, 1000 steps", |b| {
        b.iter(|| sample_path(&stable, 1.0, SampleMode::Grid { dt: 1e-3 }, &mut rng).unwrap())
    });
    c.bench_function("compound Poisson exact path", |b| {
        b.iter(|| sample_path(&cpd, 10.0, SampleMode::JumpExact, &mut rng).unwrap())
    });
    c.bench_function("1000 stable paths in parallel", |b| {
        b.iter(|| {
            par_map(1000, RngStream::new(2, 0), |_, r| sample_path(&stable, 1.0, SampleMode::Grid { dt: 1e-2 }, r))
        })
    });
}

fn conditioning(c: &mut Criterion) {
    let mut rng = RngStream::new(3, 0).rng();
    let poisson = StripLaw::new(SubordinatorSpec::poisson(1.0).unwrap(), 3.0, 0.0).unwrap();
    let stable = StripLaw::new(SubordinatorSpec::stable(0.5).unwrap(), 1.0, 0.0).unwrap();
    c.bench_function("Poisson strip, forward dynamics", |b| {
        b.iter(|| sample_strip(&poisson, StripMethod::HTransform, &mut rng).unwrap())
    });
    c.bench_function("stable strip, path decomposition", |b| {
        b.iter(|| sample_strip(&stable, StripMethod::PathDecomposition, &mut rng).unwrap())
    });
    c.bench_function("stable strip, Lamperti forward dynamics", |b| {
        b.iter(|| sample_strip(&stable, StripMethod::HTransform, &mut rng).unwrap())
    });
}

fn exact(c: &mut Criterion) {
    let gamma = SubordinatorSpec::gamma(2.0, 1.0).unwrap();
    let inv = EulerInversion::default();
    c.bench_function("gamma renewal by inversion", |b| {
        b.iter(|| potential_numeric(&gamma, 0.0, black_box(1.7), &inv).unwrap())
    });
    let law = LadderBoxLaw::new(1.0, 1.0, 1e-3).unwrap();
    c.bench_function("box renewal measure", |b| b.iter(|| V_box(&law, black_box(0.5)).unwrap()));
    c.bench_function("box joint density", |b| {
        b.iter(|| g_S_joint_density(&law, black_box(0.4), black_box(0.3)).unwrap())
    });
    let chain = CtmcSpec::fixture("birth_death").unwrap();
    c.bench_function("last-passage law setup", |b| {
        b.iter(|| LastPassageLaw::new(local_time_normalization(&chain).unwrap(), 1.5).unwrap())
    });
}

fn sampling_laws(c: &mut Criterion) {
    let mut rng = RngStream::new(4, 0).rng();
    let lp = LastPassageLaw::new(local_time_normalization(&CtmcSpec::fixture("cyclic_five").unwrap()).unwrap(), 1.5)
        .unwrap();
    c.bench_function("conditioned CTMC path", |b| b.iter(|| lp.sample(&mut rng).unwrap()));
    let law = LadderBoxLaw::new(1.0, 1.0, 1e-3).unwrap();
    c.bench_function("box (g, S) proposal, dt 1e-3", |b| b.iter(|| sample_box_pair(&law, &mut rng)));
}

criterion_group!(benches, paths, conditioning, exact, sampling_laws);
criterion_main!(benches);
