use condprep_core::acceptance::example1_spec;
use condprep_core::simulator::{simulate_conditional, SimConfig};
use condprep_core::{designer, sampling, solve_are, steady_state_verdict, DesignRequest, RiccatiProblem};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn riccati(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_are");
    for m in [1usize, 2, 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = sampling::random_detectable_spec(&mut rng, m, 1.0).unwrap();
        let prob = RiccatiProblem::conditional(&spec.derive().unwrap(), 1.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &prob, |b, p| {
            b.iter(|| solve_are(black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn verdict(c: &mut Criterion) {
    let spec = example1_spec(1.0, 0.5).unwrap();
    c.bench_function("steady_state_verdict/example1", |b| {
        b.iter(|| steady_state_verdict(black_box(&spec)).unwrap())
    });
}

fn design(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v_s = sampling::random_pure_covariance(&mut rng, 3);
    c.bench_function("synthesize/m3", |b| {
        b.iter(|| designer::synthesize(&DesignRequest::new(black_box(v_s.clone()))).unwrap())
    });
}

fn simulate(c: &mut Criterion) {
    let spec = example1_spec(1.0, 1.0).unwrap();
    let cfg = SimConfig::new(1e-3, 1.0, 1000, 1);
    let mut group = c.benchmark_group("simulate_conditional");
    group.sample_size(10);
    group.bench_function("example1/1000x1000", |b| {
        b.iter(|| simulate_conditional(black_box(&spec), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, riccati, verdict, design, simulate);
criterion_main!(benches);
