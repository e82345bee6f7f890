//! Benchmarks for the batch-parallel entry points.
//!
//! Run twice to compare the rayon-backed loops against the sequential
//! fallback; criterion keeps the baseline names identical so the reports are
//! directly comparable:
//!
//! ```text
//! cargo bench -p pspin-core                          # parallel (default)
//! cargo bench -p pspin-core --no-default-features    # sequential fallback
//! ```

use criterion::{criterion_group, criterion_main, Criterion};
use pspin_core::finite_m::{pm_value, FiniteMConfig};
use pspin_core::mixture::Mixture;
use pspin_core::optimizer::{optimize_at_k, OptimizeOptions};
use pspin_core::parisi::infimum_over_b;
use pspin_core::rsb::FunctionalOrderParameter;
use pspin_core::simulator::{free_energy_mc, sample_disorder};
use pspin_core::sphere::decomposition_check;
use std::hint::black_box;
use std::time::Duration;

fn bench_inner_infimum(c: &mut Criterion) {
    let mix = Mixture::new([(2, 1.0), (3, 0.6)]).unwrap();
    let f = FunctionalOrderParameter::new(2, vec![0.0, 0.4, 1.0], vec![0.0, 0.2, 0.65, 1.0])
        .unwrap();
    c.bench_function("parisi/infimum_over_b", |b| {
        b.iter(|| infimum_over_b(black_box(&mix), black_box(&f)).unwrap())
    });
}

/// Nelder-Mead restarts fan out in parallel.
fn bench_optimizer_restarts(c: &mut Criterion) {
    let mix = Mixture::new([(2, 1.0), (3, 1.0)]).unwrap();
    let opts = OptimizeOptions {
        restarts: 8,
        max_iter: 120,
        ..Default::default()
    };
    let mut g = c.benchmark_group("optimizer");
    g.sample_size(10).measurement_time(Duration::from_secs(20));
    g.bench_function("restarts_k2", |b| {
        b.iter(|| optimize_at_k(black_box(&mix), 2, black_box(&opts)).unwrap())
    });
    g.finish();
}

/// The finite-M functional evaluates its radial grid in parallel.
fn bench_finite_m_grid(c: &mut Criterion) {
    let mix = Mixture::new([(2, 1.0), (3, 0.5)]).unwrap();
    let f = FunctionalOrderParameter::new(2, vec![0.0, 0.4, 1.0], vec![0.0, 0.2, 0.6, 1.0])
        .unwrap();
    let cfg = FiniteMConfig {
        m_dim: 16,
        r_grid_size: 128,
        gh_nodes: 16,
        chi_nodes: 12,
        ..Default::default()
    };
    let mut g = c.benchmark_group("finite_m");
    g.sample_size(10).measurement_time(Duration::from_secs(20));
    g.bench_function("pm_value_m16", |b| {
        b.iter(|| pm_value(black_box(&mix), black_box(&f), black_box(&cfg)).unwrap())
    });
    g.finish();
}

/// Disorder tensors are generated block-parallel; the free-energy estimator
/// additionally fans out over disorder realizations.
fn bench_simulator_batches(c: &mut Criterion) {
    let mix3 = Mixture::pure(3, 1.0).unwrap();
    let mix2 = Mixture::pure(2, 0.3).unwrap();
    let mut g = c.benchmark_group("simulator");
    g.sample_size(10).measurement_time(Duration::from_secs(20));
    let mut seed = 0u64;
    g.bench_function("sample_disorder_p3_n48", |b| {
        b.iter(|| {
            seed = seed.wrapping_add(1);
            sample_disorder(black_box(&mix3), 48, seed).unwrap()
        })
    });
    g.bench_function("free_energy_mc_n16", |b| {
        b.iter(|| free_energy_mc(black_box(&mix2), 16, 2000, 8, 0xBE).unwrap())
    });
    g.finish();
}

/// Geometry checks average 10⁵ sampled configurations in parallel.
fn bench_sphere_sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sphere");
    g.sample_size(10).measurement_time(Duration::from_secs(20));
    g.bench_function("decomposition_check_1e5", |b| {
        b.iter(|| decomposition_check(2, 3, |r| r[0] * r[0], 100_000, 0xD0).unwrap())
    });
    g.finish();
}

criterion_group!(
    benches,
    bench_inner_infimum,
    bench_optimizer_restarts,
    bench_finite_m_grid,
    bench_simulator_batches,
    bench_sphere_sampling
);
criterion_main!(benches);
