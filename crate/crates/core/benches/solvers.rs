use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use nsk_core::growth::compute_growth;
use nsk_core::profile::make_analytic_profile;
use nsk_core::sim::{DtMode, InitKind, RunConfig, Simulation};
use nsk_core::threshold::compute_kappa_c;
use nsk_core::{AnalyticProfile, SlabConfig};

fn config() -> SlabConfig {
    SlabConfig::new(1.0, 0.05, 0.02, 1.0, 1.0).unwrap()
}

fn tanh() -> AnalyticProfile {
    AnalyticProfile::TanhLayer { base: 2.0, amp: 0.5, width: 0.2, center: 0.5, slope: 0.1 }
}

#[cfg(feature = "parallel")]
fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("pool", rayon::ThreadPoolBuilder::new().build().unwrap()),
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ]
}

#[cfg(feature = "parallel")]
fn on<R: Send>(pool: &rayon::ThreadPool, f: impl FnOnce() -> R + Send) -> R {
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn pools() -> Vec<(&'static str, ())> {
    vec![("sequential", ())]
}

#[cfg(not(feature = "parallel"))]
fn on<R>(_: &(), f: impl FnOnce() -> R) -> R {
    f()
}

fn threshold(c: &mut Criterion) {
    let cfg = config();
    let p = make_analytic_profile(tanh(), &cfg, 512).unwrap();
    let mut g = c.benchmark_group("threshold_n512_k8");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| on(&pool, || compute_kappa_c(black_box(&p), &cfg, 512, 8).unwrap()))
        });
    }
    g.finish();
}

fn growth(c: &mut Criterion) {
    let cfg = config().with_kappa(0.0);
    let p = make_analytic_profile(tanh(), &cfg, 128).unwrap();
    let mut g = c.benchmark_group("growth_n128");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| on(&pool, || compute_growth(black_box(&p), &cfg, 128).unwrap()))
        });
    }
    g.finish();
}

fn sim_step(c: &mut Criterion) {
    let cfg = config();
    let p = make_analytic_profile(AnalyticProfile::SinSquared { base: 1.0, amp: 1.0 }, &cfg, 64).unwrap();
    let mut g = c.benchmark_group("sim_step_64x64");
    g.sample_size(20);
    for linearized in [false, true] {
        let mut rc = RunConfig::new(64, 64, 1.0, InitKind::RandomSmooth { delta: 0.05, cutoff: 4 });
        rc.dt_mode = DtMode::Fixed { dt: 0.01 };
        rc.linearized = linearized;
        for (name, pool) in pools() {
            let mut sim = Simulation::new(&rc, &p, &cfg).unwrap();
            let s0 = sim.initial_state(&p, None).unwrap();
            let label = format!("{}_{name}", if linearized { "linear" } else { "nonlinear" });
            g.bench_function(BenchmarkId::from_parameter(label), |b| {
                b.iter(|| on(&pool, || sim.step(black_box(&s0), 0.01).unwrap()))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, threshold, growth, sim_step);
criterion_main!(benches);
