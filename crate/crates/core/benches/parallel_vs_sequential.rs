//! Rayon's global pool against a one-thread pool on the hot kernels.
//! For the fully sequential build run
//! `cargo bench -p kdv5 --no-default-features`; the "pool" rows then
//! measure the fallback loops.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use kdv5::boundary::{BoundaryData, BoundaryOptions, BoundaryPotential, EvalExtent};
use kdv5::bourgain::NormIndices;
use kdv5::cutoffs::{BumpSide, BumpSpec};
use kdv5::par;
use kdv5::propagator::PropagatorPlan;
use kdv5::solver::{ProblemData, Solver, SolverConfig};
use kdv5::spectral::{GridFunction, SpaceTimeField, TimeSeries, UniformGrid};

fn grids() -> (UniformGrid, UniformGrid) {
    (UniformGrid::centered(40.0, 128).unwrap(), UniformGrid::centered(4.0, 2048).unwrap())
}

fn bump_data(tg: UniformGrid) -> BoundaryData {
    let bump = BumpSpec::new(0.1, 0.4, BumpSide::TwoSided).unwrap();
    let h = TimeSeries::from_real_fn(tg, |t| 1e-2 * bump.value(t - 0.5));
    BoundaryData::new(h, TimeSeries::zeros(tg), TimeSeries::zeros(tg)).unwrap()
}

fn on<R: Send>(pool: Option<&rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn kernels(c: &mut Criterion) {
    let (xg, tg) = grids();
    let g = GridFunction::from_real_fn(xg, |x| 1e-2 * (-(x - 8.0) * (x - 8.0) / 4.0).exp());
    let plan = PropagatorPlan::new(xg);
    let data = bump_data(tg);
    let cfg = SolverConfig::new(NormIndices::new(0.3, 0.45, 0.47, 0.51, 0.0), 0.5, xg, tg);
    let solver = Solver::new(ProblemData { g: g.clone(), h: data.clone() }, cfg).unwrap();
    let iterate: SpaceTimeField = solver.linear.clone();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();

    let mut group = c.benchmark_group(format!("kernels ({})", par::backend()));
    group.sample_size(10);
    for (label, pool) in [("global pool", None), ("one thread", Some(&single))] {
        group.bench_function(BenchmarkId::new("group_field", label), |b| {
            b.iter(|| on(pool, || black_box(plan.group_field(&g, tg).unwrap())))
        });
        group.bench_function(BenchmarkId::new("boundary_potential", label), |b| {
            b.iter(|| {
                on(pool, || {
                    let extent = EvalExtent { x_abs_max: 20.0, t_min: -1.0, t_max: 1.0 };
                    let bp = BoundaryPotential::new(&data, BoundaryOptions { spectral_floor: 1e-4, ..Default::default() }, extent).unwrap();
                    black_box(bp.assemble(xg, tg, Some((-1.0, 1.0))).unwrap())
                })
            })
        });
        group.bench_function(BenchmarkId::new("gamma_apply", label), |b| {
            b.iter(|| on(pool, || black_box(solver.apply(&iterate).unwrap().total)))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
