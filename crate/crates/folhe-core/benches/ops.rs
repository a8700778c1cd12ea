//! Parallel vs sequential throughput of the grid-bound kernels: wedge
//! products, Hermitian functional calculus, and the full continuity-equation
//! residual. `FOLHE_THREADS` caps the pool as usual.

use criterion::{criterion_group, criterion_main, Criterion};
use folhe_core::bundle::{BundleSpec, LineFactor};
use folhe_core::field::BasicField;
use folhe_core::model::FoliatedTorusModel;
use folhe_core::par::{set_exec_mode, ExecMode};
use folhe_core::solver::residual;
use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

type C = Complex<f64>;

fn bench_modes(c: &mut Criterion) {
    let model = FoliatedTorusModel::product(1, 1, 1.0, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = BasicField::random(&model, 0, 1, 3, &mut rng, 1.0, 0.2, false);
    let b = BasicField::random(&model, 1, 0, 3, &mut rng, 1.0, 0.2, false);
    let s = BasicField::random(&model, 0, 0, 3, &mut rng, 0.5, 0.2, true);
    let bundle = BundleSpec::new(
        &model,
        vec![
            LineFactor::new(vec![1]),
            LineFactor::new(vec![0]),
            LineFactor::new(vec![0]),
        ],
        vec![],
    )
    .unwrap();
    let gamma = bundle.einstein_factor();

    let mut group = c.benchmark_group("grid-kernels");
    for (mode, tag) in [(ExecMode::Parallel, "parallel"), (ExecMode::Sequential, "sequential")] {
        set_exec_mode(mode);
        group.bench_function(format!("wedge/{tag}"), |bch| {
            bch.iter(|| black_box(a.wedge(&b).unwrap()))
        });
        group.bench_function(format!("exp-log/{tag}"), |bch| {
            bch.iter(|| {
                let g = s.to_grid().map_hermitian(f64::exp);
                black_box(g.map_hermitian(f64::ln).to_modes())
            })
        });
        group.bench_function(format!("he-residual/{tag}"), |bch| {
            bch.iter(|| black_box(residual(&bundle, gamma, 0.5, &s)))
        });
    }
    set_exec_mode(ExecMode::Parallel);
    group.finish();

    let _ = black_box(C::new(0.0, 0.0));
}

criterion_group!(benches, bench_modes);
criterion_main!(benches);
