use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use dpdbp_core::breakdown::BoundProblem;
use dpdbp_core::divergence::{power_norm, DpdConfig, UnivariateDensity};
use dpdbp_core::estimation::{empirical_objective, estimating_equation};
use dpdbp_core::models::{Dataset, DesignMatrix, MeanFunction, Model, ObservationFamily};

fn linear_dataset(n: usize) -> (Model, Dataset) {
    let model = Model::new(ObservationFamily::Normal, MeanFunction::Linear);
    let mut rng = ChaCha12Rng::seed_from_u64(17);
    let design = DesignMatrix::new(
        (0..n)
            .map(|_| vec![rand::Rng::gen_range(&mut rng, -5.0..5.0)])
            .collect(),
    )
    .unwrap();
    let y: Vec<f64> = design
        .rows()
        .map(|x| model.sample(&[2.0, 1.5, 0.8], x, &mut rng))
        .collect();
    (model, Dataset::new(design, y).unwrap())
}

fn poisson_dataset(n: usize) -> (Model, Dataset) {
    let model = Model::new(ObservationFamily::Poisson, MeanFunction::Linear);
    let mut rng = ChaCha12Rng::seed_from_u64(18);
    let design = DesignMatrix::new(
        (0..n)
            .map(|_| vec![rand::Rng::gen_range(&mut rng, 0.0..4.0)])
            .collect(),
    )
    .unwrap();
    let y: Vec<f64> = design
        .rows()
        .map(|x| model.sample(&[1.0, 1.0], x, &mut rng))
        .collect();
    (model, Dataset::new(design, y).unwrap())
}

fn bench_objective(c: &mut Criterion) {
    let cfg = DpdConfig::default();
    let (model, data) = linear_dataset(200);
    c.bench_function("empirical_objective normal n=200", |b| {
        b.iter(|| {
            empirical_objective(&model, &data, black_box(0.5), &[2.0, 1.5, 0.8], &cfg).unwrap()
        })
    });
    let (pm, pd) = poisson_dataset(50);
    c.bench_function("empirical_objective poisson n=50", |b| {
        b.iter(|| empirical_objective(&pm, &pd, black_box(0.5), &[1.0, 1.0], &cfg).unwrap())
    });
}

fn bench_estimating_equation(c: &mut Criterion) {
    let cfg = DpdConfig::default();
    let (model, data) = linear_dataset(200);
    let mut out = vec![0.0; 3];
    c.bench_function("estimating_equation normal n=200", |b| {
        b.iter(|| {
            estimating_equation(
                &model,
                &data,
                black_box(0.5),
                &[2.0, 1.5, 0.8],
                &cfg,
                &mut out,
            )
            .unwrap()
        })
    });
}

fn bench_bound(c: &mut Criterion) {
    c.bench_function("abp_lower_bound", |b| {
        b.iter(|| {
            BoundProblem {
                alpha: black_box(0.5),
                l0: 0.12,
                c: 1.0,
            }
            .abp_lower_bound()
            .unwrap()
        })
    });
}

fn bench_power_norm(c: &mut Criterion) {
    let cfg = DpdConfig::default();
    let poisson = UnivariateDensity::Poisson { mean: 55.0 };
    c.bench_function("power_norm poisson mean=55", |b| {
        b.iter(|| power_norm(&poisson, black_box(0.5), &cfg).unwrap())
    });
    let normal = UnivariateDensity::Normal { mean: 0.0, sd: 1.0 };
    c.bench_function("power_norm normal", |b| {
        b.iter(|| power_norm(&normal, black_box(0.5), &cfg).unwrap())
    });
}

criterion_group!(
    benches,
    bench_objective,
    bench_estimating_equation,
    bench_bound,
    bench_power_norm
);
criterion_main!(benches);
