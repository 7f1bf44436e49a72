//! The data-parallel paths on the default rayon pool against the same
//! calls pinned to a one-thread pool. Built without the `parallel` feature
//! both variants run the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hitadv_core::attack::{AttackConfig, RegionSearchConfig};
use hitadv_core::classifier::{accuracy, train, TrainConfig};
use hitadv_core::cloud::{knn, local_curvatures, estimate_normals};
use hitadv_core::data::{sample_shape, DatasetSpec, ShapeFamily, ShapeSpec};
use hitadv_core::defense::{attack_dataset, AttackSpec, SuiteOptions};
use rayon::ThreadPoolBuilder;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("sequential", ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn geometry(c: &mut Criterion) {
    let cloud = sample_shape(&ShapeSpec {
        family: ShapeFamily::Composite,
        m: 4096,
        jitter: 0.005,
        seed: 1,
    })
    .unwrap();
    let mut g = c.benchmark_group("knn_normals_curvature_4096");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| {
                b.iter(|| {
                    let nbr = knn(&cloud, 10).unwrap();
                    let normals = estimate_normals(&cloud, &nbr).unwrap();
                    local_curvatures(&cloud, &normals, &nbr)
                })
            })
        });
    }
    g.finish();
}

fn batch(c: &mut Criterion) {
    let spec = DatasetSpec {
        families: vec![ShapeFamily::Sphere, ShapeFamily::Cube, ShapeFamily::Star, ShapeFamily::Torus],
        m: 128,
        train_per_class: 10,
        test_per_class: 2,
        ..Default::default()
    };
    let (train_set, test) = spec.generate().unwrap();
    let model = train(&train_set, &TrainConfig { epochs: 5, ..Default::default() }).unwrap().model;
    let attack = AttackSpec::HitAdv {
        attack: AttackConfig {
            binary_search_steps: 2,
            inner_iters: 20,
            ..Default::default()
        },
        region: RegionSearchConfig {
            n: 32,
            n_tilde: 8,
            ..Default::default()
        },
    };
    let opts = SuiteOptions::default();

    let mut g = c.benchmark_group("batch_forward");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| pool.install(|| b.iter(|| accuracy(&model, &train_set))));
    }
    g.finish();

    let mut g = c.benchmark_group("attack_dataset");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| pool.install(|| b.iter(|| attack_dataset(&model, &test, &attack, &opts).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, geometry, batch);
criterion_main!(benches);
