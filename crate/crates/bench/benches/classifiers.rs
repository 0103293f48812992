use criterion::{criterion_group, criterion_main, Criterion};
use mqtt_ids_bench::prepared;
use mqtt_ids_core::ensembles::fit_model;
use mqtt_ids_core::{Classifier, MethodKind, ModelSpec};

fn fit_each_method(c: &mut Criterion) {
    let p = prepared(300, 7);
    let (x, y, k) = (p.train.features(), p.train.labels(), p.train.n_classes());
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for kind in MethodKind::ALL {
        let spec = ModelSpec::new(kind, 1);
        group.bench_function(kind.label(), |b| {
            b.iter(|| fit_model(&spec, x, y, k).unwrap())
        });
    }
    group.finish();
}

fn predict_each_method(c: &mut Criterion) {
    let p = prepared(300, 7);
    let (x, y, k) = (p.train.features(), p.train.labels(), p.train.n_classes());
    let mut group = c.benchmark_group("predict");
    group.sample_size(20);
    for kind in MethodKind::ALL {
        let model = fit_model(&ModelSpec::new(kind, 1), x, y, k).unwrap();
        group.bench_function(kind.label(), |b| {
            b.iter(|| model.predict(p.test.features()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fit_each_method, predict_each_method);
criterion_main!(benches);
