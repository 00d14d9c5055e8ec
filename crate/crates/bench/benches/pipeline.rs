use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use icscore::analytics::score_corpus;
use icscore::gbt::{self, GbtParams};
use icscore::syntax::{enumerate_subtree_paths, DEFAULT_MAX_EDGES};
use icscore::{ModelSpec, TrainedModel};
use icscore_bench::{labeled, labels, resources, space, unlabeled};

fn subtrees(c: &mut Criterion) {
    let docs = labeled(200);
    let mut group = c.benchmark_group("subtree_paths");
    group.throughput(Throughput::Elements(docs.len() as u64));
    for max_edges in [2, DEFAULT_MAX_EDGES] {
        group.bench_with_input(BenchmarkId::from_parameter(max_edges), &max_edges, |b, &k| {
            b.iter(|| {
                for d in &docs {
                    black_box(enumerate_subtree_paths(d, k));
                }
            })
        });
    }
    group.finish();
}

fn vectorize(c: &mut Criterion) {
    let docs = labeled(400);
    let space = space(&docs);
    let mut group = c.benchmark_group("vectorize");
    group.throughput(Throughput::Elements(docs.len() as u64));
    group.bench_function("v_postags", |b| b.iter(|| black_box(space.vectorize_all(&docs))));
    group.finish();
}

fn boosting(c: &mut Criterion) {
    let docs = labeled(300);
    let space = space(&docs);
    let rows: Vec<Vec<f64>> = space.vectorize_all(&docs).into_iter().map(|v| v.values).collect();
    let y = labels(&docs);
    let ids = space.ids();
    let params = GbtParams {
        n_rounds: 50,
        ..GbtParams::default()
    };

    let mut group = c.benchmark_group("gbt");
    group.sample_size(10);
    group.bench_function("train_50_rounds", |b| {
        b.iter(|| black_box(gbt::train(&rows, &y, &ids, &params, 0).unwrap()))
    });
    let model = gbt::train(&rows, &y, &ids, &params, 0).unwrap().model;
    group.throughput(Throughput::Elements(rows.len() as u64));
    group.bench_function("predict_proba", |b| {
        b.iter(|| {
            for r in &rows {
                black_box(model.predict_proba(r).unwrap());
            }
        })
    });
    group.finish();
}

fn scoring(c: &mut Criterion) {
    let train = labeled(300);
    let spec = ModelSpec {
        params: GbtParams {
            n_rounds: 50,
            ..GbtParams::default()
        },
        ..ModelSpec::default()
    };
    let trained: TrainedModel = spec.fit(&train, &labels(&train), &resources()).unwrap().model;
    let docs = unlabeled(2000);

    let mut group = c.benchmark_group("score_corpus");
    group.sample_size(10);
    group.throughput(Throughput::Elements(docs.len() as u64));
    group.bench_function("chunk_1024", |b| {
        b.iter_batched(
            || docs.clone(),
            |batch| black_box(score_corpus(batch, &trained, 1024).count()),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, subtrees, vectorize, boosting, scoring);
criterion_main!(benches);
