use std::hint::black_box;

use biasctx::backtranslate::{backtranslate_pool, BtOptions, IdentityProvider};
use biasctx::dataset::augmentation_pool;
use biasctx::{
    build_all_banc, build_all_target_contexts, build_task_dataset, make_folds, Augmentations,
    BiasKind, BtPolicy, DatasetOptions, SplitRatios, Task,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn contexts(c: &mut Criterion) {
    let mut group = c.benchmark_group("contexts");
    for events in [100, 300] {
        let corpus = biasctx_bench::corpus(events);
        group.bench_with_input(BenchmarkId::new("banc", events), &corpus, |b, corpus| {
            b.iter(|| build_all_banc(black_box(corpus), BiasKind::Inf, " "))
        });
        group.bench_with_input(BenchmarkId::new("target", events), &corpus, |b, corpus| {
            b.iter(|| {
                build_all_target_contexts(black_box(corpus), BiasKind::Inf, None, " ").unwrap()
            })
        });
    }
    group.finish();
}

fn datasets(c: &mut Criterion) {
    let corpus = biasctx_bench::corpus(100);
    let plan = make_folds(&corpus, 10, SplitRatios::default(), 1).unwrap();
    let opts = DatasetOptions {
        aug: Augmentations::ALL,
        fraction: 100,
        ..DatasetOptions::regular(Task::InfOth, 1)
    };
    c.bench_function("dataset/fusion_fold", |b| {
        b.iter(|| build_task_dataset(black_box(&corpus), &plan, 0, &opts, None).unwrap())
    });

    let train = corpus.subset(&plan.folds[0].train);
    let pool = augmentation_pool(&train, Augmentations::ALL, None, " ");
    let provider = IdentityProvider::new();
    let options = BtOptions::default();
    c.bench_function("backtranslate/identity_pool", |b| {
        b.iter(|| {
            backtranslate_pool(black_box(&pool), BtPolicy::BothKinds, &provider, &options).unwrap()
        })
    });
}

criterion_group!(benches, contexts, datasets);
criterion_main!(benches);
