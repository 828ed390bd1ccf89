use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hiermargin::margins::{build_margin_table, MarginConfig};
use hiermargin::pairloss::PairSet;
use hiermargin::{knn, loss_and_grad, recall_at_k, Embedding};
use hiermargin_bench::{balanced_taxonomy, class_embeddings, gallery, rng, unit};

fn lcs(c: &mut Criterion) {
    let t = balanced_taxonomy(&[4, 4, 4, 4]);
    let leaves = t.leaves();
    c.bench_function("lcs all leaf pairs 256 leaves", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for &u in &leaves {
                for &v in &leaves {
                    if u != v {
                        acc += t.dissimilarity(u, v).unwrap();
                    }
                }
            }
            black_box(acc)
        })
    });
}

fn retrieval(c: &mut Criterion) {
    let mut r = rng(1);
    let t = balanced_taxonomy(&[4, 5]);
    let mut group = c.benchmark_group("knn");
    for n in [1_000, 10_000] {
        let g = gallery(&mut r, &t, n, 32);
        let q = unit(&mut r, 32);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| knn(black_box(&q), &g, 10, None).unwrap())
        });
    }
    group.finish();
    let g = gallery(&mut r, &t, 1_000, 32);
    c.bench_function("recall_at_k 1000 self-queries", |b| {
        b.iter(|| recall_at_k(&g, &g, &t, &[1, 2, 4, 8], &[1, 2]).unwrap())
    });
}

fn loss(c: &mut Criterion) {
    let mut r = rng(2);
    let t = balanced_taxonomy(&[3, 4]);
    let table = build_margin_table(&t, &MarginConfig::default(), 1, None).unwrap();
    // The default batch shape: 3 groups of 2 classes, 4 samples each.
    let leaves: Vec<_> = t.leaves().into_iter().take(6).flat_map(|l| [l; 4]).collect();
    let embs: Vec<Embedding> = leaves.iter().map(|_| unit(&mut r, 32)).collect();
    let pairs = PairSet::enumerate(&leaves, &table).unwrap();
    c.bench_function("loss_and_grad batch 24 dim 32", |b| {
        b.iter(|| loss_and_grad(black_box(&pairs), &embs))
    });
}

fn margins(c: &mut Criterion) {
    let mut r = rng(3);
    let t = balanced_taxonomy(&[5, 6]);
    let embs = class_embeddings(&mut r, &t, 20, 32);
    let mut group = c.benchmark_group("margin table 30 classes x 20");
    group.sample_size(20);
    group.bench_function("full", |b| {
        b.iter(|| build_margin_table(&t, &MarginConfig::default(), 2, Some(&embs)).unwrap())
    });
    let capped = MarginConfig {
        visual_pair_cap: Some(50),
        ..Default::default()
    };
    group.bench_function("pair cap 50", |b| {
        b.iter(|| build_margin_table(&t, &capped, 2, Some(&embs)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, lcs, retrieval, loss, margins);
criterion_main!(benches);
