//! One worker against the whole machine for the hot kernels.
//!
//! `cargo bench -p podsketch` compares a single-thread pool with one sized
//! to the available cores; `cargo bench -p podsketch --no-default-features`
//! runs the sequential build, where both variants execute inline.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use podsketch::isma::{isma_run, IsmaConfig};
use podsketch::matcore::{pod_via_gram, TruncatedFactor};
use podsketch::merge::block_merge;
use podsketch::par;
use podsketch::synth::{low_rank_plus_noise, random_orthonormal};

fn thread_counts() -> Vec<usize> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    if all > 1 {
        vec![1, all]
    } else {
        vec![1]
    }
}

fn gram(c: &mut Criterion) {
    let a = low_rank_plus_noise(4000, 400, &[10.0, 5.0, 2.0], 0.01, 1);
    let mut group = c.benchmark_group("gram");
    group.sample_size(10);
    for t in thread_counts() {
        group.bench_with_input(BenchmarkId::new("4000x400", t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || black_box(par::gram(a.as_mat()))))
        });
        group.bench_with_input(BenchmarkId::new("exact_k5", t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || black_box(pod_via_gram(&a, 5).unwrap())))
        });
    }
    group.finish();
}

fn isma(c: &mut Criterion) {
    let a = low_rank_plus_noise(2000, 4000, &[10.0, 8.0, 6.0, 4.0, 2.0], 0.01, 2);
    let mut cfg = IsmaConfig::new(5);
    cfg.seed = 3;
    let mut group = c.benchmark_group("isma");
    group.sample_size(10);
    for t in thread_counts() {
        group.bench_with_input(BenchmarkId::new("2000x4000_k5", t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || black_box(isma_run(&a, &cfg).unwrap())))
        });
    }
    group.finish();
}

fn merge(c: &mut Criterion) {
    let m = 20_000;
    let r = 30;
    let f1 = TruncatedFactor::new(
        random_orthonormal(m, r, 4),
        nalgebra::DVector::from_fn(r, |i, _| 30.0 - i as f64),
        None,
    )
    .unwrap();
    let f2 = TruncatedFactor::new(
        random_orthonormal(m, r, 5),
        nalgebra::DVector::from_fn(r, |i, _| 20.0 - 0.5 * i as f64),
        None,
    )
    .unwrap();
    let mut group = c.benchmark_group("merge");
    group.sample_size(20);
    for t in thread_counts() {
        group.bench_with_input(BenchmarkId::new("20000_r30", t), &t, |b, &t| {
            b.iter(|| par::with_threads(t, || black_box(block_merge(&f1, &f2, r).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, gram, isma, merge);
criterion_main!(benches);
