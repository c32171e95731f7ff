//! Benchmarks for the data-parallel hot paths: kMeans fitting, batch
//! gradients, dataset encoding, and Gram matrices.
//!
//! With the default `parallel` feature each group also runs inside a
//! single-thread pool for an in-process scaling comparison. To compare
//! against the true sequential fallback, save a baseline and rerun without
//! default features:
//!
//! ```text
//! cargo bench -p bowrnn -- --save-baseline parallel
//! cargo bench -p bowrnn --no-default-features -- --baseline parallel
//! ```

use bowrnn::bownet::{Assignment, BowNetwork};
use bowrnn::codebook::{kmeans_fit, KMeansConfig};
use bowrnn::data::{FeatureSequence, LabeledSample};
use bowrnn::featmap::{FeatureMapSpec, MapKernel};
use bowrnn::kernels::gram_matrix;
use bowrnn::par;
use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn run_both<F: Fn() + Sync>(c: &mut Criterion, name: &str, f: F) {
    let mut group = c.benchmark_group(name);
    group.bench_function("default", |b| b.iter(&f));
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        group.bench_function("one_thread", |b| b.iter(|| pool.install(&f)));
    }
    group.finish();
}

fn random_frames(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, dim), |_| rng.random_range(-2.0..2.0))
}

fn bench_kmeans(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = random_frames(&mut rng, 2000, 16);
    let mut config = KMeansConfig::new(32, 1);
    config.restarts = 4;
    config.max_iterations = 15;
    run_both(c, "kmeans_fit", || {
        black_box(kmeans_fit(black_box(data.view()), &config).unwrap());
    });
}

fn training_batch(rng: &mut ChaCha8Rng, net: &BowNetwork, samples: usize) -> Vec<LabeledSample> {
    (0..samples)
        .map(|i| LabeledSample {
            channels: vec![
                FeatureSequence::new(random_frames(rng, 100, net.dim()), "bench").unwrap(),
            ],
            label: 1 + i % net.num_classes(),
        })
        .collect()
}

fn bench_batch_gradient(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = BowNetwork::random(
        16,
        64,
        5,
        1,
        Some(FeatureMapSpec::chi2(2, 0.5).unwrap()),
        2,
    )
    .unwrap();
    let batch = training_batch(&mut rng, &net, 32);
    run_both(c, "batch_gradient", || {
        black_box(net.batch_gradient(black_box(&batch)).unwrap());
    });
}

fn bench_encode_dataset(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = BowNetwork::random(16, 64, 5, 1, None, 3).unwrap();
    let batch = training_batch(&mut rng, &net, 64);
    run_both(c, "encode_dataset", || {
        let histograms = par::map_ordered(black_box(&batch), |sample| {
            net.encode_sample(&sample.channels, Assignment::Soft).unwrap()
        });
        black_box(histograms);
    });
}

fn bench_gram_matrix(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let histograms: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let mut h: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
            let sum: f64 = h.iter().sum();
            h.iter_mut().for_each(|v| *v /= sum);
            h
        })
        .collect();
    run_both(c, "gram_matrix", || {
        black_box(gram_matrix(MapKernel::Chi2, black_box(&histograms)).unwrap());
    });
}

criterion_group!(
    benches,
    bench_kmeans,
    bench_batch_gradient,
    bench_encode_dataset,
    bench_gram_matrix
);
criterion_main!(benches);
