use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use imvcdc::autoencoder::{LatentBank, LatentStatus, TrainConfig};
use imvcdc::data::{generate_mask, generate_synthetic, SyntheticSpec};
use imvcdc::diffusion::{DenoiserConfig, DiffusionConfig, DiffusionModel};
use imvcdc::metrics::kmeans;
use imvcdc::nn::{numeric_gradient, AdamW, Graph, Mlp, MlpSpec, Activation, OutputActivation, ParamStore, Tensor};
use imvcdc::par;
use std::hint::black_box;

fn modes<F: Fn()>(c: &mut Criterion, group: &str, size: usize, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_with_input(BenchmarkId::new("parallel", size), &size, |b, _| b.iter(&f));
    g.bench_with_input(BenchmarkId::new("sequential", size), &size, |b, _| {
        b.iter(|| par::with_sequential(&f))
    });
    g.finish();
}

fn data(n: usize) -> imvcdc::data::MultiViewDataset {
    generate_synthetic(&SyntheticSpec {
        n,
        seed: 1,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn bench_kmeans(c: &mut Criterion) {
    for n in [1_000, 10_000] {
        let x = data(n).view(0).clone();
        modes(c, "kmeans", n, || {
            black_box(kmeans(&x, 4, 7, 50).unwrap());
        });
    }
}

fn bench_matmul(c: &mut Criterion) {
    for n in [64, 256] {
        let a = Tensor::matrix(n, n, (0..n * n).map(|i| (i as f64 * 0.01).sin()).collect());
        let b = Tensor::matrix(n, n, (0..n * n).map(|i| (i as f64 * 0.02).cos()).collect());
        modes(c, "matmul", n, || {
            black_box(a.matmul(&b).unwrap());
        });
    }
}

fn bench_impute(c: &mut Criterion) {
    let n = 400;
    let mask = generate_mask(n, 2, 0.5, 3).unwrap();
    let d = data(n);
    let z: Vec<Tensor> = d.views().iter().map(|v| v.gather_rows(&(0..n).collect::<Vec<_>>())).collect();
    let dz = z[0].cols();
    let status = (0..n)
        .flat_map(|i| (0..2).map(move |v| (i, v)))
        .map(|(i, v)| if mask.observed(i, v) { LatentStatus::Observed } else { LatentStatus::Absent })
        .collect();
    let bank = LatentBank::new(z, status).unwrap();
    let cfg = DiffusionConfig {
        steps: 50,
        net: DenoiserConfig::default(),
        ..DiffusionConfig::default()
    };
    let mut model = DiffusionModel::new(2, dz, &cfg, 1).unwrap();
    let train = TrainConfig {
        epochs: 1,
        batch_size: 64,
        optimizer: AdamW::default(),
    };
    model.train(&bank, &train, 2).unwrap();
    modes(c, "impute", n, || {
        black_box(model.impute(&bank, 5).unwrap());
    });
}

fn bench_numeric_gradient(c: &mut Criterion) {
    let mut store = ParamStore::new();
    let mlp = Mlp::new(
        &mut store,
        "m",
        MlpSpec::new(vec![8, 16, 4], Activation::Gelu, OutputActivation::Identity),
        1,
    )
    .unwrap();
    let x = Tensor::matrix(32, 8, (0..256).map(|i| (i as f64 * 0.1).sin()).collect());
    let loss = |g: &mut Graph, s: &ParamStore| {
        let v = g.input(x.clone())?;
        let y = mlp.forward(g, s, v)?;
        let sq = g.square(y)?;
        g.sum(sq)
    };
    modes(c, "numeric_gradient", store.num_scalars(), || {
        black_box(numeric_gradient(&store, 1e-5, &loss).unwrap());
    });
}

criterion_group!(benches, bench_kmeans, bench_matmul, bench_impute, bench_numeric_gradient);
criterion_main!(benches);
