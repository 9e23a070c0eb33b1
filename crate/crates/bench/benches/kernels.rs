use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use radgest_bench::fixture;
use radgest_core::fft::FftPlan;
use radgest_core::ops::conv::Conv2dOpts;
use radgest_core::safmn::{SafmnConfig, SafmnModel};
use radgest_core::Tape;
use rand::SeedableRng;

fn conv(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv2d");
    let cases = [
        ("dense3x3", [36, 36, 3, 3], Conv2dOpts::same3x3()),
        ("pointwise", [36, 36, 1, 1], Conv2dOpts::default()),
        ("depthwise", [36, 1, 3, 3], Conv2dOpts::depthwise3x3(36)),
    ];
    for (name, w, opts) in cases {
        let x = fixture(&[4, 36, 16, 64]);
        let w = fixture(&w);
        g.bench_function(BenchmarkId::new("forward_backward", name), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let xv = tape.param(x.clone());
                let wv = tape.param(w.clone());
                let y = tape.conv2d(xv, wv, None, opts).unwrap();
                let s = tape.sum(y);
                black_box(tape.backward(s).unwrap());
            })
        });
    }
    g.finish();
}

fn fft(c: &mut Criterion) {
    let mut g = c.benchmark_group("fft");
    for n in [32, 64, 246, 492] {
        let plan = FftPlan::new(n);
        let re0: Vec<f64> = fixture(&[n]).into_data();
        g.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| {
                let (mut re, mut im) = (re0.clone(), vec![0.0; n]);
                plan.forward(&mut re, &mut im);
                black_box((re, im));
            })
        });
    }
    g.finish();
}

fn safmn(c: &mut Criterion) {
    let mut g = c.benchmark_group("safmn_forward");
    g.sample_size(10);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let model = SafmnModel::new(SafmnConfig::default(), &mut rng).unwrap();
    for (name, shape) in [("desk", [2, 3, 8, 32]), ("full", [2, 5, 16, 246])] {
        let lr = fixture(&shape);
        g.bench_function(name, |b| b.iter(|| black_box(model.super_resolve(&lr).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, conv, fft, safmn);
criterion_main!(benches);
