use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use landing_core::blackbox::Normalization;
use landing_core::greybox::{predict_landing, predict_landing_with_gradient};
use landing_core::harness::nominal_incoming;
use landing_core::{EnvConfig, FeasibleSet, GreyboxParams, InterceptionPolicy, MlpModel};

fn greybox(c: &mut Criterion) {
    let incoming = nominal_incoming(&EnvConfig::default());
    let params = GreyboxParams::default();
    let phi = InterceptionPolicy::new(0.15, 0.1);
    c.bench_function("greybox_predict", |b| b.iter(|| predict_landing(black_box(&phi), &incoming, &params).unwrap()));
    c.bench_function("greybox_predict_with_gradient", |b| {
        b.iter(|| predict_landing_with_gradient(black_box(&phi), &incoming, &params).unwrap())
    });
}

fn mlp(c: &mut Criterion) {
    let k = FeasibleSet::default();
    let norm = Normalization {
        input_center: k.center(),
        input_half_width: k.half_widths(),
        ..Normalization::identity()
    };
    let model = MlpModel::random(norm, &mut ChaCha8Rng::seed_from_u64(0));
    let phi = InterceptionPolicy::new(0.15, 0.1);
    c.bench_function("mlp_forward", |b| b.iter(|| model.forward(black_box(&phi))));
    c.bench_function("mlp_jacobian", |b| b.iter(|| model.jacobian(black_box(&phi))));
}

criterion_group!(benches, greybox, mlp);
criterion_main!(benches);
