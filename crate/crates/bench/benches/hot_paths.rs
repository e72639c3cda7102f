//! Hot paths of a simulated round: quantization, the wire codec, a node's
//! local period, and a full federated round.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use fedpaq_core::data::{gen_synthetic_logreg, partition_iid};
use fedpaq_core::fed::{local_period, StepsizeSchedule};
use fedpaq_core::fed::{
    run, BandwidthSpec, CostSpec, InitSpec, ProblemSpec, RunConfig, ScheduleKind,
};
use fedpaq_core::objectives::Objective;
use fedpaq_core::quantizer::{decode, dequantize, encode, quantize, QuantizerMode};
use fedpaq_core::rng::{stream, Purpose};
use fedpaq_core::theory;
use rand::Rng;

fn bench_quantizer(c: &mut Criterion) {
    let mut group = c.benchmark_group("quantizer");
    let mut rng = stream(1, Purpose::Quantize, 0, 0);
    let x: Vec<f64> = (0..1024)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    for s in [1u32, 16] {
        group.bench_function(format!("quantize_p1024_s{s}"), |b| {
            b.iter(|| quantize(black_box(&x), s, &mut rng).unwrap())
        });
        let q = quantize(&x, s, &mut rng).unwrap();
        group.bench_function(format!("codec_round_trip_p1024_s{s}"), |b| {
            b.iter(|| {
                let bytes = encode(black_box(&q), 32).unwrap();
                dequantize(&decode(&bytes).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_local_period(c: &mut Criterion) {
    let prob = gen_synthetic_logreg(2000, 100, 0.1, 5).unwrap();
    let shards = partition_iid(&prob.data, 20, 5).unwrap();
    let obj = Objective::logistic(0.1).unwrap();
    let schedule = StepsizeSchedule::Constant { eta: 0.05 };
    let x = vec![0.0; 100];
    c.bench_function("local_period_tau5_batch10_p100", |b| {
        b.iter_batched(
            || stream(2, Purpose::LocalSgd, 0, 0),
            |mut rng| local_period(&x, &shards[0], &obj, 5, 10, &schedule, 0, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_full_round(c: &mut Criterion) {
    let config = RunConfig {
        problem: ProblemSpec::SyntheticLogReg {
            samples: 10_000,
            dim: 100,
            lambda: 0.1,
            data_seed: 7,
        },
        nodes: 50,
        participants: 25,
        local_steps: 5,
        rounds: 1,
        batch: 10,
        quantizer: QuantizerMode::LowPrecision { levels: 1 },
        schedule: ScheduleKind::Decay { coeff: 0.1 },
        cost: CostSpec {
            bandwidth: BandwidthSpec::TargetRatio(100.0),
            shift_s_per_grad: 0.001,
            scale: 1000.0,
            float_bits: 32,
        },
        seed: 3,
        init: InitSpec::Zero,
        shadow: false,
        threads: 0,
    };
    let mut group = c.benchmark_group("round");
    group.sample_size(10);
    group.bench_function("single_round_n50_r25_tau5_p100", |b| {
        b.iter(|| run(black_box(&config)).unwrap())
    });
    group.finish();
}

fn bench_theory(c: &mut Criterion) {
    c.bench_function("strongly_convex_constants_and_bound", |b| {
        b.iter(|| {
            let consts = theory::strongly_convex_constants(1.118, 50, 25, 0.4, 0.1, 0.5).unwrap();
            let k0 = theory::strongly_convex_k0(0.4, 0.1, consts.b1, 50, 5).unwrap();
            theory::strongly_convex_bound(k0 + 100, k0, 5, &consts, 1.0).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_quantizer,
    bench_local_period,
    bench_full_round,
    bench_theory
);
criterion_main!(benches);
