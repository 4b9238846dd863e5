use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dispersive_ofdm::analysis::{interference_matrices, interference_matrices_reference};
use dispersive_ofdm::channels::synth_exponential;
use dispersive_ofdm::montecarlo::{simulate_stream, SimConfig};
use dispersive_ofdm::teq::design_mssnr;
use dispersive_ofdm::{analyze, OfdmConfig, Scheme, SignalStats};

fn analysis(c: &mut Criterion) {
    let stats = SignalStats::new(1.0, 1e-4).unwrap();
    let mut group = c.benchmark_group("analyze");
    for (n, mu, nu) in [(64, 8, 300), (512, 32, 1500)] {
        let cfg = OfdmConfig::new(n, mu, Scheme::Cp, 4).unwrap();
        let ch = synth_exponential(nu, 0.005, 1).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("N{n}_nu{nu}")),
            &ch,
            |b, ch| b.iter(|| analyze(black_box(&cfg), black_box(ch), &stats).unwrap()),
        );
    }
    group.finish();

    let cfg = OfdmConfig::new(64, 8, Scheme::ZpOla, 4).unwrap();
    let ch = synth_exponential(300, 0.005, 1).unwrap();
    let mut group = c.benchmark_group("operators_N64");
    group.bench_function("fft", |b| {
        b.iter(|| interference_matrices(black_box(&cfg), black_box(&ch)))
    });
    group.bench_function("dense", |b| {
        b.iter(|| interference_matrices_reference(black_box(&cfg), black_box(&ch)))
    });
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let cfg = OfdmConfig::new(64, 8, Scheme::Cp, 2).unwrap();
    let ch = synth_exponential(200, 0.01, 2).unwrap();
    let sim = SimConfig::new(2000, 1, SignalStats::new(1.0, 1e-3).unwrap());
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("N64_2000_blocks", |b| {
        b.iter(|| simulate_stream(black_box(&cfg), black_box(&ch), &sim).unwrap())
    });
    group.finish();
}

fn teq(c: &mut Criterion) {
    let ch = synth_exponential(1500, 0.005, 3).unwrap();
    c.bench_function("design_mssnr_T16_nu1500", |b| {
        b.iter(|| design_mssnr(black_box(&ch), 16, 33, 10).unwrap())
    });
}

criterion_group!(benches, analysis, simulation, teq);
criterion_main!(benches);
