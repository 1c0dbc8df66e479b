use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spp_teleport::channel::{resonance_wavelength, Interface};
use spp_teleport::counts::{bundled_table, chsh_s};
use spp_teleport::protocol::run_teleportation;
use spp_teleport::tomo::{
    expected_frequencies, monte_carlo_errors, qpt_inputs, qpt_reconstruct, qst_reconstruct_frequencies, QstOptions,
    Statistic,
};
use spp_teleport::{ChannelModel, FidelityBudget, HoleArrayGeometry, InputLabel, TableBlock, TableKind};

fn teleportation(c: &mut Criterion) {
    let model = ChannelModel::calibrated(&FidelityBudget::WITH_SPP, true).unwrap();
    let mut group = c.benchmark_group("run_teleportation");
    for shots in [1_000u64, 100_000] {
        group.bench_with_input(BenchmarkId::from_parameter(shots), &shots, |b, &shots| {
            b.iter(|| run_teleportation(InputLabel::D, &model, shots, 7).unwrap())
        });
    }
    group.finish();
}

fn tomography(c: &mut Criterion) {
    let model = ChannelModel::calibrated(&FidelityBudget::WITH_SPP, true).unwrap();
    let run = run_teleportation(InputLabel::D, &model, 1000, 1).unwrap();
    let freqs = expected_frequencies(&run.records[0].density_matrix, 3000.0).unwrap();
    c.bench_function("qst_linear", |b| {
        b.iter(|| qst_reconstruct_frequencies(black_box(&freqs), QstOptions::default()).unwrap())
    });
    c.bench_function("qst_ml", |b| {
        b.iter(|| qst_reconstruct_frequencies(black_box(&freqs), QstOptions { maximum_likelihood: true }).unwrap())
    });

    let pairs: Vec<_> = qpt_inputs()
        .iter()
        .map(|r| (r.clone(), spp_teleport::channel::depolarize(r, 0.8).unwrap()))
        .collect();
    c.bench_function("qpt", |b| b.iter(|| qpt_reconstruct(black_box(&pairs), false).unwrap()));
}

fn statistics(c: &mut Criterion) {
    c.bench_function("monte_carlo_fidelity_1000", |b| {
        b.iter(|| monte_carlo_errors(&[2746, 120], 1000, 1, |x| Statistic::StateFidelity.evaluate(x)).unwrap())
    });
    let table = bundled_table(TableKind::Chsh, TableBlock::WithoutSpp);
    c.bench_function("chsh_s", |b| b.iter(|| chsh_s(black_box(&table)).unwrap()));
}

fn resonance(c: &mut Criterion) {
    let geom = HoleArrayGeometry::sample();
    c.bench_function("resonance_gold_table", |b| {
        b.iter(|| resonance_wavelength(black_box(&geom), Interface::Substrate).unwrap())
    });
}

criterion_group!(benches, teleportation, tomography, statistics, resonance);
criterion_main!(benches);
