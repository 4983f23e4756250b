//! Hot-path benchmarks: channel sampling, one Monte Carlo LSFD batch, the
//! closed-form SINR evaluation, and one swarm iteration's worth of EE
//! objective calls.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use riscf::channel::sample_channel;
use riscf::closed_form::{closed_form_breakdowns, closed_form_optimal, se_closed_form};
use riscf::combining::{lsfd_statistics, CombinerKind};
use riscf::energy::PowerModel;
use riscf::experiment::EeObjective;
use riscf::rng;
use riscf::system::{zero_phases, RpMode};
use riscf_bench::desk_system;

fn bench_channel_sampling(c: &mut Criterion) {
    let system = desk_system();
    let phases = zero_phases(&system);
    let mut r = rng::stream(7, 0);
    c.bench_function("sample_channel_single_link", |b| {
        b.iter(|| {
            let real = sample_channel(
                &system.link_inputs(0, 0, 0),
                system.sqrts_view(0, 0, 0),
                &phases[0],
                &mut r,
                false,
            );
            black_box(real.h)
        })
    });
}

fn bench_mc_batch(c: &mut Criterion) {
    let system = desk_system();
    let phases = zero_phases(&system);
    c.bench_function("lsfd_statistics_256_trials", |b| {
        b.iter(|| {
            let stats = lsfd_statistics(
                &system,
                &phases,
                CombinerKind::Mr,
                RpMode::Average,
                256,
                9,
            )
            .unwrap();
            black_box(stats.g_mean)
        })
    });
}

fn bench_closed_form(c: &mut Criterion) {
    let system = desk_system();
    let phases = zero_phases(&system);
    c.bench_function("closed_form_se_all_ues", |b| {
        b.iter(|| black_box(se_closed_form(&system, &phases, RpMode::Average).unwrap()))
    });
    let bds = closed_form_breakdowns(&system, &phases, RpMode::Average).unwrap();
    c.bench_function("closed_form_optimal_weights", |b| {
        b.iter(|| black_box(closed_form_optimal(&bds[0], &system.p_data, 1.0).unwrap()))
    });
}

fn bench_ee_objective(c: &mut Criterion) {
    let system = desk_system();
    let objective =
        EeObjective::new(&system, PowerModel::default(), RpMode::Average, 0.0, 8, 5).unwrap();
    let theta = vec![0.25; objective.dim()];
    c.bench_function("ee_objective_eval", |b| {
        b.iter(|| black_box(objective.fitness(&theta).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_channel_sampling,
    bench_mc_batch,
    bench_closed_form,
    bench_ee_objective
);
criterion_main!(benches);
