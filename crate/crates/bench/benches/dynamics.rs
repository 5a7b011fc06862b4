use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ricker_allee::sweep::{basin_grid, basin_settings, GridSpec, SweepRunner};
use ricker_allee::{detect_attractor, CoupledParams, DetectorSettings, PatchState};

fn step(c: &mut Criterion) {
    let cp = CoupledParams::normalized(0.87, 0.01).unwrap();
    c.bench_function("coupled step", |b| {
        let mut s = PatchState::new(0.38, 0.58);
        b.iter(|| {
            s = cp.apply(black_box(s));
            s
        })
    });
    c.bench_function("advance 10k", |b| {
        b.iter(|| {
            cp.advance(black_box(PatchState::new(0.38, 0.58)), 10_000)
                .unwrap()
        })
    });
}

fn detector(c: &mut Criterion) {
    let cp = CoupledParams::normalized(0.63, 0.01).unwrap();
    let settings = DetectorSettings::default();
    c.bench_function("detect two-cycle", |b| {
        b.iter(|| detect_attractor(&cp, black_box(PatchState::new(0.38, 0.58)), &settings).unwrap())
    });
}

fn basin(c: &mut Criterion) {
    let cp = CoupledParams::normalized(0.887, 0.01).unwrap();
    let grid = GridSpec::square_ic(0.0, 1.5, 40).unwrap();
    let settings = basin_settings();
    let mut group = c.benchmark_group("basin 40x40");
    group.sample_size(10);
    for workers in [1, 4] {
        let runner = SweepRunner::new(workers);
        group.bench_function(format!("{workers} workers"), |b| {
            b.iter(|| basin_grid(&runner, &cp, &grid, &settings).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, step, detector, basin);
criterion_main!(benches);
