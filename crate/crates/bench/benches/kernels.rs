use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use strata::column::Column;
use strata::engine::{Engine, PreparedRun};
use strata::hydro::{
    advect_substepped, build_flow_field, vertical_mixing, BoundaryState, CellField, FlowInputs, HydroParams,
    MixingForcing,
};
use strata::synth::{fixture, Preset, DEFAULT_SEED};
use strata::thermal::diffuse_scalar;

fn rajae() -> PreparedRun {
    fixture(Preset::Rajae, DEFAULT_SEED).unwrap().prepared().unwrap()
}

/// 45-layer stratified column, warm on top.
fn column() -> Column {
    let n = 45;
    let thick = vec![1.0; n];
    let area: Vec<f64> = (0..n).map(|k| 5e6 * (1.0 - k as f64 / n as f64)).collect();
    let temp = (0..n).map(|k| 26.0 - 14.0 * (k as f64 / n as f64).sqrt()).collect();
    let oxy = (0..n).map(|k| 9.0 - 0.15 * k as f64).collect();
    Column::from_layers(&thick, &area, 100.0, temp, oxy, vec![2.0; n])
}

fn kernels(c: &mut Criterion) {
    let col = column();
    let kz = vec![2e-5; col.len() - 1];
    c.bench_function("diffuse_scalar 45 layers", |b| {
        b.iter_batched(
            || col.temp.clone(),
            |mut x| diffuse_scalar(&col, &kz, 3600.0, black_box(&mut x)).unwrap(),
            BatchSize::SmallInput,
        )
    });

    let p = HydroParams::default();
    let f = MixingForcing {
        wind_speed: 6.0,
        buoyancy_flux: -2e-8,
        inflow_power: 1e-5,
        carried_energy: 0.0,
    };
    c.bench_function("vertical_mixing 45 layers", |b| {
        b.iter_batched(
            column,
            |mut col| vertical_mixing(&mut col, &f, &p, 3600.0).unwrap(),
            BatchSize::SmallInput,
        )
    });

    let run = rajae();
    let grid = &*run.grid;
    let e = run.config.run.initial_surface_elevation_m;
    let field = CellField::uniform(grid, e, 18.0, 8.0, 2.0);
    let nl = grid.layer_count();
    let mut inflow = vec![0.0; nl];
    let mut withdrawal = vec![0.0; nl];
    let k = grid.layer_containing(e).unwrap();
    inflow[k + 2] = 20.0;
    withdrawal[nl - 5] = 20.0;
    let evaporation = vec![0.0; grid.segment_count()];
    let flow = build_flow_field(
        grid,
        &FlowInputs {
            surface_m: e,
            volumes: Some(&field.volume),
            inflow: &inflow,
            withdrawal: &withdrawal,
            evaporation: &evaporation,
            through: None,
            dt: 3600.0,
        },
    )
    .unwrap();
    let boundary = BoundaryState {
        temp: 15.0,
        oxygen: 9.0,
        bod: 3.0,
    };
    c.bench_function("advect 95x45", |b| {
        b.iter_batched(
            || field.clone(),
            |mut f| advect_substepped(&mut f, &flow, &boundary, 3600.0).unwrap(),
            BatchSize::LargeInput,
        )
    });

    let engine = Engine::new(&run);
    let dt = run.config.run.dt_seconds;
    c.bench_function("engine step 95x45", |b| {
        b.iter_batched(
            || run.initial_state(),
            |mut s| engine.step(&mut s, dt).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
