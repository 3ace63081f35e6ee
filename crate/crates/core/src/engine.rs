//! Time stepping: forcing sampling, routing, transport, surface exchange,
//! vertical mixing and oxygen kinetics in a fixed operator order.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::column::Column;
use crate::config::{interpolate_profile, load_profile, ConfigError, ProfileRow, RunConfig};
use crate::forcing::{ForcingError, ForcingSeries};
use crate::grid::{load_bathymetry, AreaVolumeCurve, Grid};
use crate::hydro::{
    build_flow_field, elevation_for_volume, flow_surface_layer, inflow_placement,
    kernel_weights, thermal_expansion, vertical_mixing, water_density, BoundaryState, CellField,
    Constituent, FlowInputs, HydroError, MixingForcing, SurfaceState, Transport, GRAVITY, RHO_REF,
};
use crate::oxygen::{do_saturation, kinetics_column, KineticsAudit, OxygenError};
use crate::thermal::{apply_surface_flux, surface_heat_flux, HeatFluxBreakdown, RHO_CP};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const STATION_HEADER: &str = "day,station,depth_m,temp_c,do_mgl";
pub const SNAPSHOT_HEADER: &str =
    "day,segment,distance_from_dam_m,layer,elevation_m,temp_c,do_mgl,bod_mgl";
pub const BALANCE_HEADER: &str = "day,volume_m3,heat_j,do_kg";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("day {day}: {source}")]
    Hydro { day: f64, source: HydroError },
    #[error("day {day}: {source}")]
    Oxygen { day: f64, source: OxygenError },
    #[error("day {day}: {source}")]
    Forcing { day: f64, source: ForcingError },
    #[error("writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Inputs loaded once and shared by any number of runs.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub config: RunConfig,
    pub grid: Arc<Grid>,
    pub forcing: Arc<ForcingSeries>,
    pub initial_profile: Option<Arc<Vec<ProfileRow>>>,
}

impl PreparedRun {
    /// Reads the grid, forcing and initial profile named by the config.
    pub fn load(config: RunConfig) -> Result<Self, ConfigError> {
        let bathy = config.resolve(&config.inputs.bathymetry);
        let grid = load_bathymetry(&bathy).map_err(|source| ConfigError::Grid {
            path: bathy.clone(),
            source,
        })?;
        let forcing = ForcingSeries::load(
            config.resolve(&config.inputs.inflow),
            config.resolve(&config.inputs.met),
            config.resolve(&config.inputs.withdrawal),
        )?;
        let profile = match &config.run.initial_profile {
            Some(p) => Some(Arc::new(load_profile(&config.resolve(p))?)),
            None => None,
        };
        Self::new(config, Arc::new(grid), Arc::new(forcing), profile)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::load(RunConfig::load(path)?)
    }

    pub fn new(
        config: RunConfig,
        grid: Arc<Grid>,
        forcing: Arc<ForcingSeries>,
        initial_profile: Option<Arc<Vec<ProfileRow>>>,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        let (first, last) = forcing.horizon();
        if config.run.start_day < first || config.run.end_day > last {
            return Err(ConfigError::Invalid(format!(
                "run [{}, {}] outside forcing horizon [{first}, {last}]",
                config.run.start_day, config.run.end_day
            )));
        }
        for (name, id) in &config.stations {
            if grid.segment_position(*id).is_none() {
                return Err(ConfigError::Invalid(format!(
                    "station `{name}` references unknown segment {id}"
                )));
            }
        }
        let e = config.run.initial_surface_elevation_m;
        if !(e > grid.datum_elevation_m() && e <= grid.top_elevation_m()) {
            return Err(ConfigError::Invalid(format!(
                "initial surface {e} m outside grid range"
            )));
        }
        Ok(Self {
            config,
            grid,
            forcing,
            initial_profile,
        })
    }

    /// Same inputs with a different configuration.
    pub fn with_config(&self, config: RunConfig) -> Result<Self, ConfigError> {
        Self::new(
            config,
            self.grid.clone(),
            self.forcing.clone(),
            self.initial_profile.clone(),
        )
    }

    /// Same grid and configuration with different forcing.
    pub fn with_forcing(&self, forcing: ForcingSeries) -> Result<Self, ConfigError> {
        Self::new(
            self.config.clone(),
            self.grid.clone(),
            Arc::new(forcing),
            self.initial_profile.clone(),
        )
    }

    /// Initial field per the config.
    pub fn initial_state(&self) -> State {
        let r = &self.config.run;
        let e = r.initial_surface_elevation_m;
        let grid = &self.grid;
        let mut field = CellField::uniform(grid, e, r.initial_temp_c, r.initial_do_mgl, r.initial_bod_mgl);
        if let Some(rows) = &self.initial_profile {
            for i in 0..grid.segment_count() {
                for k in 0..grid.layer_count() {
                    let c = grid.index(i, k);
                    let h = grid.wet_thickness(k, e);
                    let depth = e - grid.layer_bottom(k) - 0.5 * h;
                    let (t, x, l) = interpolate_profile(rows, depth.max(0.0));
                    field.temp[c] = t;
                    field.oxygen[c] = x;
                    field.bod[c] = l;
                }
            }
        }
        State {
            time_days: r.start_day,
            surface: SurfaceState {
                surface_elevation_m: e,
            },
            field,
            carried_energy: vec![0.0; grid.segment_count()],
        }
    }
}

/// Mutable simulation state.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time_days: f64,
    pub surface: SurfaceState,
    pub field: CellField,
    /// Unused mixing energy per segment, J m-2.
    pub carried_energy: Vec<f64>,
}

/// Boundary exchange accumulated over a step or run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundaryTotals {
    pub inflow_volume: f64,
    pub outflow_volume: f64,
    /// Advected heat in minus out, J.
    pub advected_heat: f64,
    /// Surface heat exchange, J.
    pub surface_heat: f64,
    /// Advected oxygen in minus out, g.
    pub advected_oxygen: f64,
    pub kinetics: KineticsAudit,
}

impl BoundaryTotals {
    fn add(&mut self, o: &BoundaryTotals) {
        self.inflow_volume += o.inflow_volume;
        self.outflow_volume += o.outflow_volume;
        self.advected_heat += o.advected_heat;
        self.surface_heat += o.surface_heat;
        self.advected_oxygen += o.advected_oxygen;
        self.kinetics.add(&o.kinetics);
    }
}

/// Diagnostics from one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub totals: BoundaryTotals,
    pub substeps: usize,
    /// Largest density inversion left by vertical mixing, kg m-3.
    pub max_inversion: f64,
    pub spill_m3s: f64,
}

/// Immutable context for stepping a state.
pub struct Engine<'a> {
    pub run: &'a PreparedRun,
    curve: AreaVolumeCurve,
}

impl<'a> Engine<'a> {
    pub fn new(run: &'a PreparedRun) -> Self {
        Self {
            run,
            curve: run.grid.area_volume_curve(),
        }
    }

    fn hydro_err(day: f64) -> impl Fn(HydroError) -> EngineError {
        move |source| EngineError::Hydro { day, source }
    }

    /// Advances `state` by `dt` seconds.
    ///
    /// Order: sample forcing at the step midpoint, surface heat budget (which
    /// sets evaporation), level-pool surface, inflow placement and flow field,
    /// sub-stepped advection, surface heat input, vertical mixing with
    /// implicit diffusion, oxygen kinetics.
    pub fn step(&self, state: &mut State, dt: f64) -> Result<StepReport, EngineError> {
        let cfg = &self.run.config;
        let grid = &*self.run.grid;
        let forcing = &*self.run.forcing;
        let (ns, nl) = (grid.segment_count(), grid.layer_count());
        let t0 = state.time_days;
        let herr = Self::hydro_err(t0);
        let mid = t0 + 0.5 * dt / SECONDS_PER_DAY;
        let ferr = |source| EngineError::Forcing { day: t0, source };
        let inflow = forcing.inflow.sample(mid).map_err(ferr)?;
        let met = forcing.met.sample(mid).map_err(ferr)?;
        let wd = forcing.withdrawal.sample(mid).map_err(ferr)?;
        let doy = cfg.run.day_of_year_offset + mid;
        let e0 = state.surface.surface_elevation_m;
        let field = &mut state.field;

        // surface budget per segment at the start-of-step surface temperature
        let mut fluxes = Vec::with_capacity(ns);
        let mut evaporation = vec![0.0; ns];
        for (i, evap) in evaporation.iter_mut().enumerate() {
            let top = (0..nl).find(|&k| field.is_wet(i, k));
            let flux = match top {
                Some(k) => {
                    let ts = field.temp[field.index(i, k)];
                    let f = surface_heat_flux(&met, ts, doy, cfg.run.latitude_deg, &cfg.thermal);
                    *evap = f.evaporation_rate() * grid.cell_plan_area(i, k);
                    f
                }
                None => HeatFluxBreakdown::default(),
            };
            fluxes.push(flux);
        }

        // level pool
        let spill = cfg.spillway.map(|s| s.discharge(e0)).unwrap_or(0.0);
        let q_out = wd.q_out + spill;
        let stored = field.total_volume();
        let net = inflow.q_in - q_out - evaporation.iter().sum::<f64>();
        let e1 = elevation_for_volume(&self.curve, stored + net * dt).map_err(&herr)?;
        let ks = flow_surface_layer(grid, e0.min(e1)).ok_or(HydroError::DryPath { segment: 0 }).map_err(&herr)?;

        // inflow placement at the upstream segment
        let bed0 = grid
            .bed_layer(0)
            .filter(|&b| b >= ks)
            .ok_or(HydroError::DryPath { segment: 0 })
            .map_err(&herr)?;
        let mut inflow_by_layer = vec![0.0; nl];
        if inflow.q_in > 0.0 {
            let rho: Vec<f64> = (ks..=bed0)
                .map(|k| water_density(field.temp[field.index(0, k)]))
                .collect::<Result<_, _>>()
                .map_err(&herr)?;
            let rho_in = water_density(inflow.t_in).map_err(&herr)?;
            let w = inflow_placement(&rho, rho_in, cfg.hydro.interflow_half_width).map_err(&herr)?;
            for (j, wj) in w.iter().enumerate() {
                inflow_by_layer[ks + j] = wj * inflow.q_in;
            }
        }

        // withdrawal around the intake plus spill from the surface, at the dam
        let dam = ns - 1;
        let bed_dam = grid
            .bed_layer(dam)
            .filter(|&b| b >= ks)
            .ok_or(HydroError::DryPath { segment: dam })
            .map_err(&herr)?;
        let mut withdrawal_by_layer = vec![0.0; nl];
        if wd.q_out > 0.0 {
            let intake = grid
                .layer_containing(wd.intake_elevation_m)
                .unwrap_or(if wd.intake_elevation_m > e0 { ks } else { bed_dam })
                .clamp(ks, bed_dam);
            let w = kernel_weights(bed_dam - ks + 1, intake - ks, cfg.hydro.withdrawal_half_width);
            for (j, wj) in w.iter().enumerate() {
                withdrawal_by_layer[ks + j] = wj * wd.q_out;
            }
        }
        withdrawal_by_layer[ks] += spill;

        // neutral-level routing of the inflow across each interface
        let through = if cfg.hydro.density_current && inflow.q_in > 0.0 {
            let rho_in = water_density(inflow.t_in).map_err(&herr)?;
            let mut all = Vec::with_capacity(ns.saturating_sub(1));
            for i in 0..ns.saturating_sub(1) {
                let lowest = grid
                    .bed_layer(i)
                    .zip(grid.bed_layer(i + 1))
                    .map(|(a, b)| a.min(b))
                    .filter(|&b| b >= ks)
                    .ok_or(HydroError::DryPath { segment: i })
                    .map_err(&herr)?;
                let rho: Vec<f64> = (ks..=lowest)
                    .map(|k| water_density(field.temp[field.index(i + 1, k)]))
                    .collect::<Result<_, _>>()
                    .map_err(&herr)?;
                let w = inflow_placement(&rho, rho_in, cfg.hydro.interflow_half_width).map_err(&herr)?;
                let mut row = vec![0.0; nl];
                row[ks..=lowest].copy_from_slice(&w);
                all.push(row);
            }
            Some(all)
        } else {
            None
        };

        let flow = build_flow_field(
            grid,
            &FlowInputs {
                through: through.as_deref(),
                surface_m: e0,
                volumes: Some(&field.volume),
                inflow: &inflow_by_layer,
                withdrawal: &withdrawal_by_layer,
                evaporation: &evaporation,
                dt,
            },
        )
        .map_err(&herr)?;
        debug_assert!((flow.surface_after_m - e1).abs() < 1e-9);

        // cross-section the inflow occupies in each segment, for its kinetic energy
        let band: Vec<f64> = (0..ns)
            .map(|i| {
                let w: Option<&[f64]> = match (i, &through) {
                    (0, _) => Some(&inflow_by_layer),
                    (_, Some(t)) => Some(&t[i - 1]),
                    _ => None,
                };
                (0..nl)
                    .filter(|&k| w.is_none_or(|w| w[k] > 0.0))
                    .map(|k| grid.width(i, k) * grid.wet_thickness(k, e1))
                    .sum()
            })
            .collect();
        let boundary = BoundaryState::from(&inflow);
        let transport = Transport::new(&flow);
        let n_sub = transport.required_substeps(field, dt);
        let h = dt / n_sub as f64;
        let mut totals = BoundaryTotals::default();
        for _ in 0..n_sub {
            let a = transport.apply(field, &boundary, h).map_err(&herr)?;
            totals.inflow_volume += a.inflow_volume;
            totals.outflow_volume += a.outflow_volume;
            totals.advected_heat += RHO_CP * (a.inflow[0] - a.outflow[0]);
            totals.advected_oxygen += a.inflow[1] - a.outflow[1];
        }
        state.surface.surface_elevation_m = e1;

        // column-local processes, one segment per task
        let hydro = &cfg.hydro;
        let q_in = inflow.q_in;
        let carried = &state.carried_energy;
        let field_ref: &CellField = field;
        let results: Vec<Option<ColumnResult>> = (0..ns)
            .into_par_iter()
            .map(|i| -> Result<Option<ColumnResult>, EngineError> {
                let Some((mut col, map)) = Column::extract(field_ref, grid, i, e1) else {
                    return Ok(None);
                };
                let flux = &fluxes[i];
                let heat = apply_surface_flux(&mut col, flux, cfg.thermal.light_extinction, dt);
                let alpha = thermal_expansion(col.temp[0]).map_err(Self::hydro_err(t0))?;
                let cross = band[i];
                let inflow_power = if q_in > 0.0 && cross > 0.0 && col.surface_area > 0.0 {
                    let u = q_in / cross;
                    hydro.inflow_mixing_efficiency * 0.5 * RHO_REF * q_in * u * u / col.surface_area
                } else {
                    0.0
                };
                let forcing = MixingForcing {
                    wind_speed: met.wind_speed,
                    buoyancy_flux: -GRAVITY * alpha * flux.net / RHO_CP,
                    inflow_power,
                    carried_energy: carried[i],
                };
                let report = vertical_mixing(&mut col, &forcing, hydro, dt).map_err(Self::hydro_err(t0))?;
                let rho = col.densities().map_err(Self::hydro_err(t0))?;
                let inversion = rho
                    .windows(2)
                    .map(|w| w[0] - w[1])
                    .fold(0.0f64, f64::max);
                let kin = kinetics_column(&mut col, &cfg.oxygen, met.wind_speed, dt)
                    .map_err(|source| EngineError::Oxygen { day: t0, source })?;
                Ok(Some(ColumnResult {
                    column: col,
                    map,
                    heat,
                    kinetics: kin,
                    carried: report.carried_energy,
                    inversion,
                }))
            })
            .collect::<Result<_, _>>()?;

        let mut max_inversion: f64 = 0.0;
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Some(r) => {
                    r.column.write_back(field, &r.map);
                    totals.surface_heat += r.heat;
                    totals.kinetics.add(&r.kinetics);
                    state.carried_energy[i] = r.carried;
                    max_inversion = max_inversion.max(r.inversion);
                }
                None => state.carried_energy[i] = 0.0,
            }
        }

        state.time_days = t0 + dt / SECONDS_PER_DAY;
        Ok(StepReport {
            totals,
            substeps: n_sub,
            max_inversion,
            spill_m3s: spill,
        })
    }
}

struct ColumnResult {
    column: Column,
    map: crate::column::ColumnMap,
    heat: f64,
    kinetics: KineticsAudit,
    carried: f64,
    inversion: f64,
}

/// One station profile at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct StationRecord {
    pub day: f64,
    pub station: String,
    pub depth_m: Vec<f64>,
    pub temp_c: Vec<f64>,
    pub do_mgl: Vec<f64>,
}

/// Full field at a requested day.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub day: f64,
    pub surface_elevation_m: f64,
    pub field: CellField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceRow {
    pub day: f64,
    pub volume_m3: f64,
    pub heat_j: f64,
    pub do_kg: f64,
}

/// Content at start and end plus everything that crossed the boundary.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AuditSummary {
    pub initial: [f64; 3],
    pub last: [f64; 3],
    pub totals: BoundaryTotals,
}

impl AuditSummary {
    /// Relative volume closure error.
    pub fn volume_error(&self) -> f64 {
        let expected = self.initial[0] + self.totals.inflow_volume - self.totals.outflow_volume;
        (self.last[0] - expected).abs() / self.initial[0]
    }

    /// Relative heat closure error.
    pub fn heat_error(&self) -> f64 {
        let expected = self.initial[1] + self.totals.advected_heat + self.totals.surface_heat;
        (self.last[1] - expected).abs() / self.initial[1].abs().max(self.last[1].abs())
    }

    /// Relative oxygen closure error.
    pub fn oxygen_error(&self) -> f64 {
        let expected = self.initial[2] + self.totals.advected_oxygen + self.totals.kinetics.net_oxygen();
        (self.last[2] - expected).abs() / self.initial[2].abs().max(self.last[2].abs())
    }
}

/// Range checks gathered over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunExtremes {
    pub min_do: f64,
    pub max_do: f64,
    /// Largest saturation over the temperatures that occurred.
    pub max_do_saturation: f64,
    pub min_temp: f64,
    pub max_temp: f64,
    pub max_inversion: f64,
    pub max_substeps: usize,
}

impl Default for RunExtremes {
    fn default() -> Self {
        Self {
            min_do: f64::INFINITY,
            max_do: f64::NEG_INFINITY,
            max_do_saturation: f64::NEG_INFINITY,
            min_temp: f64::INFINITY,
            max_temp: f64::NEG_INFINITY,
            max_inversion: 0.0,
            max_substeps: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub grid: Arc<Grid>,
    pub stations: Vec<StationRecord>,
    pub snapshots: Vec<Snapshot>,
    pub balance: Vec<BalanceRow>,
    pub audit: AuditSummary,
    pub extremes: RunExtremes,
    pub final_state: State,
}

fn contents(field: &CellField) -> [f64; 3] {
    [
        field.total_volume(),
        RHO_CP * field.content(Constituent::Temperature),
        field.content(Constituent::Oxygen),
    ]
}

fn station_record(grid: &Grid, field: &CellField, e: f64, day: f64, name: &str, seg: usize) -> StationRecord {
    let mut rec = StationRecord {
        day,
        station: name.to_string(),
        depth_m: Vec::new(),
        temp_c: Vec::new(),
        do_mgl: Vec::new(),
    };
    for k in 0..grid.layer_count() {
        let c = field.index(seg, k);
        if field.volume[c] <= 0.0 {
            continue;
        }
        let h = grid.wet_thickness(k, e);
        rec.depth_m.push(e - grid.layer_bottom(k) - 0.5 * h);
        rec.temp_c.push(field.temp[c]);
        rec.do_mgl.push(field.oxygen[c]);
    }
    rec
}

/// Runs a prepared configuration to its end day.
pub fn run_prepared(run: &PreparedRun) -> Result<RunOutput, EngineError> {
    let cfg = &run.config;
    let grid = &*run.grid;
    let engine = Engine::new(run);
    let mut state = run.initial_state();
    let dt = cfg.run.dt_seconds;
    let span = (cfg.run.end_day - cfg.run.start_day) * SECONDS_PER_DAY;
    let n_steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;

    let mut snapshot_days = cfg.run.snapshot_days.clone();
    snapshot_days.sort_by(f64::total_cmp);
    snapshot_days.dedup();
    let mut next_snap = 0;
    let mut snapshots = Vec::with_capacity(snapshot_days.len());
    let take_snapshots = |state: &State, next: &mut usize, out: &mut Vec<Snapshot>| {
        while *next < snapshot_days.len() && state.time_days >= snapshot_days[*next] - 1e-9 {
            out.push(Snapshot {
                day: snapshot_days[*next],
                surface_elevation_m: state.surface.surface_elevation_m,
                field: state.field.clone(),
            });
            *next += 1;
        }
    };
    take_snapshots(&state, &mut next_snap, &mut snapshots);

    let stations: Vec<(String, usize)> = cfg
        .stations
        .iter()
        .map(|(n, id)| (n.clone(), grid.segment_position(*id).expect("validated")))
        .collect();
    let mut station_records = Vec::new();
    let initial = contents(&state.field);
    let mut balance = vec![BalanceRow {
        day: state.time_days,
        volume_m3: initial[0],
        heat_j: initial[1],
        do_kg: initial[2] / 1000.0,
    }];
    let mut totals = BoundaryTotals::default();
    let mut extremes = RunExtremes::default();

    for s in 0..n_steps {
        let t_start = cfg.run.start_day + (s as f64) * dt / SECONDS_PER_DAY;
        let remaining = (cfg.run.end_day - t_start) * SECONDS_PER_DAY;
        let h = dt.min(remaining);
        state.time_days = t_start;
        let report = engine.step(&mut state, h)?;
        totals.add(&report.totals);
        extremes.max_inversion = extremes.max_inversion.max(report.max_inversion);
        extremes.max_substeps = extremes.max_substeps.max(report.substeps);
        if s + 1 == n_steps {
            state.time_days = cfg.run.end_day;
        }
        for c in 0..state.field.volume.len() {
            if state.field.volume[c] > 0.0 {
                let t = state.field.temp[c];
                let x = state.field.oxygen[c];
                extremes.min_do = extremes.min_do.min(x);
                extremes.max_do = extremes.max_do.max(x);
                extremes.min_temp = extremes.min_temp.min(t);
                extremes.max_temp = extremes.max_temp.max(t);
            }
        }
        if let Ok(sat) = do_saturation(extremes.min_temp.clamp(0.0, 45.0)) {
            extremes.max_do_saturation = extremes.max_do_saturation.max(sat);
        }
        let now = contents(&state.field);
        balance.push(BalanceRow {
            day: state.time_days,
            volume_m3: now[0],
            heat_j: now[1],
            do_kg: now[2] / 1000.0,
        });
        let every = cfg.run.station_interval_steps;
        if every > 0 && (s + 1) % every == 0 {
            let e = state.surface.surface_elevation_m;
            for (name, seg) in &stations {
                station_records.push(station_record(grid, &state.field, e, state.time_days, name, *seg));
            }
        }
        take_snapshots(&state, &mut next_snap, &mut snapshots);
    }
    let last = contents(&state.field);
    Ok(RunOutput {
        grid: run.grid.clone(),
        stations: station_records,
        snapshots,
        balance,
        audit: AuditSummary {
            initial,
            last,
            totals,
        },
        extremes,
        final_state: state,
    })
}

/// Loads inputs named by `config` and runs it.
pub fn run(config: &RunConfig) -> Result<RunOutput, EngineError> {
    run_prepared(&PreparedRun::load(config.clone())?)
}

impl RunOutput {
    pub fn snapshot(&self, day: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.day == day)
    }

    pub fn write_stations<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "{STATION_HEADER}")?;
        for r in &self.stations {
            for j in 0..r.depth_m.len() {
                writeln!(w, "{},{},{},{},{}", r.day, r.station, r.depth_m[j], r.temp_c[j], r.do_mgl[j])?;
            }
        }
        w.flush()
    }

    pub fn write_snapshots<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "{SNAPSHOT_HEADER}")?;
        let g = &*self.grid;
        for s in &self.snapshots {
            for i in 0..g.segment_count() {
                let seg = &g.segments()[i];
                for k in 0..g.layer_count() {
                    let c = s.field.index(i, k);
                    if s.field.volume[c] <= 0.0 {
                        continue;
                    }
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{}",
                        s.day,
                        seg.id,
                        seg.distance_from_dam_m,
                        k + 1,
                        g.layer_center(k).min(s.surface_elevation_m),
                        s.field.temp[c],
                        s.field.oxygen[c],
                        s.field.bod[c]
                    )?;
                }
            }
        }
        w.flush()
    }

    pub fn write_balance<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "{BALANCE_HEADER}")?;
        for b in &self.balance {
            writeln!(w, "{},{},{},{}", b.day, b.volume_m3, b.heat_j, b.do_kg)?;
        }
        w.flush()
    }

    /// Writes `stations.csv`, `snapshots.csv` and `balance.csv` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<(), EngineError> {
        let io = |path: std::path::PathBuf| move |source| EngineError::Io { path, source };
        std::fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        type Writer = fn(&RunOutput, std::fs::File) -> std::io::Result<()>;
        let files: [(&str, Writer); 3] = [
            ("stations.csv", |o, f| o.write_stations(f)),
            ("snapshots.csv", |o, f| o.write_snapshots(f)),
            ("balance.csv", |o, f| o.write_balance(f)),
        ];
        for (name, write) in files {
            let path = dir.join(name);
            let f = std::fs::File::create(&path).map_err(io(path.clone()))?;
            write(self, f).map_err(io(path))?;
        }
        Ok(())
    }
}
