//! Seeded synthetic reservoirs and forcing years.
//!
//! Three presets are provided: a deep, narrow warm-monomictic reservoir
//! (`Rajae`), a shallow, wide and hot one (`Minab`) and a small `Twin` used
//! for calibration experiments. Geometry is scaled so the full-pool volume
//! hits the preset capacity exactly.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::calibration::{
    match_profiles, Axis, CalibrationError, CalibrationSpec, Objective, Observation, Search, StationProfileSet,
};
use crate::config::{ConfigError, InputPaths, RunConfig, RunSection, Spillway};
use crate::engine::{run_prepared, PreparedRun};
use crate::forcing::{DailySeries, ForcingSeries, InflowRecord, MetRecord, WithdrawalRecord};
use crate::grid::{write_bathymetry, Grid, GridError};
use crate::hydro::HydroParams;
use crate::oxygen::{do_saturation, OxygenParams};
use crate::scenario::{DiagnosticParams, DirectionalSpec, ScenarioFile, ScenarioSpec, Suite};
use crate::thermal::ThermalParams;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Rajae,
    Minab,
    Twin,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Rajae, Preset::Minab, Preset::Twin];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Rajae => "rajae",
            Preset::Minab => "minab",
            Preset::Twin => "twin",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected rajae, minab or twin)"))
    }
}

/// Shape of a synthetic valley: depth and top width vary smoothly from the
/// upstream end to the dam, and each cross-section narrows with depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Valley {
    pub lengths_m: Vec<f64>,
    pub layers: usize,
    pub thickness_m: f64,
    pub datum_m: f64,
    pub depth_upstream_m: f64,
    pub depth_dam_m: f64,
    pub width_upstream_m: f64,
    pub width_dam_m: f64,
    /// Exponent of the (1 - z/D) profile; larger is more V-shaped.
    pub shape: f64,
    /// Width kept at the bed as a fraction of the top width.
    pub floor: f64,
    /// Full-pool volume the widths are scaled to.
    pub capacity_m3: f64,
}

impl Valley {
    pub fn grid(&self) -> Result<Grid, GridError> {
        let ns = self.lengths_m.len();
        let profile = |i: usize| -> Vec<f64> {
            let s = if ns > 1 { i as f64 / (ns - 1) as f64 } else { 1.0 };
            let depth = self.depth_upstream_m + (self.depth_dam_m - self.depth_upstream_m) * s.powf(0.7);
            let top = self.width_upstream_m + (self.width_dam_m - self.width_upstream_m) * s.sqrt();
            (0..self.layers)
                .map(|k| {
                    let z = (k as f64 + 0.5) * self.thickness_m;
                    if z >= depth {
                        0.0
                    } else {
                        top * (self.floor + (1.0 - self.floor) * (1.0 - z / depth).powf(self.shape))
                    }
                })
                .collect()
        };
        let build = |scale: f64| {
            let segs = (0..ns)
                .map(|i| {
                    let w = profile(i).into_iter().map(|w| w * scale).collect();
                    (i as u32 + 1, self.lengths_m[i], w)
                })
                .collect();
            Grid::uniform(segs, self.layers, self.thickness_m, self.datum_m)
        };
        let raw = build(1.0)?;
        let v = raw.total_volume(raw.top_elevation_m())?;
        build(self.capacity_m3 / v)
    }
}

/// Seasonal climate of a synthetic year. Phases are days of year.
#[derive(Debug, Clone, PartialEq)]
pub struct Climate {
    pub t_air_mean: f64,
    pub t_air_amplitude: f64,
    pub t_air_peak_doy: f64,
    pub t_air_noise: f64,
    pub dew_depression_mean: f64,
    pub dew_depression_amplitude: f64,
    pub wind_mean: f64,
    pub cloud_winter: f64,
    pub cloud_summer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hydrology {
    pub q_mean: f64,
    /// Relative seasonal swing of inflow.
    pub q_swing: f64,
    pub q_peak_doy: f64,
    pub t_in_mean: f64,
    pub t_in_amplitude: f64,
    pub t_in_peak_doy: f64,
    pub bod_in: f64,
    pub q_out_mean: f64,
    pub q_out_swing: f64,
    pub q_out_peak_doy: f64,
    pub intake_elevation_m: f64,
}

fn seasonal(doy: f64, peak: f64) -> f64 {
    (2.0 * PI * (doy - peak) / 365.0).cos()
}

/// Daily met records for days `0..=days`, day 0 falling on day of year `doy0`.
pub fn met_series(c: &Climate, days: usize, doy0: f64, rng: &mut ChaCha8Rng) -> Vec<MetRecord> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut anomaly: f64 = 0.0;
    (0..=days)
        .map(|d| {
            let t = d as f64;
            anomaly = 0.7 * anomaly + (1.0f64 - 0.49).sqrt() * c.t_air_noise * noise.sample(rng);
            let t_air = c.t_air_mean + c.t_air_amplitude * seasonal(t + doy0, c.t_air_peak_doy) + anomaly;
            let dep = (c.dew_depression_mean
                + c.dew_depression_amplitude * seasonal(t + doy0, c.t_air_peak_doy)
                + 0.8 * noise.sample(rng))
            .max(0.5);
            let wind = (c.wind_mean * (0.35 * noise.sample(rng)).exp() * 0.94).clamp(0.2, 15.0);
            let summer = 0.5 * (1.0 + seasonal(t + doy0, c.t_air_peak_doy));
            let cloud_mean = c.cloud_winter + (c.cloud_summer - c.cloud_winter) * summer;
            let cloud = (cloud_mean + 0.2 * noise.sample(rng)).clamp(0.0, 1.0);
            MetRecord {
                day: t,
                t_air: round(t_air, 2),
                t_dew: round(t_air - dep, 2),
                wind_speed: round(wind, 2),
                wind_dir: round(rng.gen_range(0.0..360.0), 1),
                cloud_frac: round(cloud, 3),
            }
        })
        .collect()
}

pub fn inflow_series(h: &Hydrology, days: usize, doy0: f64, rng: &mut ChaCha8Rng) -> Vec<InflowRecord> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut anomaly: f64 = 0.0;
    (0..=days)
        .map(|d| {
            let t = d as f64;
            anomaly = 0.8 * anomaly + 0.6 * 0.15 * noise.sample(rng);
            let q = h.q_mean * (1.0 + h.q_swing * seasonal(t + doy0, h.q_peak_doy)) * anomaly.exp();
            let t_in = h.t_in_mean + h.t_in_amplitude * seasonal(t + doy0, h.t_in_peak_doy) + 0.3 * noise.sample(rng);
            let t_in = round(t_in.max(1.0), 2);
            let sat = do_saturation(t_in).expect("inflow temperature in range");
            InflowRecord {
                day: t,
                q_in: round(q.max(0.05 * h.q_mean), 3),
                t_in,
                do_in: round(0.95 * sat, 2),
                bod_in: h.bod_in,
            }
        })
        .collect()
}

pub fn withdrawal_series(h: &Hydrology, days: usize, doy0: f64) -> Vec<WithdrawalRecord> {
    (0..=days)
        .map(|d| {
            let q = h.q_out_mean * (1.0 + h.q_out_swing * seasonal(d as f64 + doy0, h.q_out_peak_doy));
            WithdrawalRecord {
                day: d as f64,
                q_out: round(q, 3),
                intake_elevation_m: h.intake_elevation_m,
            }
        })
        .collect()
}

fn round(x: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    (x * f).round() / f
}

/// A complete synthetic configuration held in memory.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub preset: Preset,
    pub seed: u64,
    pub grid: Grid,
    pub inflow: Vec<InflowRecord>,
    pub met: Vec<MetRecord>,
    pub withdrawal: Vec<WithdrawalRecord>,
    /// Config with input paths relative to the fixture directory.
    pub config: RunConfig,
}

pub const BATHYMETRY_FILE: &str = "bathymetry.csv";
pub const INFLOW_FILE: &str = "inflow.csv";
pub const MET_FILE: &str = "met.csv";
pub const WITHDRAWAL_FILE: &str = "withdrawal.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const CALIBRATION_FILE: &str = "calibration.toml";

fn inputs() -> InputPaths {
    InputPaths {
        bathymetry: BATHYMETRY_FILE.into(),
        inflow: INFLOW_FILE.into(),
        met: MET_FILE.into(),
        withdrawal: WITHDRAWAL_FILE.into(),
    }
}

fn run_section(end_day: f64, surface: f64, temp: f64, doy: f64, lat: f64) -> RunSection {
    RunSection {
        start_day: 0.0,
        end_day,
        dt_seconds: 3600.0,
        day_of_year_offset: doy,
        latitude_deg: lat,
        initial_surface_elevation_m: surface,
        initial_temp_c: temp,
        initial_do_mgl: round(do_saturation(temp).expect("valid temperature"), 2),
        initial_bod_mgl: 1.0,
        initial_profile: None,
        snapshot_days: Vec::new(),
        station_interval_steps: 24,
        output_dir: PathBuf::from("out"),
    }
}

pub fn rajae_valley() -> Valley {
    Valley {
        lengths_m: vec![50.0; 95],
        layers: 45,
        thickness_m: 1.0,
        datum_m: 70.0,
        depth_upstream_m: 25.0,
        depth_dam_m: 45.0,
        width_upstream_m: 600.0,
        width_dam_m: 1400.0,
        shape: 0.4,
        floor: 0.3,
        capacity_m3: 165e6,
    }
}

pub fn minab_valley(rng: &mut ChaCha8Rng) -> Valley {
    Valley {
        lengths_m: (0..32).map(|_| round(rng.gen_range(100.0..600.0), 1)).collect(),
        layers: 32,
        thickness_m: 1.5,
        datum_m: 30.0,
        depth_upstream_m: 15.0,
        depth_dam_m: 48.0,
        width_upstream_m: 3000.0,
        width_dam_m: 7000.0,
        shape: 2.5,
        floor: 0.05,
        capacity_m3: 270e6,
    }
}

pub fn twin_valley() -> Valley {
    Valley {
        lengths_m: vec![200.0; 10],
        layers: 20,
        thickness_m: 1.0,
        datum_m: 0.0,
        depth_upstream_m: 12.0,
        depth_dam_m: 20.0,
        width_upstream_m: 150.0,
        width_dam_m: 300.0,
        shape: 0.5,
        floor: 0.3,
        capacity_m3: 3.5e6,
    }
}

/// Builds a preset from `seed`. The same seed always gives the same fixture.
pub fn fixture(preset: Preset, seed: u64) -> Result<Fixture, GridError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ preset as u64);
    match preset {
        Preset::Rajae => {
            let grid = rajae_valley().grid()?;
            let days = 365;
            let doy0 = 60.0;
            let climate = Climate {
                t_air_mean: 16.5,
                t_air_amplitude: 9.5,
                t_air_peak_doy: 205.0,
                t_air_noise: 1.5,
                dew_depression_mean: 4.0,
                dew_depression_amplitude: 1.5,
                wind_mean: 2.5,
                cloud_winter: 0.6,
                cloud_summer: 0.25,
            };
            let hydro = Hydrology {
                q_mean: 19.4,
                q_swing: 0.5,
                q_peak_doy: 90.0,
                t_in_mean: 13.0,
                t_in_amplitude: 6.0,
                t_in_peak_doy: 215.0,
                bod_in: 4.0,
                q_out_mean: 17.0,
                q_out_swing: 0.3,
                q_out_peak_doy: 120.0,
                intake_elevation_m: 72.0,
            };
            let met = met_series(&climate, days, doy0, &mut rng);
            let inflow = inflow_series(&hydro, days, doy0, &mut rng);
            let withdrawal = withdrawal_series(&hydro, days, doy0);
            let mut stations = BTreeMap::new();
            stations.insert("dam".to_string(), 95);
            stations.insert("middle".to_string(), 48);
            stations.insert("upstream".to_string(), 15);
            let config = RunConfig {
                run: run_section(days as f64, 112.0, 9.0, doy0, 36.25),
                inputs: inputs(),
                hydro: HydroParams::default(),
                thermal: ThermalParams::default(),
                oxygen: OxygenParams {
                    sod_20: 1.0,
                    ..OxygenParams::default()
                },
                spillway: Some(Spillway {
                    crest_elevation_m: 112.5,
                    width_m: 40.0,
                    coefficient: 1.7,
                }),
                stations,
                base_dir: PathBuf::new(),
            };
            Ok(Fixture { preset, seed, grid, inflow, met, withdrawal, config })
        }
        Preset::Minab => {
            let grid = minab_valley(&mut rng).grid()?;
            let days = 365;
            let doy0 = 0.0;
            let climate = Climate {
                t_air_mean: 27.0,
                t_air_amplitude: 8.0,
                t_air_peak_doy: 200.0,
                t_air_noise: 1.2,
                dew_depression_mean: 12.0,
                dew_depression_amplitude: 3.0,
                wind_mean: 3.0,
                cloud_winter: 0.25,
                cloud_summer: 0.05,
            };
            let hydro = Hydrology {
                q_mean: 8.0,
                q_swing: 0.6,
                q_peak_doy: 50.0,
                t_in_mean: 17.0,
                t_in_amplitude: 6.0,
                t_in_peak_doy: 205.0,
                bod_in: 2.0,
                q_out_mean: 4.5,
                q_out_swing: 0.3,
                q_out_peak_doy: 190.0,
                intake_elevation_m: 40.0,
            };
            let met = met_series(&climate, days, doy0, &mut rng);
            let inflow = inflow_series(&hydro, days, doy0, &mut rng);
            let withdrawal = withdrawal_series(&hydro, days, doy0);
            let mut stations = BTreeMap::new();
            stations.insert("dam".to_string(), 32);
            stations.insert("middle".to_string(), 16);
            let config = RunConfig {
                run: run_section(days as f64, 75.0, 18.0, doy0, 27.2),
                inputs: inputs(),
                // the river is cold next to the lake surface and plunges; its
                // kinetic energy does not reach the surface layer
                hydro: HydroParams {
                    inflow_mixing_efficiency: 0.0,
                    ..HydroParams::default()
                },
                thermal: ThermalParams::default(),
                oxygen: OxygenParams::default(),
                spillway: Some(Spillway {
                    crest_elevation_m: 75.5,
                    width_m: 60.0,
                    coefficient: 1.7,
                }),
                stations,
                base_dir: PathBuf::new(),
            };
            Ok(Fixture { preset, seed, grid, inflow, met, withdrawal, config })
        }
        Preset::Twin => {
            let grid = twin_valley().grid()?;
            let days = 150;
            let doy0 = 90.0;
            let climate = Climate {
                t_air_mean: 16.5,
                t_air_amplitude: 9.5,
                t_air_peak_doy: 205.0,
                t_air_noise: 1.0,
                dew_depression_mean: 4.0,
                dew_depression_amplitude: 1.5,
                wind_mean: 2.5,
                cloud_winter: 0.6,
                cloud_summer: 0.25,
            };
            let hydro = Hydrology {
                q_mean: 0.5,
                q_swing: 0.3,
                q_peak_doy: 90.0,
                t_in_mean: 13.0,
                t_in_amplitude: 6.0,
                t_in_peak_doy: 215.0,
                bod_in: 2.0,
                q_out_mean: 0.5,
                q_out_swing: 0.0,
                q_out_peak_doy: 0.0,
                intake_elevation_m: 4.0,
            };
            let met = met_series(&climate, days, doy0, &mut rng);
            let inflow = inflow_series(&hydro, days, doy0, &mut rng);
            let withdrawal = withdrawal_series(&hydro, days, doy0);
            let mut stations = BTreeMap::new();
            stations.insert("dam".to_string(), 10);
            stations.insert("middle".to_string(), 5);
            let mut run = run_section(days as f64, 19.0, 9.0, doy0, 36.25);
            run.dt_seconds = 7200.0;
            let config = RunConfig {
                run,
                inputs: inputs(),
                hydro: HydroParams::default(),
                thermal: ThermalParams::default(),
                oxygen: OxygenParams::default(),
                spillway: Some(Spillway {
                    crest_elevation_m: 19.5,
                    width_m: 15.0,
                    coefficient: 1.7,
                }),
                stations,
                base_dir: PathBuf::new(),
            };
            Ok(Fixture { preset, seed, grid, inflow, met, withdrawal, config })
        }
    }
}

impl Fixture {
    pub fn forcing(&self) -> ForcingSeries {
        ForcingSeries {
            inflow: DailySeries::from_records(self.inflow.clone()),
            met: DailySeries::from_records(self.met.clone()),
            withdrawal: DailySeries::from_records(self.withdrawal.clone()),
        }
    }

    /// The fixture ready to run without touching the filesystem.
    pub fn prepared(&self) -> Result<PreparedRun, ConfigError> {
        PreparedRun::new(
            self.config.clone(),
            Arc::new(self.grid.clone()),
            Arc::new(self.forcing()),
            None,
        )
    }

    /// The flood scenario and directional checks that go with the preset.
    pub fn scenario(&self) -> Option<ScenarioFile> {
        let len = self.grid.distance_from_dam(0);
        match self.preset {
            Preset::Rajae => Some(ScenarioFile {
                flood: ScenarioSpec {
                    window: [200.0, 210.0],
                    peak_multiplier: 10.0,
                    t_in_offset_c: -3.0,
                    bod_multiplier: 5.0,
                },
                diagnostics: DiagnosticParams::default(),
                directional: Some(DirectionalSpec {
                    suite: Suite::Deep,
                    upstream_distance_m: 0.5 * len,
                    probe_distance_m: 3900.0,
                    mid_range_m: [len / 3.0, 2.0 * len / 3.0],
                    min_mld_deepening_m: 5.0,
                    min_do_drop_mgl: 2.0,
                }),
            }),
            Preset::Minab => Some(ScenarioFile {
                flood: ScenarioSpec {
                    window: [90.0, 100.0],
                    peak_multiplier: 10.0,
                    t_in_offset_c: -1.0,
                    bod_multiplier: 5.0,
                },
                diagnostics: DiagnosticParams::default(),
                directional: Some(DirectionalSpec {
                    suite: Suite::Shallow,
                    upstream_distance_m: 0.5 * len,
                    probe_distance_m: 0.5 * len,
                    mid_range_m: [len / 3.0, 2.0 * len / 3.0],
                    min_mld_deepening_m: 5.0,
                    min_do_drop_mgl: 2.0,
                }),
            }),
            Preset::Twin => None,
        }
    }

    /// Search over mixing ceiling and sediment demand for the twin.
    pub fn calibration(&self) -> Option<CalibrationSpec> {
        (self.preset == Preset::Twin).then(|| CalibrationSpec {
            axes: vec![
                Axis {
                    name: "kz_max".into(),
                    lo: 2e-5,
                    hi: 2e-4,
                    points: None,
                },
                Axis {
                    name: "sod_20".into(),
                    lo: 0.2,
                    hi: 1.6,
                    points: None,
                },
            ],
            objective: Objective::default(),
            search: Search {
                grid_points: 5,
                ..Search::default()
            },
        })
    }

    /// Writes bathymetry, forcing and `config.toml` into `dir`, plus the
    /// scenario, calibration spec and twin observations where the preset has them.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        write_bathymetry(&self.grid, File::create(dir.join(BATHYMETRY_FILE))?)?;
        DailySeries::from_records(self.inflow.clone()).write_csv(File::create(dir.join(INFLOW_FILE))?)?;
        DailySeries::from_records(self.met.clone()).write_csv(File::create(dir.join(MET_FILE))?)?;
        DailySeries::from_records(self.withdrawal.clone())
            .write_csv(File::create(dir.join(WITHDRAWAL_FILE))?)?;
        std::fs::write(dir.join(CONFIG_FILE), self.config.to_toml())?;
        if let Some(s) = self.scenario() {
            std::fs::write(dir.join(SCENARIO_FILE), s.to_toml())?;
        }
        if let Some(c) = self.calibration() {
            std::fs::write(dir.join(CALIBRATION_FILE), c.to_toml())?;
            let obs = twin_observations(self, self.seed).map_err(std::io::Error::other)?;
            obs.write_csv(File::create(dir.join(OBSERVATIONS_FILE))?)?;
        }
        Ok(())
    }
}

/// Parameters the twin observations are generated with.
pub const TWIN_TRUTH: [(&str, f64); 2] = [("kz_max", 6e-5), ("sod_20", 0.8)];
/// Observation noise, in degC and mg/L.
pub const TWIN_NOISE: f64 = 0.3;
pub const OBSERVATIONS_FILE: &str = "observations.csv";

/// Profiles sampled from a run of `fixture` with [`TWIN_TRUTH`] every ten
/// days at each station, plus Gaussian noise. Depths below the bed are dropped.
pub fn twin_observations(fixture: &Fixture, seed: u64) -> Result<StationProfileSet, CalibrationError> {
    let mut cfg = fixture.config.clone();
    for (name, v) in TWIN_TRUTH {
        cfg.set_parameter(name, v)?;
    }
    let days: Vec<f64> = (1..)
        .map(|n| 10.0 * n as f64)
        .take_while(|d| *d <= cfg.run.end_day)
        .collect();
    cfg.run.snapshot_days = days.clone();
    cfg.run.station_interval_steps = 0;
    let out = run_prepared(&fixture.prepared()?.with_config(cfg.clone())?)?;
    let mut rows = Vec::new();
    for &day in &days {
        for station in cfg.stations.keys() {
            for depth in [0.5, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0] {
                rows.push(Observation {
                    day,
                    station: station.clone(),
                    depth_m: depth,
                    temp_c: Some(0.0),
                    do_mgl: Some(0.0),
                });
            }
        }
    }
    let m = match_profiles(&out, &cfg.stations, &StationProfileSet::new(rows)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, TWIN_NOISE).expect("positive spread");
    let rows = m
        .temp
        .iter()
        .zip(&m.oxygen)
        .map(|(t, x)| Observation {
            day: t.day,
            station: t.station.clone(),
            depth_m: t.depth_m,
            temp_c: Some(round(t.predicted + noise.sample(&mut rng), 3)),
            do_mgl: Some(round((x.predicted + noise.sample(&mut rng)).max(0.0), 3)),
        })
        .collect();
    StationProfileSet::new(rows)
}
