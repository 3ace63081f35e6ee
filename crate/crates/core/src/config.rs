//! Run configuration: a TOML file with `[run]`, `[inputs]`, one section per
//! physics module, an optional `[spillway]` and a `[stations]` table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forcing::ForcingError;
use crate::grid::GridError;
use crate::hydro::HydroParams;
use crate::oxygen::{OxygenError, OxygenParams};
use crate::thermal::ThermalParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("bathymetry {path}: {source}")]
    Grid { path: PathBuf, source: GridError },
    #[error("forcing: {0}")]
    Forcing(#[from] ForcingError),
    #[error(transparent)]
    Oxygen(#[from] OxygenError),
}

fn default_dt() -> f64 {
    3600.0
}
fn default_latitude() -> f64 {
    36.5
}
fn default_interval() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_temp() -> f64 {
    12.0
}
fn default_do() -> f64 {
    9.0
}
fn default_bod() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub start_day: f64,
    pub end_day: f64,
    #[serde(default = "default_dt")]
    pub dt_seconds: f64,
    /// Day of year at simulation day 0.
    #[serde(default)]
    pub day_of_year_offset: f64,
    #[serde(default = "default_latitude")]
    pub latitude_deg: f64,
    pub initial_surface_elevation_m: f64,
    #[serde(default = "default_temp")]
    pub initial_temp_c: f64,
    #[serde(default = "default_do")]
    pub initial_do_mgl: f64,
    #[serde(default = "default_bod")]
    pub initial_bod_mgl: f64,
    /// Optional CSV `depth_m,temp_c,do_mgl,bod_mgl` replacing the uniform values.
    #[serde(default)]
    pub initial_profile: Option<PathBuf>,
    #[serde(default)]
    pub snapshot_days: Vec<f64>,
    /// Station profiles every this many steps; 0 disables them.
    #[serde(default = "default_interval")]
    pub station_interval_steps: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub bathymetry: PathBuf,
    pub inflow: PathBuf,
    pub met: PathBuf,
    pub withdrawal: PathBuf,
}

/// Free overflow spillway at the dam: Q = coefficient * width * head^1.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spillway {
    pub crest_elevation_m: f64,
    pub width_m: f64,
    #[serde(default = "Spillway::default_coefficient")]
    pub coefficient: f64,
}

impl Spillway {
    fn default_coefficient() -> f64 {
        1.7
    }

    pub fn discharge(&self, surface_m: f64) -> f64 {
        let head = surface_m - self.crest_elevation_m;
        if head > 0.0 {
            self.coefficient * self.width_m * head.powf(1.5)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub inputs: InputPaths,
    #[serde(default)]
    pub hydro: HydroParams,
    #[serde(default)]
    pub thermal: ThermalParams,
    #[serde(default)]
    pub oxygen: OxygenParams,
    #[serde(default)]
    pub spillway: Option<Spillway>,
    /// Station name to segment id.
    #[serde(default)]
    pub stations: BTreeMap<String, u32>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Parameters that calibration may vary, as `section.name` pairs.
pub const TUNABLE: &[(&str, &str)] = &[
    ("hydro", "kz_min"),
    ("hydro", "kz_max"),
    ("hydro", "sigma"),
    ("hydro", "wind_efficiency"),
    ("hydro", "convective_efficiency"),
    ("hydro", "inflow_mixing_efficiency"),
    ("thermal", "light_extinction"),
    ("oxygen", "k_bod_20"),
    ("oxygen", "theta_bod"),
    ("oxygen", "sod_20"),
    ("oxygen", "theta_sod"),
    ("oxygen", "k_a_base"),
    ("oxygen", "theta_rea"),
];

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::new(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.run;
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(r.start_day.is_finite() && r.end_day.is_finite()) || r.start_day >= r.end_day {
            return bad(format!("start_day {} must be before end_day {}", r.start_day, r.end_day));
        }
        if !(r.dt_seconds > 0.0) {
            return bad(format!("dt_seconds must be positive, got {}", r.dt_seconds));
        }
        for d in &r.snapshot_days {
            if *d < r.start_day || *d > r.end_day {
                return bad(format!("snapshot day {d} outside [{}, {}]", r.start_day, r.end_day));
            }
        }
        if !(-2.0..=45.0).contains(&r.initial_temp_c) || r.initial_do_mgl < 0.0 || r.initial_bod_mgl < 0.0 {
            return bad("initial state out of range".into());
        }
        let h = &self.hydro;
        if h.kz_min < 0.0 || h.kz_max < h.kz_min || h.sigma < 0.0 || h.wind_efficiency < 0.0 {
            return bad("hydro closure parameters must satisfy 0 <= kz_min <= kz_max".into());
        }
        if self.thermal.light_extinction < 0.0 {
            return bad("light_extinction must be non-negative".into());
        }
        self.oxygen.validate()?;
        Ok(())
    }

    /// Current value of a tunable parameter, by `name` or `section.name`.
    pub fn parameter(&self, name: &str) -> Result<f64, ConfigError> {
        let (section, key) = tunable(name)?;
        let table = toml::Value::try_from(self).expect("config serialises");
        table
            .get(section)
            .and_then(|s| s.get(key))
            .and_then(toml::Value::as_float)
            .ok_or_else(|| ConfigError::UnknownParameter(name.to_string()))
    }

    pub fn set_parameter(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        let (section, key) = tunable(name)?;
        match section {
            "hydro" => self.hydro = set_field(&self.hydro, key, value)?,
            "thermal" => self.thermal = set_field(&self.thermal, key, value)?,
            _ => self.oxygen = set_field(&self.oxygen, key, value)?,
        }
        Ok(())
    }
}

/// Section and key of a tunable parameter given as `name` or `section.name`.
pub fn tunable(name: &str) -> Result<(&'static str, &'static str), ConfigError> {
    let (sec, key) = match name.split_once('.') {
        Some((s, k)) => (Some(s), k),
        None => (None, name),
    };
    TUNABLE
        .iter()
        .find(|(s, k)| *k == key && sec.is_none_or(|x| x == *s))
        .copied()
        .ok_or_else(|| ConfigError::UnknownParameter(name.to_string()))
}

fn set_field<T: Serialize + for<'de> Deserialize<'de>>(v: &T, key: &str, value: f64) -> Result<T, ConfigError> {
    let mut table = toml::Value::try_from(v).expect("section serialises");
    table
        .as_table_mut()
        .expect("section is a table")
        .insert(key.to_string(), toml::Value::Float(value));
    table
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))
}

/// Initial profile row: values at a depth below the starting surface.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ProfileRow {
    pub depth_m: f64,
    pub temp_c: f64,
    pub do_mgl: f64,
    pub bod_mgl: f64,
}

pub fn load_profile(path: &Path) -> Result<Vec<ProfileRow>, ConfigError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut rows: Vec<ProfileRow> = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r.map_err(|e: csv::Error| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?);
    }
    if rows.is_empty() {
        return Err(ConfigError::Invalid(format!("{}: empty profile", path.display())));
    }
    if rows.windows(2).any(|w| w[1].depth_m <= w[0].depth_m) {
        return Err(ConfigError::Invalid(format!(
            "{}: depths must increase",
            path.display()
        )));
    }
    Ok(rows)
}

/// Linear interpolation in a profile, constant beyond its ends.
pub fn interpolate_profile(rows: &[ProfileRow], depth: f64) -> (f64, f64, f64) {
    let pick = |r: &ProfileRow| (r.temp_c, r.do_mgl, r.bod_mgl);
    if depth <= rows[0].depth_m {
        return pick(&rows[0]);
    }
    for w in rows.windows(2) {
        if depth <= w[1].depth_m {
            let f = (depth - w[0].depth_m) / (w[1].depth_m - w[0].depth_m);
            let (a, b) = (pick(&w[0]), pick(&w[1]));
            return (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1), a.2 + f * (b.2 - a.2));
        }
    }
    pick(rows.last().expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[run]
start_day = 0
end_day = 10
initial_surface_elevation_m = 40.0

[inputs]
bathymetry = "b.csv"
inflow = "i.csv"
met = "m.csv"
withdrawal = "w.csv"

[stations]
dam = 3
"#;

    #[test]
    fn defaults_fill_physics_sections() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.run.dt_seconds, 3600.0);
        assert_eq!(c.hydro, HydroParams::default());
        assert_eq!(c.oxygen.sod_20, 0.5);
        assert_eq!(c.stations["dam"], 3);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = MINIMAL.replace("[stations]", "[hydro]\nkz_maximum = 1.0\n[stations]");
        assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn reversed_horizon_rejected() {
        let text = MINIMAL.replace("end_day = 10", "end_day = 0");
        assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn parameters_by_name() {
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        c.set_parameter("kz_max", 2e-4).unwrap();
        c.set_parameter("oxygen.sod_20", 1.5).unwrap();
        assert_eq!(c.hydro.kz_max, 2e-4);
        assert_eq!(c.parameter("sod_20").unwrap(), 1.5);
        assert!(c.set_parameter("hydro.sod_20", 1.0).is_err());
        assert!(c.set_parameter("nope", 1.0).is_err());
    }

    #[test]
    fn round_trip_through_toml() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let again = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn profile_interpolation() {
        let rows = [
            ProfileRow { depth_m: 0.0, temp_c: 20.0, do_mgl: 9.0, bod_mgl: 1.0 },
            ProfileRow { depth_m: 10.0, temp_c: 10.0, do_mgl: 5.0, bod_mgl: 1.0 },
        ];
        assert_eq!(interpolate_profile(&rows, 5.0), (15.0, 7.0, 1.0));
        assert_eq!(interpolate_profile(&rows, 50.0), (10.0, 5.0, 1.0));
    }
}
