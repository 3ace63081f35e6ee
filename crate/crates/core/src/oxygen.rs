//! Dissolved-oxygen kinetics: BOD decay, sediment demand and surface reaeration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::column::Column;
use crate::grid::Grid;
use crate::hydro::CellField;

const SECONDS_PER_DAY: f64 = 86_400.0;
/// Upper clamp on the reaeration rate, d-1.
pub const MAX_REAERATION: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OxygenError {
    #[error("temperature {0} degC outside [0, 45]")]
    OutOfRange(f64),
    #[error("invalid oxygen parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OxygenParams {
    /// BOD decay rate at 20 degC, d-1.
    pub k_bod_20: f64,
    pub theta_bod: f64,
    /// Sediment oxygen demand at 20 degC, g m-2 d-1.
    pub sod_20: f64,
    pub theta_sod: f64,
    /// Reaeration scale, m d-1.
    pub k_a_base: f64,
    pub theta_rea: f64,
}

impl Default for OxygenParams {
    fn default() -> Self {
        Self {
            k_bod_20: 0.2,
            theta_bod: 1.047,
            sod_20: 0.5,
            theta_sod: 1.065,
            k_a_base: 0.6,
            theta_rea: 1.024,
        }
    }
}

impl OxygenParams {
    pub fn validate(&self) -> Result<(), OxygenError> {
        for (name, value) in [
            ("k_bod_20", self.k_bod_20),
            ("sod_20", self.sod_20),
            ("k_a_base", self.k_a_base),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(OxygenError::InvalidParameter { name, value });
            }
        }
        for (name, value) in [
            ("theta_bod", self.theta_bod),
            ("theta_sod", self.theta_sod),
            ("theta_rea", self.theta_rea),
        ] {
            if !(1.0..=1.2).contains(&value) {
                return Err(OxygenError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }
}

/// Oxygen solubility in fresh water, mg L-1.
pub fn do_saturation(t: f64) -> Result<f64, OxygenError> {
    if !(0.0..=45.0).contains(&t) {
        return Err(OxygenError::OutOfRange(t));
    }
    Ok(14.652 - 0.41022 * t + 0.007_991_0 * t * t - 0.000_077_774 * t * t * t)
}

/// Surface reaeration rate, d-1.
pub fn reaeration_rate(wind_speed: f64, t_surface: f64, thickness: f64, p: &OxygenParams) -> f64 {
    let k = (p.k_a_base + 0.24 * wind_speed * wind_speed) / thickness
        * p.theta_rea.powf(t_surface - 20.0);
    k.clamp(0.0, MAX_REAERATION)
}

/// Oxygen bookkeeping for a kinetics call, in g (mg L-1 x m3).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KineticsAudit {
    pub bod_decayed: f64,
    pub sod_consumed: f64,
    pub reaeration: f64,
    /// Demand that would have driven DO negative and was discarded.
    pub unmet_demand: f64,
}

impl KineticsAudit {
    pub fn add(&mut self, o: &KineticsAudit) {
        self.bod_decayed += o.bod_decayed;
        self.sod_consumed += o.sod_consumed;
        self.reaeration += o.reaeration;
        self.unmet_demand += o.unmet_demand;
    }

    /// Net change in dissolved-oxygen mass implied by the audit.
    pub fn net_oxygen(&self) -> f64 {
        self.reaeration - self.bod_decayed - self.sod_consumed + self.unmet_demand
    }
}

/// Kinetics on one column. The top cell exchanges with the atmosphere and every
/// cell with exposed bed loses sediment demand.
pub fn kinetics_column(
    column: &mut Column,
    p: &OxygenParams,
    wind_speed: f64,
    dt: f64,
) -> Result<KineticsAudit, OxygenError> {
    let days = dt / SECONDS_PER_DAY;
    let (ln_bod, ln_sod) = (p.theta_bod.ln(), p.theta_sod.ln());
    let mut audit = KineticsAudit::default();
    for j in 0..column.len() {
        let t = column.temp[j];
        let v = column.volume[j];
        let l0 = column.bod[j];
        let l1 = l0 * (-p.k_bod_20 * ((t - 20.0) * ln_bod).exp() * days).exp();
        let decayed = l0 - l1;
        column.bod[j] = l1;
        let sod = if column.bed_area[j] > 0.0 && v > 0.0 {
            p.sod_20 * ((t - 20.0) * ln_sod).exp() * column.bed_area[j] * days / v
        } else {
            0.0
        };
        let mut x = column.oxygen[j] - decayed - sod;
        audit.bod_decayed += decayed * v;
        audit.sod_consumed += sod * v;
        if x < 0.0 {
            audit.unmet_demand += -x * v;
            x = 0.0;
        }
        if j == 0 {
            let k = reaeration_rate(wind_speed, t, column.thickness[0], p);
            if k > 0.0 {
                let sat = do_saturation(t.clamp(0.0, 45.0))?;
                let y = sat - (sat - x) * (-k * days).exp();
                audit.reaeration += (y - x) * v;
                x = y;
            }
        }
        column.oxygen[j] = x;
    }
    Ok(audit)
}

/// Kinetics over every wet column of the field.
pub fn kinetics_step(
    field: &mut CellField,
    grid: &Grid,
    surface_m: f64,
    p: &OxygenParams,
    wind_speed: f64,
    dt: f64,
) -> Result<KineticsAudit, OxygenError> {
    let mut audit = KineticsAudit::default();
    for i in 0..grid.segment_count() {
        if let Some((mut col, map)) = Column::extract(field, grid, i, surface_m) {
            audit.add(&kinetics_column(&mut col, p, wind_speed, dt)?);
            col.write_back(field, &map);
        }
    }
    Ok(audit)
}

/// Cells below an oxygen threshold with their extent.
#[derive(Debug, Clone, PartialEq)]
pub struct AnoxiaSummary {
    pub mask: Vec<bool>,
    pub volume_m3: f64,
    /// Lowest and highest layer-center elevation of marked cells.
    pub elevation_range_m: Option<(f64, f64)>,
    /// Nearest and farthest segment-center distance from the dam of marked cells.
    pub distance_range_m: Option<(f64, f64)>,
}

pub fn anoxia_mask(field: &CellField, grid: &Grid, threshold: f64) -> AnoxiaSummary {
    let mut mask = vec![false; field.volume.len()];
    let mut volume = 0.0;
    let mut elev: Option<(f64, f64)> = None;
    let mut dist: Option<(f64, f64)> = None;
    let widen = |r: Option<(f64, f64)>, x: f64| match r {
        None => Some((x, x)),
        Some((a, b)) => Some((a.min(x), b.max(x))),
    };
    for i in 0..grid.segment_count() {
        for k in 0..grid.layer_count() {
            let c = field.index(i, k);
            if field.volume[c] > 0.0 && field.oxygen[c] < threshold {
                mask[c] = true;
                volume += field.volume[c];
                elev = widen(elev, grid.layer_center(k));
                dist = widen(dist, grid.distance_from_dam(i));
            }
        }
    }
    AnoxiaSummary {
        mask,
        volume_m3: volume,
        elevation_range_m: elev,
        distance_range_m: dist,
    }
}

/// Thickness of water below the threshold in one segment, m.
pub fn anoxic_thickness(field: &CellField, grid: &Grid, segment: usize, surface_m: f64, threshold: f64) -> f64 {
    (0..grid.layer_count())
        .filter(|&k| {
            let c = field.index(segment, k);
            field.volume[c] > 0.0 && field.oxygen[c] < threshold
        })
        .map(|k| grid.wet_thickness(k, surface_m))
        .fold(0.0, |a, h| a + h)
}
