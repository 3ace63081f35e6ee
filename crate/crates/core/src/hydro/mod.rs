//! Laterally averaged hydrodynamic core: density, inflow placement, continuity
//! routing, upwind transport, vertical mixing and the level-pool water surface.

mod flow;
mod mixing;

pub use flow::{
    advect, advect_substepped, build_flow_field, required_substeps, AdvectAudit, BoundaryState,
    FlowField, FlowInputs, Transport,
};
pub use mixing::{
    convective_adjustment, kz_profile, vertical_mixing, MixingForcing, MixingReport,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{AreaVolumeCurve, Grid};

/// Gravitational acceleration, m s-2.
pub const GRAVITY: f64 = 9.81;
/// Reference water density used for buoyancy and heat capacity, kg m-3.
pub const RHO_REF: f64 = 998.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HydroError {
    #[error("temperature {0} degC outside [-2, 45]")]
    OutOfRange(f64),
    #[error("no wet layer in column")]
    NoWetLayer,
    #[error("no wet path from the inflow segment to the dam (segment {segment})")]
    DryPath { segment: usize },
    #[error("CFL violated in cell ({segment}, {layer}): outflow*dt/volume = {ratio}")]
    CflViolation {
        segment: usize,
        layer: usize,
        ratio: f64,
    },
    #[error("reservoir overflow: volume {volume} m3 exceeds capacity {capacity} m3")]
    ReservoirOverflow { volume: f64, capacity: f64 },
    #[error("reservoir empty: volume would become {volume} m3")]
    ReservoirEmpty { volume: f64 },
    #[error("distribution places water in a dry cell (layer {layer})")]
    InvalidDistribution { layer: usize },
    #[error("singular diffusion system in layer {0}")]
    SingularSystem(usize),
}

/// Physical constants and closure parameters of the hydrodynamic core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroParams {
    /// Background vertical diffusivity, m2 s-1.
    pub kz_min: f64,
    /// Diffusivity in unstratified water, m2 s-1.
    pub kz_max: f64,
    /// Stratification damping of Kz, s2.
    pub sigma: f64,
    /// Fraction of wind energy u*^3 available for entrainment.
    pub wind_efficiency: f64,
    /// Wind drag coefficient.
    pub drag_coefficient: f64,
    /// Air density, kg m-3.
    pub air_density: f64,
    /// Fraction of convective energy w*^3 available for entrainment.
    pub convective_efficiency: f64,
    /// Fraction of inflow kinetic-energy flux available for entrainment.
    pub inflow_mixing_efficiency: f64,
    /// e-folding time of unused turbulent energy, s.
    pub tke_decay_s: f64,
    /// Half-width (in layers) of the interflow insertion kernel.
    pub interflow_half_width: usize,
    /// Half-width (in layers) of the withdrawal kernel around the intake.
    pub withdrawal_half_width: usize,
    /// Re-place the inflow at its neutral level in every segment it passes,
    /// so a dense current follows the bed toward the dam.
    pub density_current: bool,
}

impl Default for HydroParams {
    fn default() -> Self {
        Self {
            kz_min: 1e-7,
            kz_max: 1e-4,
            sigma: 1e5,
            wind_efficiency: 0.4,
            drag_coefficient: 1.3e-3,
            air_density: 1.2,
            convective_efficiency: 0.5,
            inflow_mixing_efficiency: 0.2,
            tke_decay_s: 86_400.0,
            interflow_half_width: 2,
            withdrawal_half_width: 2,
            density_current: true,
        }
    }
}

impl HydroParams {
    /// Friction velocity in water for a 10 m wind speed.
    pub fn friction_velocity(&self, wind_speed: f64) -> f64 {
        (self.drag_coefficient * self.air_density / RHO_REF).sqrt() * wind_speed
    }
}

/// Per-cell state on the segment x layer grid. Storage is segment-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    segments: usize,
    layers: usize,
    pub temp: Vec<f64>,
    pub oxygen: Vec<f64>,
    pub bod: Vec<f64>,
    /// Tracked cell volumes, m3. Zero marks a dry cell.
    pub volume: Vec<f64>,
}

impl CellField {
    /// Uniform state on every wet cell at surface elevation `e`.
    pub fn uniform(grid: &Grid, e: f64, temp: f64, oxygen: f64, bod: f64) -> Self {
        let n = grid.cell_count();
        let mut volume = vec![0.0; n];
        for i in 0..grid.segment_count() {
            for k in 0..grid.layer_count() {
                volume[grid.index(i, k)] = grid.cell_volume(i, k, e);
            }
        }
        Self {
            segments: grid.segment_count(),
            layers: grid.layer_count(),
            temp: vec![temp; n],
            oxygen: vec![oxygen; n],
            bod: vec![bod; n],
            volume,
        }
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    #[inline]
    pub fn index(&self, segment: usize, layer: usize) -> usize {
        segment * self.layers + layer
    }

    #[inline]
    pub fn is_wet(&self, segment: usize, layer: usize) -> bool {
        self.volume[self.index(segment, layer)] > 0.0
    }

    pub fn total_volume(&self) -> f64 {
        self.volume.iter().sum()
    }

    /// Sum of value x volume over wet cells for one constituent.
    pub fn content(&self, c: Constituent) -> f64 {
        self.values(c)
            .iter()
            .zip(&self.volume)
            .filter(|(_, v)| **v > 0.0)
            .map(|(x, v)| x * v)
            .sum()
    }

    pub fn values(&self, c: Constituent) -> &[f64] {
        match c {
            Constituent::Temperature => &self.temp,
            Constituent::Oxygen => &self.oxygen,
            Constituent::Bod => &self.bod,
        }
    }

    pub fn values_mut(&mut self, c: Constituent) -> &mut [f64] {
        match c {
            Constituent::Temperature => &mut self.temp,
            Constituent::Oxygen => &mut self.oxygen,
            Constituent::Bod => &mut self.bod,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constituent {
    Temperature,
    Oxygen,
    Bod,
}

impl Constituent {
    pub const ALL: [Constituent; 3] = [
        Constituent::Temperature,
        Constituent::Oxygen,
        Constituent::Bod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Constituent::Temperature => "temp",
            Constituent::Oxygen => "do",
            Constituent::Bod => "bod",
        }
    }
}

impl std::str::FromStr for Constituent {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temp" | "temperature" | "t" => Ok(Constituent::Temperature),
            "do" | "oxygen" => Ok(Constituent::Oxygen),
            "bod" => Ok(Constituent::Bod),
            other => Err(format!("unknown constituent `{other}`")),
        }
    }
}

/// Level-pool water surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceState {
    pub surface_elevation_m: f64,
}

/// Density of fresh water from temperature alone, kg m-3.
pub fn water_density(t: f64) -> Result<f64, HydroError> {
    if !(-2.0..=45.0).contains(&t) {
        return Err(HydroError::OutOfRange(t));
    }
    let d = t - 3.9863;
    Ok(1000.0 * (1.0 - (t + 288.9414) / (508_929.2 * (t + 68.12963)) * d * d))
}

/// Thermal expansion coefficient -(1/rho) drho/dT, K-1, by central difference.
pub fn thermal_expansion(t: f64) -> Result<f64, HydroError> {
    let h = 1e-3;
    let lo = (t - h).max(-2.0);
    let hi = (t + h).min(45.0);
    let rho = water_density(t)?;
    Ok(-(water_density(hi)? - water_density(lo)?) / ((hi - lo) * rho))
}

/// Index of the neutral-buoyancy layer for inflow density `rho_in` in a column
/// ordered top to bottom: the upper layer of the first pair, scanning down,
/// that brackets `rho_in`. Overflow and underflow return the end layers.
pub fn neutral_layer(densities: &[f64], rho_in: f64) -> Result<usize, HydroError> {
    let n = densities.len();
    if n == 0 {
        return Err(HydroError::NoWetLayer);
    }
    if rho_in <= densities[0] {
        return Ok(0);
    }
    if rho_in >= densities[n - 1] {
        return Ok(n - 1);
    }
    Ok((0..n - 1)
        .find(|&k| densities[k] <= rho_in && rho_in <= densities[k + 1])
        .unwrap_or(n - 1))
}

/// Triangular kernel weights of the given half-width, truncated to `[0, n)` and
/// normalised to one. Weight at offset d is proportional to `half_width + 1 - |d|`.
pub fn kernel_weights(n: usize, center: usize, half_width: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let lo = center.saturating_sub(half_width);
    let hi = (center + half_width).min(n - 1);
    for (k, wk) in w.iter_mut().enumerate().take(hi + 1).skip(lo) {
        *wk = (half_width + 1 - k.abs_diff(center)) as f64;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Per-layer insertion weights for an inflow of density `rho_in` entering a
/// column whose wet layer densities are given top to bottom.
///
/// Denser than the bed layer: everything on the bed layer (underflow). Lighter
/// than or equal to the surface layer: everything on the surface (overflow).
/// Otherwise a triangular kernel around the neutral layer (interflow).
pub fn inflow_placement(
    densities: &[f64],
    rho_in: f64,
    half_width: usize,
) -> Result<Vec<f64>, HydroError> {
    let n = densities.len();
    if n == 0 {
        return Err(HydroError::NoWetLayer);
    }
    let mut w = vec![0.0; n];
    if rho_in <= densities[0] {
        w[0] = 1.0;
        return Ok(w);
    }
    if rho_in >= densities[n - 1] {
        w[n - 1] = 1.0;
        return Ok(w);
    }
    let center = neutral_layer(densities, rho_in)?;
    Ok(kernel_weights(n, center, half_width))
}

/// Layer that carries horizontal flow near the surface for elevation `e`: the
/// layer holding the surface, or the one below it when the surface layer is
/// less than half wet.
pub fn flow_surface_layer(grid: &Grid, e: f64) -> Option<usize> {
    let k = grid.layer_containing(e)?;
    let frac = grid.wet_thickness(k, e) / grid.thickness(k);
    if frac < 0.5 && k + 1 < grid.layer_count() {
        Some(k + 1)
    } else {
        Some(k)
    }
}

/// Elevation that stores volume `v`, with overflow/empty errors.
pub fn elevation_for_volume(curve: &AreaVolumeCurve, v: f64) -> Result<f64, HydroError> {
    let capacity = curve.rows.last().map(|r| r.volume_m3).unwrap_or(0.0);
    if v < 0.0 {
        return Err(HydroError::ReservoirEmpty { volume: v });
    }
    if v > capacity * (1.0 + 1e-12) {
        return Err(HydroError::ReservoirOverflow {
            volume: v,
            capacity,
        });
    }
    Ok(curve
        .elevation_at_volume(v.min(capacity))
        .expect("volume within curve range"))
}

/// Moves the level-pool surface by `(q_in - q_out - E * A_surface) * dt`.
///
/// `evaporation_m_s` is the evaporation rate as a water depth per second.
pub fn update_surface(
    surface: SurfaceState,
    q_in: f64,
    q_out: f64,
    evaporation_m_s: f64,
    grid: &Grid,
    dt: f64,
) -> Result<SurfaceState, HydroError> {
    let e0 = surface.surface_elevation_m;
    let v0 = grid
        .total_volume(e0)
        .map_err(|_| HydroError::ReservoirEmpty { volume: 0.0 })?;
    let area = grid.surface_area(e0).unwrap_or(0.0);
    let v1 = v0 + (q_in - q_out - evaporation_m_s * area) * dt;
    let e1 = elevation_for_volume(&grid.area_volume_curve(), v1)?;
    Ok(SurfaceState {
        surface_elevation_m: e1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_maximum_is_exact() {
        assert_eq!(water_density(3.9863).unwrap(), 1000.0);
    }

    #[test]
    fn density_at_25() {
        // hand evaluation of the formula at 25 degC
        let t: f64 = 25.0;
        let oracle = 1000.0 * (1.0 - (t + 288.9414) / (508929.2 * (t + 68.12963)) * (t - 3.9863).powi(2));
        assert!((oracle - 997.0751).abs() < 1e-3);
        assert!((water_density(25.0).unwrap() - 997.075).abs() < 1e-3);
    }

    #[test]
    fn density_monotone_above_four() {
        assert!(water_density(10.0).unwrap() > water_density(20.0).unwrap());
        assert!(matches!(water_density(50.0), Err(HydroError::OutOfRange(_))));
    }

    #[test]
    fn underflow_goes_to_bed() {
        let rho = [998.0, 999.0, 999.5];
        assert_eq!(inflow_placement(&rho, 1000.0, 2).unwrap(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn tie_with_uniform_column_overflows() {
        let rho = [999.0; 5];
        assert_eq!(
            inflow_placement(&rho, 999.0, 2).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn interflow_kernel_centered_on_bracket() {
        // layers 1..10 (index 0..9); rho_in between layer 6 and 7 (index 5 and 6)
        let rho: Vec<f64> = (0..10).map(|k| 998.0 + 0.1 * k as f64).collect();
        let w = inflow_placement(&rho, 998.55, 2).unwrap();
        let argmax = w
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 5);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[3], 1.0 / 9.0);
        assert_eq!(w[7], 1.0 / 9.0);
        assert_eq!(w[2], 0.0);
    }

    #[test]
    fn kernel_truncated_at_surface() {
        let w = kernel_weights(6, 0, 2);
        assert_eq!(w, vec![0.5, 2.0 / 6.0, 1.0 / 6.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_column_errors() {
        assert_eq!(inflow_placement(&[], 999.0, 2), Err(HydroError::NoWetLayer));
    }

    fn one_cell() -> Grid {
        Grid::uniform(vec![(1, 50.0, vec![20.0])], 1, 1.0, 0.0).unwrap()
    }

    #[test]
    fn surface_rises_one_metre() {
        let s = SurfaceState {
            surface_elevation_m: 0.0,
        };
        let s1 = update_surface(s, 1.0, 0.0, 0.0, &one_cell(), 1000.0).unwrap();
        assert!((s1.surface_elevation_m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_flow_keeps_level() {
        let s = SurfaceState {
            surface_elevation_m: 0.4,
        };
        let s1 = update_surface(s, 3.0, 3.0, 0.0, &one_cell(), 3600.0).unwrap();
        assert_eq!(s1.surface_elevation_m, 0.4);
    }

    #[test]
    fn drawdown_below_bed_is_empty() {
        let s = SurfaceState {
            surface_elevation_m: 0.5,
        };
        assert!(matches!(
            update_surface(s, 0.0, 1.0, 0.0, &one_cell(), 1000.0),
            Err(HydroError::ReservoirEmpty { .. })
        ));
        assert!(matches!(
            update_surface(s, 1.0, 0.0, 0.0, &one_cell(), 1000.0),
            Err(HydroError::ReservoirOverflow { .. })
        ));
    }
}
