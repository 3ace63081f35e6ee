//! Surface heat exchange and vertical heat diffusion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::column::Column;
use crate::forcing::MetRecord;

/// Stefan-Boltzmann constant, W m-2 K-4.
pub const STEFAN_BOLTZMANN: f64 = 5.670_374_419e-8;
/// Volumetric heat capacity of water, J m-3 K-1.
pub const RHO_CP: f64 = 998.0 * 4184.0;
/// Latent heat of vaporisation, J kg-1.
pub const LATENT_HEAT: f64 = 2.45e6;
const KELVIN: f64 = 273.15;
const SOLAR_CONSTANT: f64 = 1367.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermalError {
    #[error("singular diffusion system at cell {0}")]
    SingularSystem(usize),
    #[error("negative diffusivity {value} at interface {index}")]
    NegativeDiffusivity { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalParams {
    pub transmissivity: f64,
    pub albedo: f64,
    pub cloud_attenuation: f64,
    pub emissivity: f64,
    pub brunt_c1: f64,
    pub brunt_c2: f64,
    pub cloud_longwave: f64,
    pub wind_a: f64,
    pub wind_b: f64,
    pub bowen: f64,
    /// Light extinction coefficient, m-1.
    pub light_extinction: f64,
    /// Turns off all surface exchange when false.
    pub surface_exchange: bool,
}

impl Default for ThermalParams {
    fn default() -> Self {
        Self {
            transmissivity: 0.75,
            albedo: 0.06,
            cloud_attenuation: 0.65,
            emissivity: 0.97,
            brunt_c1: 0.51,
            brunt_c2: 0.066,
            cloud_longwave: 0.17,
            wind_a: 9.2,
            wind_b: 0.46,
            bowen: 0.61,
            light_extinction: 0.45,
            surface_exchange: true,
        }
    }
}

/// Surface heat-flux components, W m-2. Latent and sensible are positive when
/// heat leaves the water.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeatFluxBreakdown {
    pub shortwave_net: f64,
    pub longwave_atm: f64,
    pub longwave_back: f64,
    pub latent: f64,
    pub sensible: f64,
    pub net: f64,
}

impl HeatFluxBreakdown {
    /// Evaporation rate as water depth per second.
    pub fn evaporation_rate(&self) -> f64 {
        (self.latent / (998.0 * LATENT_HEAT)).max(0.0)
    }
}

/// Saturation vapour pressure over water, hPa.
pub fn saturation_vapor_pressure(t: f64) -> f64 {
    6.112 * (17.62 * t / (243.12 + t)).exp()
}

/// Clear-sky shortwave at the surface, W m-2, for a fractional day of year.
pub fn clear_sky_shortwave(day_of_year: f64, latitude_deg: f64, transmissivity: f64) -> f64 {
    let doy = day_of_year.rem_euclid(365.0);
    let decl = (23.45f64).to_radians()
        * (2.0 * std::f64::consts::PI * (284.0 + doy.floor()) / 365.0).sin();
    let hour_angle = 2.0 * std::f64::consts::PI * (doy.fract() - 0.5);
    let lat = latitude_deg.to_radians();
    let cos_z = lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.cos();
    (SOLAR_CONSTANT * transmissivity * cos_z).max(0.0)
}

/// Bulk surface heat budget for one met record.
pub fn surface_heat_flux(
    met: &MetRecord,
    t_surface: f64,
    day_of_year: f64,
    latitude_deg: f64,
    p: &ThermalParams,
) -> HeatFluxBreakdown {
    if !p.surface_exchange {
        return HeatFluxBreakdown::default();
    }
    let c2 = met.cloud_frac * met.cloud_frac;
    let shortwave_net = clear_sky_shortwave(day_of_year, latitude_deg, p.transmissivity)
        * (1.0 - p.cloud_attenuation * c2)
        * (1.0 - p.albedo);
    let e_a = saturation_vapor_pressure(met.t_dew);
    let ta = met.t_air + KELVIN;
    let ts = t_surface + KELVIN;
    let longwave_atm = p.emissivity
        * STEFAN_BOLTZMANN
        * ta.powi(4)
        * (p.brunt_c1 + p.brunt_c2 * e_a.sqrt())
        * (1.0 + p.cloud_longwave * c2);
    let longwave_back = p.emissivity * STEFAN_BOLTZMANN * ts.powi(4);
    let fw = p.wind_a + p.wind_b * met.wind_speed * met.wind_speed;
    let latent = fw * (saturation_vapor_pressure(t_surface) - e_a);
    let sensible = fw * p.bowen * (t_surface - met.t_air);
    HeatFluxBreakdown {
        shortwave_net,
        longwave_atm,
        longwave_back,
        latent,
        sensible,
        net: shortwave_net + longwave_atm - longwave_back - latent - sensible,
    }
}

/// Applies the surface budget to a column: non-solar terms into the top cell,
/// shortwave by exponential decay with depth and the remainder into the bottom
/// cell. Returns the heat added, J.
pub fn apply_surface_flux(column: &mut Column, flux: &HeatFluxBreakdown, light_extinction: f64, dt: f64) -> f64 {
    let n = column.len();
    if n == 0 {
        return 0.0;
    }
    let area = column.surface_area;
    let mut energy = vec![0.0; n];
    energy[0] = (flux.net - flux.shortwave_net) * area * dt;
    if flux.shortwave_net != 0.0 {
        let sw = flux.shortwave_net * area * dt;
        let mut depth = 0.0;
        let mut above = 1.0;
        for j in 0..n {
            if j + 1 == n {
                energy[j] += sw * above;
                break;
            }
            depth += column.thickness[j];
            let below = (-light_extinction * depth).exp();
            energy[j] += sw * (above - below);
            above = below;
        }
    }
    let mut added = 0.0;
    for j in 0..n {
        if energy[j] != 0.0 {
            column.temp[j] += energy[j] / (RHO_CP * column.volume[j]);
            added += energy[j];
        }
    }
    added
}

/// Implicit diffusion of one scalar on a column ladder with zero-flux ends.
///
/// `kz` holds one diffusivity per interface. The system is solved for the
/// increment so a uniform profile stays bit-identical.
pub fn diffuse_scalar(column: &Column, kz: &[f64], dt: f64, x: &mut [f64]) -> Result<(), ThermalError> {
    diffuse_scalars(column, kz, dt, [x])
}

/// [`diffuse_scalar`] for several scalars sharing one factorisation.
pub fn diffuse_scalars<const K: usize>(
    column: &Column,
    kz: &[f64],
    dt: f64,
    xs: [&mut [f64]; K],
) -> Result<(), ThermalError> {
    let n = column.len();
    if n < 2 {
        return Ok(());
    }
    let vol = &column.volume[..n];
    let ce = &column.center_elevation[..n];
    let ia = &column.interface_area[..n - 1];
    let kz = &kz[..n - 1];
    // per cell: conductance to the cell below, inverted pivot, multiplier
    let mut lu = vec![[0.0f64; 3]; n];
    for j in 0..n - 1 {
        if kz[j] < 0.0 || !kz[j].is_finite() {
            return Err(ThermalError::NegativeDiffusivity { index: j, value: kz[j] });
        }
        let dz = ce[j] - ce[j + 1];
        if dz <= 0.0 {
            return Err(ThermalError::SingularSystem(j));
        }
        lu[j][0] = dt * kz[j] * ia[j] / dz;
    }
    let mut above = 0.0;
    let mut prev_pivot = 1.0;
    for j in 0..n {
        if vol[j] <= 0.0 {
            return Err(ThermalError::SingularSystem(j));
        }
        let mut b = vol[j] + above + lu[j][0];
        let m = if j > 0 { -above / prev_pivot } else { 0.0 };
        b += m * above;
        if b <= 0.0 || !b.is_finite() {
            return Err(ThermalError::SingularSystem(j));
        }
        lu[j][1] = 1.0 / b;
        lu[j][2] = m;
        above = lu[j][0];
        prev_pivot = b;
    }
    // scalars advance together so their recurrences overlap
    let mut r = vec![[0.0f64; K]; n];
    for j in 0..n {
        for (s, x) in xs.iter().enumerate() {
            let mut rj = 0.0;
            if j > 0 {
                rj += lu[j - 1][0] * (x[j - 1] - x[j]);
            }
            if j + 1 < n {
                rj += lu[j][0] * (x[j + 1] - x[j]);
            }
            r[j][s] = rj;
        }
    }
    for j in 1..n {
        let m = lu[j][2];
        let prev = r[j - 1];
        for (rs, p) in r[j].iter_mut().zip(prev) {
            *rs -= m * p;
        }
    }
    for rs in r[n - 1].iter_mut() {
        *rs *= lu[n - 1][1];
    }
    for j in (0..n - 1).rev() {
        let (d, inv) = (lu[j][0], lu[j][1]);
        let next = r[j + 1];
        for (rs, q) in r[j].iter_mut().zip(next) {
            *rs = (*rs + d * q) * inv;
        }
    }
    for (s, x) in xs.into_iter().enumerate() {
        for (xj, rj) in x[..n].iter_mut().zip(&r) {
            *xj += rj[s];
        }
    }
    Ok(())
}

/// Implicit vertical diffusion of temperature.
pub fn diffuse_temperature(column: &mut Column, kz: &[f64], dt: f64) -> Result<(), ThermalError> {
    let mut t = std::mem::take(&mut column.temp);
    let r = diffuse_scalar(column, kz, dt, &mut t);
    column.temp = t;
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn met(t_air: f64, t_dew: f64, wind: f64, cloud: f64) -> MetRecord {
        MetRecord {
            day: 0.0,
            t_air,
            t_dew,
            wind_speed: wind,
            wind_dir: 0.0,
            cloud_frac: cloud,
        }
    }

    #[test]
    fn equal_temperatures_at_night() {
        let p = ThermalParams::default();
        let f = surface_heat_flux(&met(15.0, 15.0, 3.0, 1.0), 15.0, 180.0, 36.0, &p);
        assert_eq!(f.shortwave_net, 0.0);
        assert_eq!(f.latent, 0.0);
        assert_eq!(f.sensible, 0.0);
        assert_eq!(f.net, f.longwave_atm - f.longwave_back);
        assert!(f.net < 0.0 && f.net > -100.0);
    }

    #[test]
    fn latent_grows_with_wind() {
        let p = ThermalParams::default();
        let a = surface_heat_flux(&met(20.0, 10.0, 2.0, 0.0), 20.0, 180.5, 36.0, &p);
        let b = surface_heat_flux(&met(20.0, 10.0, 4.0, 0.0), 20.0, 180.5, 36.0, &p);
        assert!(a.latent > 0.0);
        assert!(b.latent > a.latent);
    }

    #[test]
    fn standard_case_matches_hand_evaluation() {
        let p = ThermalParams::default();
        let f = surface_heat_flux(&met(20.0, 15.0, 3.0, 0.5), 25.0, 180.5, 36.0, &p);
        // solar geometry at noon on day 180
        let decl = 23.45f64.to_radians() * (2.0 * std::f64::consts::PI * 464.0 / 365.0).sin();
        let lat = 36f64.to_radians();
        let cos_z = lat.sin() * decl.sin() + lat.cos() * decl.cos();
        let sw = 1367.0 * 0.75 * cos_z * (1.0 - 0.65 * 0.25) * 0.94;
        let ea = 6.112 * (17.62 * 15.0 / 258.12f64).exp();
        let es = 6.112 * (17.62 * 25.0 / 268.12f64).exp();
        let lw_atm = 0.97 * 5.670374419e-8 * 293.15f64.powi(4) * (0.51 + 0.066 * ea.sqrt()) * (1.0 + 0.17 * 0.25);
        let lw_back = 0.97 * 5.670374419e-8 * 298.15f64.powi(4);
        let fw = 9.2 + 0.46 * 9.0;
        let latent = fw * (es - ea);
        let sensible = fw * 0.61 * 5.0;
        let net = sw + lw_atm - lw_back - latent - sensible;
        assert!((f.shortwave_net - sw).abs() < 1e-9);
        assert!((f.longwave_atm - lw_atm).abs() < 1e-9);
        assert!((f.longwave_back - lw_back).abs() < 1e-9);
        assert!((f.latent - latent).abs() < 1e-9);
        assert!((f.sensible - sensible).abs() < 1e-9);
        assert!((f.net - net).abs() < 1e-9);
        assert!((-1000.0..=1100.0).contains(&f.net));
        // frozen regression value
        assert!((f.net - 448.59).abs() < 0.01, "net = {}", f.net);
    }

    fn column(t: Vec<f64>) -> Column {
        let n = t.len();
        Column::from_layers(&vec![1.0; n], &vec![100.0; n], 0.0, t, vec![8.0; n], vec![0.0; n])
    }

    #[test]
    fn zero_flux_is_identity() {
        let mut c = column(vec![20.0, 15.0]);
        let before = c.clone();
        apply_surface_flux(&mut c, &HeatFluxBreakdown::default(), 0.45, 3600.0);
        assert_eq!(c, before);
    }

    #[test]
    fn nonsolar_flux_warms_surface_cell() {
        let mut c = column(vec![20.0, 15.0]);
        let flux = HeatFluxBreakdown { net: 100.0, ..Default::default() };
        let added = apply_surface_flux(&mut c, &flux, 0.45, 3600.0);
        let dt = 100.0 * 3600.0 / (998.0 * 4184.0 * 1.0);
        assert!((c.temp[0] - 20.0 - dt).abs() < 1e-12);
        assert!((dt - 0.0862).abs() < 1e-4);
        assert!((added - 100.0 * 100.0 * 3600.0).abs() < 1e-6);
    }

    #[test]
    fn shortwave_fully_absorbed() {
        let mut c = column(vec![20.0, 15.0, 10.0]);
        let flux = HeatFluxBreakdown { shortwave_net: 300.0, net: 300.0, ..Default::default() };
        let h0 = c.content(crate::hydro::Constituent::Temperature);
        let added = apply_surface_flux(&mut c, &flux, 0.45, 3600.0);
        let h1 = c.content(crate::hydro::Constituent::Temperature);
        assert!((added - 300.0 * 100.0 * 3600.0).abs() < 1e-6);
        assert!(((h1 - h0) * RHO_CP - added).abs() / added < 1e-12);
        assert!(c.temp[0] - 20.0 > c.temp[1] - 15.0);
    }

    #[test]
    fn uniform_column_diffuses_to_itself() {
        let mut c = column(vec![12.5; 4]);
        diffuse_temperature(&mut c, &[1e-3; 3], 3600.0).unwrap();
        assert!(c.temp.iter().all(|&t| t == 12.5));
    }

    #[test]
    fn strong_diffusion_reaches_mean() {
        let mut c = Column::from_layers(&[1.0, 2.0], &[100.0, 100.0], 0.0, vec![20.0, 10.0], vec![0.0; 2], vec![0.0; 2]);
        diffuse_temperature(&mut c, &[1e3], 86_400.0).unwrap();
        let mean = (20.0 * 100.0 + 10.0 * 200.0) / 300.0;
        assert!((c.temp[0] - mean).abs() < 1e-4);
        assert!((c.temp[1] - mean).abs() < 1e-4);
    }

    #[test]
    fn negative_kz_rejected() {
        let mut c = column(vec![12.0, 11.0]);
        assert!(matches!(
            diffuse_temperature(&mut c, &[-1.0], 10.0),
            Err(ThermalError::NegativeDiffusivity { .. })
        ));
    }
}
