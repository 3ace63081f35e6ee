use crate::column::Column;
use crate::hydro::{water_density, HydroError, HydroParams, GRAVITY, RHO_REF};
use crate::thermal::{diffuse_scalars, ThermalError};

/// Energy sources for the surface mixed layer over one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MixingForcing {
    pub wind_speed: f64,
    /// Surface buoyancy loss, m2 s-3. Positive when the surface is cooling.
    pub buoyancy_flux: f64,
    /// Kinetic-energy flux of the boundary inflow per unit surface area, W m-2.
    pub inflow_power: f64,
    /// Unused turbulent energy carried from the previous step, J m-2.
    pub carried_energy: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MixingReport {
    /// Cells merged by convective adjustment.
    pub convective_merges: usize,
    /// Cells entrained by the mixed layer.
    pub entrained: usize,
    /// Energy left for the next step, J m-2.
    pub carried_energy: f64,
}

impl From<ThermalError> for HydroError {
    fn from(e: ThermalError) -> Self {
        match e {
            ThermalError::SingularSystem(j) => HydroError::SingularSystem(j),
            ThermalError::NegativeDiffusivity { index, .. } => HydroError::SingularSystem(index),
        }
    }
}

struct Group {
    first: usize,
    last: usize,
    volume: f64,
    x: [f64; 3],
    rho: f64,
}

/// Mixes every statically unstable pair until density is non-decreasing with
/// depth. Returns the number of merges.
pub fn convective_adjustment(column: &mut Column) -> Result<usize, HydroError> {
    let n = column.len();
    let mut groups: Vec<Group> = Vec::with_capacity(n);
    let mut merges = 0;
    for j in 0..n {
        groups.push(Group {
            first: j,
            last: j,
            volume: column.volume[j],
            x: [column.temp[j], column.oxygen[j], column.bod[j]],
            rho: water_density(column.temp[j])?,
        });
        while groups.len() >= 2 {
            let m = groups.len();
            if groups[m - 2].rho <= groups[m - 1].rho {
                break;
            }
            let lower = groups.pop().expect("two groups");
            let upper = groups.last_mut().expect("two groups");
            let v = upper.volume + lower.volume;
            for c in 0..3 {
                upper.x[c] += lower.volume * (lower.x[c] - upper.x[c]) / v;
            }
            upper.volume = v;
            upper.last = lower.last;
            upper.rho = water_density(upper.x[0])?;
            merges += 1;
        }
    }
    if merges > 0 {
        for g in &groups {
            for j in g.first..=g.last {
                column.temp[j] = g.x[0];
                column.oxygen[j] = g.x[1];
                column.bod[j] = g.x[2];
            }
        }
    }
    Ok(merges)
}

/// Interface diffusivities from the local buoyancy frequency.
pub fn kz_profile(column: &Column, p: &HydroParams) -> Result<Vec<f64>, HydroError> {
    let rho = column.densities()?;
    Ok((0..column.len().saturating_sub(1))
        .map(|j| {
            let dz = column.center_elevation[j] - column.center_elevation[j + 1];
            let n2 = (GRAVITY / RHO_REF) * (rho[j + 1] - rho[j]) / dz;
            p.kz_min + (p.kz_max - p.kz_min) / (1.0 + p.sigma * n2.max(0.0))
        })
        .collect())
}

/// Deepens the surface mixed layer one cell at a time while the available
/// energy covers the potential-energy cost of entrainment. Returns the number
/// of cells entrained and the energy left over.
fn entrain(column: &mut Column, mut energy: f64) -> Result<(usize, f64), HydroError> {
    let n = column.len();
    if n < 2 || column.surface_area <= 0.0 {
        return Ok((0, energy));
    }
    let z = |j: usize| column.center_elevation[j] - column.surface_elevation;
    let drho = |t: f64| water_density(t).map(|r| r - RHO_REF);

    let mut v = column.volume[0];
    let mut zv = z(0) * v;
    let mut x = [column.temp[0], column.oxygen[0], column.bod[0]];
    let mut rho = drho(x[0])?;
    let mut entrained = 0;
    for j in 1..n {
        let vj = column.volume[j];
        let rj = drho(column.temp[j])?;
        let sv = v + vj;
        let szv = zv + z(j) * vj;
        let srv = rho * v + rj * vj;
        let srzv = rho * zv + rj * z(j) * vj;
        let cost = (GRAVITY * (szv / sv * srv - srzv) / column.surface_area).max(0.0);
        if cost > energy {
            break;
        }
        energy -= cost;
        let y = [column.temp[j], column.oxygen[j], column.bod[j]];
        for c in 0..3 {
            x[c] += vj * (y[c] - x[c]) / sv;
        }
        v = sv;
        zv = szv;
        rho = drho(x[0])?;
        entrained = j;
    }
    if entrained > 0 {
        for j in 0..=entrained {
            column.temp[j] = x[0];
            column.oxygen[j] = x[1];
            column.bod[j] = x[2];
        }
    }
    Ok((entrained, energy))
}

/// Vertical mixing over one step: convective adjustment, implicit diffusion of
/// all constituents with the stratification-damped Kz, entrainment of the
/// surface mixed layer, and a final convective pass.
pub fn vertical_mixing(
    column: &mut Column,
    forcing: &MixingForcing,
    p: &HydroParams,
    dt: f64,
) -> Result<MixingReport, HydroError> {
    let mut report = MixingReport::default();
    if column.is_empty() {
        return Err(HydroError::NoWetLayer);
    }
    report.convective_merges += convective_adjustment(column)?;

    let kz = kz_profile(column, p)?;
    let mut t = std::mem::take(&mut column.temp);
    let mut o = std::mem::take(&mut column.oxygen);
    let mut l = std::mem::take(&mut column.bod);
    let r = diffuse_scalars(column, &kz, dt, [&mut t, &mut o, &mut l]);
    column.temp = t;
    column.oxygen = o;
    column.bod = l;
    r?;

    let u_star = p.friction_velocity(forcing.wind_speed);
    let mixed = mixed_depth(column);
    let w_star3 = forcing.buoyancy_flux.max(0.0) * mixed;
    let input = dt
        * (RHO_REF * (p.wind_efficiency * u_star.powi(3) + p.convective_efficiency * w_star3)
            + forcing.inflow_power.max(0.0));
    let decay = if p.tke_decay_s > 0.0 {
        (-dt / p.tke_decay_s).exp()
    } else {
        0.0
    };
    let (entrained, left) = entrain(column, forcing.carried_energy.max(0.0) * decay + input)?;
    report.entrained = entrained;
    report.carried_energy = left;

    report.convective_merges += convective_adjustment(column)?;
    Ok(report)
}

/// Thickness of the top run of cells sharing the surface temperature.
fn mixed_depth(column: &Column) -> f64 {
    let t0 = column.temp[0];
    column
        .temp
        .iter()
        .zip(&column.thickness)
        .take_while(|(t, _)| **t == t0)
        .map(|(_, h)| h)
        .sum()
}
