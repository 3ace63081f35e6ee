use crate::forcing::InflowRecord;
use crate::grid::Grid;

use super::{elevation_for_volume, flow_surface_layer, CellField, Constituent, HydroError};

/// Volume fluxes for one step. All rates in m3 s-1, storage segment-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    segments: usize,
    layers: usize,
    /// Flux from segment i to segment i + 1 in layer k. Zero for the dam segment.
    pub horizontal: Vec<f64>,
    /// Flux from cell (i, k) up into (i, k - 1). Zero for layer 0.
    pub vertical: Vec<f64>,
    /// Boundary inflow per layer into the upstream segment.
    pub inflow: Vec<f64>,
    /// Withdrawal per layer out of the dam segment.
    pub withdrawal: Vec<f64>,
    /// Evaporative loss per cell.
    pub evaporation: Vec<f64>,
    /// Rate of change of each cell volume implied by the surface move.
    pub volume_change: Vec<f64>,
    /// Surface elevation at the end of the step.
    pub surface_after_m: f64,
}

impl FlowField {
    pub fn zero(segments: usize, layers: usize, surface_m: f64) -> Self {
        let n = segments * layers;
        Self {
            segments,
            layers,
            horizontal: vec![0.0; n],
            vertical: vec![0.0; n],
            inflow: vec![0.0; layers],
            withdrawal: vec![0.0; layers],
            evaporation: vec![0.0; n],
            volume_change: vec![0.0; n],
            surface_after_m: surface_m,
        }
    }

    #[inline]
    fn index(&self, segment: usize, layer: usize) -> usize {
        segment * self.layers + layer
    }

    /// Net inflow minus outflow minus volume change of a cell, m3 s-1.
    pub fn residual(&self, segment: usize, layer: usize) -> f64 {
        let (ns, nl) = (self.segments, self.layers);
        let idx = self.index(segment, layer);
        let mut net = -self.horizontal[idx] - self.vertical[idx] - self.evaporation[idx]
            - self.volume_change[idx];
        if segment > 0 {
            net += self.horizontal[self.index(segment - 1, layer)];
        }
        if layer + 1 < nl {
            net += self.vertical[self.index(segment, layer + 1)];
        }
        if segment == 0 {
            net += self.inflow[layer];
        }
        if segment == ns - 1 {
            net -= self.withdrawal[layer];
        }
        net
    }

    /// Largest absolute continuity residual over all cells.
    pub fn max_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.segments {
            for k in 0..self.layers {
                worst = worst.max(self.residual(i, k).abs());
            }
        }
        worst
    }

    pub fn total_inflow(&self) -> f64 {
        self.inflow.iter().sum()
    }

    pub fn total_withdrawal(&self) -> f64 {
        self.withdrawal.iter().sum()
    }

    pub fn total_evaporation(&self) -> f64 {
        self.evaporation.iter().sum()
    }
}

/// Inputs to [`build_flow_field`].
#[derive(Debug, Clone, Copy)]
pub struct FlowInputs<'a> {
    /// Surface elevation at the start of the step.
    pub surface_m: f64,
    /// Cell volumes at the start of the step. `None` uses the geometric volumes.
    pub volumes: Option<&'a [f64]>,
    /// Inflow per layer into the upstream segment.
    pub inflow: &'a [f64],
    /// Withdrawal per layer out of the dam segment.
    pub withdrawal: &'a [f64],
    /// Evaporative loss per segment; taken from the flow surface layer.
    pub evaporation: &'a [f64],
    /// Optional per-interface layer weights for the inflow as it passes from
    /// segment i to i + 1. Without them the inflow keeps its entry layers.
    pub through: Option<&'a [Vec<f64>]>,
    pub dt: f64,
}

/// Continuity-routed flow field for one step.
///
/// The new surface follows from the stored volume plus the net boundary flux.
/// Horizontal fluxes are swept from the upstream segment to the dam, carrying
/// the insertion layer by layer; each segment's storage change and evaporation
/// are drawn through the flow surface layer. Vertical fluxes then close every
/// column from the bed up.
pub fn build_flow_field(grid: &Grid, inputs: &FlowInputs) -> Result<FlowField, HydroError> {
    let (ns, nl) = (grid.segment_count(), grid.layer_count());
    let dt = inputs.dt;
    let e0 = inputs.surface_m;
    let idx = |i: usize, k: usize| i * nl + k;

    let geometric;
    let v0: &[f64] = match inputs.volumes {
        Some(v) => v,
        None => {
            geometric = (0..ns)
                .flat_map(|i| (0..nl).map(move |k| (i, k)))
                .map(|(i, k)| grid.cell_volume(i, k, e0))
                .collect::<Vec<_>>();
            &geometric
        }
    };

    let q_in: f64 = inputs.inflow.iter().sum();
    let q_out: f64 = inputs.withdrawal.iter().sum();
    let q_evap: f64 = inputs.evaporation.iter().sum();
    let stored: f64 = v0.iter().sum();
    let curve = grid.area_volume_curve();
    let e1 = elevation_for_volume(&curve, stored + (q_in - q_out - q_evap) * dt)?;

    let mut f = FlowField::zero(ns, nl, e1);
    if q_in == 0.0 && q_out == 0.0 && q_evap == 0.0 && e1 == e0 && inputs.volumes.is_none() {
        return Ok(f);
    }

    let ks = flow_surface_layer(grid, e0.min(e1)).ok_or(HydroError::DryPath { segment: 0 })?;
    let flow_bed = |i: usize| {
        grid.bed_layer(i)
            .filter(|&b| b >= ks)
            .ok_or(HydroError::DryPath { segment: i })
    };

    let bed0 = flow_bed(0)?;
    let bed_dam = flow_bed(ns - 1)?;
    for k in 0..nl {
        if inputs.inflow[k] != 0.0 && (k < ks || k > bed0) {
            return Err(HydroError::InvalidDistribution { layer: k });
        }
        if inputs.withdrawal[k] != 0.0 && (k < ks || k > bed_dam) {
            return Err(HydroError::InvalidDistribution { layer: k });
        }
    }
    f.inflow.copy_from_slice(inputs.inflow);
    f.withdrawal.copy_from_slice(inputs.withdrawal);

    for i in 0..ns {
        f.evaporation[idx(i, ks)] = inputs.evaporation[i];
        for k in 0..nl {
            if grid.width(i, k) > 0.0 {
                f.volume_change[idx(i, k)] = (grid.cell_volume(i, k, e1) - v0[idx(i, k)]) / dt;
            }
        }
    }

    let mut carry = vec![0.0; nl];
    let mut correction = 0.0;
    for i in 0..ns.saturating_sub(1) {
        flow_bed(i)?;
        let bed_next = flow_bed(i + 1)?;
        let mut out = match inputs.through {
            Some(w) => {
                let lowest = bed_next.min(grid.bed_layer(i).unwrap_or(0));
                let mut o = vec![0.0; nl];
                for (k, &wk) in w[i].iter().enumerate() {
                    if wk != 0.0 {
                        if k < ks || k > lowest {
                            return Err(HydroError::InvalidDistribution { layer: k });
                        }
                        o[k] = wk * q_in;
                    }
                }
                o[ks] += correction;
                o
            }
            None => {
                let mut o = carry.clone();
                if i == 0 {
                    for (x, q) in o.iter_mut().zip(inputs.inflow) {
                        *x += q;
                    }
                }
                o
            }
        };
        let drawn: f64 = (0..nl)
            .map(|k| f.evaporation[idx(i, k)] + f.volume_change[idx(i, k)])
            .sum();
        correction -= drawn;
        out[ks] -= drawn;
        for k in 0..nl {
            if out[k] != 0.0 && (k < ks || k > bed_next) {
                let to = if k < ks { ks } else { bed_next };
                out[to] += out[k];
                out[k] = 0.0;
            }
        }
        f.horizontal[idx(i, 0)..idx(i, 0) + nl].copy_from_slice(&out);
        carry = out;
    }

    for i in 0..ns {
        let Some(bed) = grid.bed_layer(i) else {
            continue;
        };
        let active = |k: usize| v0[idx(i, k)] > 0.0 || grid.cell_volume(i, k, e1) > 0.0;
        let Some(top) = (0..=bed).find(|&k| active(k)) else {
            continue;
        };
        let mut up = 0.0;
        for k in (top..=bed).rev() {
            let c = idx(i, k);
            let mut src = -f.horizontal[c] - f.evaporation[c] - f.volume_change[c];
            if i > 0 {
                src += f.horizontal[idx(i - 1, k)];
            }
            if i == 0 {
                src += f.inflow[k];
            }
            if i == ns - 1 {
                src -= f.withdrawal[k];
            }
            up += src;
            f.vertical[c] = if k == top { 0.0 } else { up };
        }
    }
    Ok(f)
}

/// Concentrations carried by the boundary inflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryState {
    pub temp: f64,
    pub oxygen: f64,
    pub bod: f64,
}

impl BoundaryState {
    fn get(&self, c: usize) -> f64 {
        match c {
            0 => self.temp,
            1 => self.oxygen,
            _ => self.bod,
        }
    }
}

impl From<&InflowRecord> for BoundaryState {
    fn from(r: &InflowRecord) -> Self {
        Self {
            temp: r.t_in,
            oxygen: r.do_in,
            bod: r.bod_in,
        }
    }
}

/// Boundary exchange over an advection call, as sum of q * C * dt per constituent
/// (temperature, oxygen, BOD) plus the water volumes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AdvectAudit {
    pub inflow: [f64; 3],
    pub outflow: [f64; 3],
    pub inflow_volume: f64,
    pub outflow_volume: f64,
    pub substeps: usize,
}

impl AdvectAudit {
    fn add(&mut self, o: &AdvectAudit) {
        for c in 0..3 {
            self.inflow[c] += o.inflow[c];
            self.outflow[c] += o.outflow[c];
        }
        self.inflow_volume += o.inflow_volume;
        self.outflow_volume += o.outflow_volume;
        self.substeps += o.substeps;
    }
}

const CFL_TOL: f64 = 1e-6;
/// Tracked volumes below this are rounding residue, m3.
pub const DRY_VOLUME: f64 = 1e-6;

/// Flux topology of a flow field, reduced to the links that carry water.
#[derive(Debug, Clone)]
pub struct Transport {
    /// (donor, receiver, q, receiver slot in `active`)
    links: Vec<(usize, usize, f64, usize)>,
    /// (cell, q) leaving the domain
    sinks: Vec<(usize, f64)>,
    /// (cell, q, slot) entering from the boundary
    sources: Vec<(usize, f64, usize)>,
    /// Cells touched by any flux, ascending.
    active: Vec<usize>,
    inn: Vec<f64>,
    out: Vec<f64>,
    layers: usize,
}

impl Transport {
    pub fn new(flow: &FlowField) -> Self {
        let (ns, nl) = (flow.segments, flow.layers);
        let n = ns * nl;
        let mut links = Vec::new();
        for i in 0..ns {
            for k in 0..nl {
                let c = i * nl + k;
                if i + 1 < ns {
                    let q = flow.horizontal[c];
                    if q > 0.0 {
                        links.push((c, c + nl, q));
                    } else if q < 0.0 {
                        links.push((c + nl, c, -q));
                    }
                }
                if k > 0 {
                    let q = flow.vertical[c];
                    if q > 0.0 {
                        links.push((c, c - 1, q));
                    } else if q < 0.0 {
                        links.push((c - 1, c, -q));
                    }
                }
            }
        }
        let dam = (ns - 1) * nl;
        let mut sinks: Vec<(usize, f64)> = (0..nl)
            .filter(|&k| flow.withdrawal[k] > 0.0)
            .map(|k| (dam + k, flow.withdrawal[k]))
            .collect();
        sinks.extend(
            flow.evaporation
                .iter()
                .enumerate()
                .filter(|(_, q)| **q > 0.0)
                .map(|(c, q)| (c, *q)),
        );
        let sources: Vec<(usize, f64)> = (0..nl)
            .filter(|&k| flow.inflow[k] > 0.0)
            .map(|k| (k, flow.inflow[k]))
            .collect();
        let mut inn = vec![0.0; n];
        let mut out = vec![0.0; n];
        let mut touched = vec![false; n];
        for &(a, b, q) in &links {
            out[a] += q;
            inn[b] += q;
            touched[a] = true;
            touched[b] = true;
        }
        for &(a, q) in &sinks {
            out[a] += q;
            touched[a] = true;
        }
        for &(b, q) in &sources {
            inn[b] += q;
            touched[b] = true;
        }
        let active: Vec<usize> = (0..n).filter(|&c| touched[c]).collect();
        let mut slot = vec![usize::MAX; n];
        for (s, &c) in active.iter().enumerate() {
            slot[c] = s;
        }
        Self {
            links: links.into_iter().map(|(a, b, q)| (a, b, q, slot[b])).collect(),
            sinks,
            sources: sources.into_iter().map(|(b, q)| (b, q, slot[b])).collect(),
            active,
            inn,
            out,
            layers: nl,
        }
    }

    /// Number of equal sub-steps that keeps every cell within the CFL limit
    /// while volumes change linearly over the step.
    pub fn required_substeps(&self, field: &CellField, dt: f64) -> usize {
        let mut worst: f64 = 1.0;
        for &c in &self.active {
            let (inn, out) = (self.inn[c], self.out[c]);
            let v0 = field.volume[c];
            let v1 = v0 + dt * (inn - out);
            if out > 0.0 && v0 > 0.0 {
                worst = worst.max(out * dt / v0);
            }
            if inn < out && v1 > 0.0 {
                worst = worst.max(inn * dt / v1);
            }
        }
        ((worst - 1e-9).ceil() as usize).max(1)
    }

    /// One upwind update over `dt`.
    pub fn apply(
        &self,
        field: &mut CellField,
        boundary: &BoundaryState,
        dt: f64,
    ) -> Result<AdvectAudit, HydroError> {
        let mut audit = AdvectAudit {
            substeps: 1,
            ..Default::default()
        };
        for &c in &self.active {
            let out = self.out[c];
            if out > 0.0 {
                let v = field.volume[c];
                let ratio = if v > 0.0 { out * dt / v } else { f64::INFINITY };
                if ratio > 1.0 + CFL_TOL {
                    return Err(HydroError::CflViolation {
                        segment: c / self.layers,
                        layer: c % self.layers,
                        ratio,
                    });
                }
            }
        }
        // per active cell: upwind increment sums, then inflow-weighted sums
        let mut acc = vec![[0.0; 6]; self.active.len()];
        {
            let vals = [&field.temp, &field.oxygen, &field.bod];
            for &(a, b, q, s) in &self.links {
                let e = &mut acc[s];
                for c in 0..3 {
                    e[c] += q * (vals[c][a] - vals[c][b]);
                    e[3 + c] += q * vals[c][a];
                }
            }
            for &(a, q) in &self.sinks {
                audit.outflow_volume += q * dt;
                for c in 0..3 {
                    audit.outflow[c] += q * dt * vals[c][a];
                }
            }
            for &(b, q, s) in &self.sources {
                audit.inflow_volume += q * dt;
                let e = &mut acc[s];
                for c in 0..3 {
                    let cb = boundary.get(c);
                    e[c] += q * (cb - vals[c][b]);
                    e[3 + c] += q * cb;
                    audit.inflow[c] += q * dt * cb;
                }
            }
        }
        for (s, &cell) in self.active.iter().enumerate() {
            let (inn, out) = (self.inn[cell], self.out[cell]);
            let v = field.volume[cell];
            let mut v_new = v + dt * (inn - out);
            // a cell drained to rounding noise is dry
            if v_new <= 1e-9 * v.max(dt * inn) || v_new < DRY_VOLUME {
                v_new = 0.0;
            }
            field.volume[cell] = v_new;
            if v_new == 0.0 || inn == 0.0 {
                continue;
            }
            let refill = v == 0.0 || inn * dt >= v_new;
            let e = &acc[s];
            for (c, con) in Constituent::ALL.into_iter().enumerate() {
                let x = &mut field.values_mut(con)[cell];
                *x = if refill {
                    e[3 + c] / inn
                } else {
                    *x + dt * e[c] / v_new
                };
            }
        }
        Ok(audit)
    }
}

/// Number of sub-steps [`advect_substepped`] will take.
pub fn required_substeps(field: &CellField, flow: &FlowField, dt: f64) -> usize {
    Transport::new(flow).required_substeps(field, dt)
}

/// One first-order upwind finite-volume update over `dt`.
///
/// Each cell's new value is a convex mix of its old value and its upwind
/// neighbours, written in increment form so constant fields are preserved
/// exactly and mass is conserved to rounding.
pub fn advect(
    field: &mut CellField,
    flow: &FlowField,
    boundary: &BoundaryState,
    dt: f64,
) -> Result<AdvectAudit, HydroError> {
    Transport::new(flow).apply(field, boundary, dt)
}

/// [`advect`] split into as many equal sub-steps as the CFL limit requires.
pub fn advect_substepped(
    field: &mut CellField,
    flow: &FlowField,
    boundary: &BoundaryState,
    dt: f64,
) -> Result<AdvectAudit, HydroError> {
    let tr = Transport::new(flow);
    let n = tr.required_substeps(field, dt);
    let h = dt / n as f64;
    let mut total = AdvectAudit::default();
    for _ in 0..n {
        total.add(&tr.apply(field, boundary, h)?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pipe(segments: usize, layers: usize) -> Grid {
        let segs = (0..segments)
            .map(|i| (i as u32 + 1, 100.0, vec![10.0; layers]))
            .collect();
        Grid::uniform(segs, layers, 1.0, 0.0).unwrap()
    }

    fn inputs<'a>(e: f64, inflow: &'a [f64], wd: &'a [f64], ev: &'a [f64]) -> FlowInputs<'a> {
        FlowInputs {
            surface_m: e,
            volumes: None,
            inflow,
            withdrawal: wd,
            evaporation: ev,
            through: None,
            dt: 3600.0,
        }
    }

    #[test]
    fn no_flow_gives_zero_field() {
        let g = pipe(3, 2);
        let f = build_flow_field(&g, &inputs(2.0, &[0.0; 2], &[0.0; 2], &[0.0; 3])).unwrap();
        assert!(f.horizontal.iter().all(|&q| q == 0.0));
        assert!(f.vertical.iter().all(|&q| q == 0.0));
    }

    #[test]
    fn pipe_flow_through_interface() {
        let g = pipe(2, 1);
        let f = build_flow_field(&g, &inputs(1.0, &[5.0], &[5.0], &[0.0; 2])).unwrap();
        assert_eq!(f.horizontal[0], 5.0);
        assert_eq!(f.surface_after_m, 1.0);
        assert!(f.max_residual() < 1e-12);
    }

    #[test]
    fn underflow_rises_to_surface_outlet() {
        let g = pipe(3, 3);
        let f = build_flow_field(
            &g,
            &inputs(3.0, &[0.0, 0.0, 2.0], &[2.0, 0.0, 0.0], &[0.0; 3]),
        )
        .unwrap();
        assert_eq!(f.horizontal[g.index(0, 2)], 2.0);
        assert_eq!(f.vertical[g.index(2, 2)], 2.0);
        assert_eq!(f.vertical[g.index(2, 1)], 2.0);
        assert!(f.max_residual() < 1e-12);
    }

    #[test]
    fn rising_surface_closes_continuity() {
        let g = pipe(4, 5);
        let f = build_flow_field(
            &g,
            &FlowInputs {
                dt: 600.0,
                ..inputs(3.5, &[0.0, 1.0, 3.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0, 0.0], &[0.01; 4])
            },
        )
        .unwrap();
        assert!(f.surface_after_m > 3.5);
        assert!(f.max_residual() < 1e-12 * 4.0);
    }

    #[test]
    fn through_weights_route_inflow_to_the_bed() {
        let g = Grid::uniform(
            vec![
                (1, 100.0, vec![10.0, 10.0, 0.0]),
                (2, 100.0, vec![10.0, 10.0, 10.0]),
                (3, 100.0, vec![10.0, 10.0, 10.0]),
            ],
            3,
            1.0,
            0.0,
        )
        .unwrap();
        let w = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let f = build_flow_field(
            &g,
            &FlowInputs {
                through: Some(&w),
                ..inputs(3.0, &[0.0, 2.0, 0.0], &[2.0, 0.0, 0.0], &[0.0; 3])
            },
        )
        .unwrap();
        assert_eq!(f.horizontal[g.index(0, 1)], 2.0);
        assert_eq!(f.horizontal[g.index(1, 2)], 2.0);
        // plunges inside segment 2 from layer 1 down to the bed
        assert_eq!(f.vertical[g.index(1, 2)], -2.0);
        assert!(f.max_residual() < 1e-12);

        let bad = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]];
        let r = build_flow_field(
            &g,
            &FlowInputs {
                through: Some(&bad),
                ..inputs(3.0, &[0.0, 2.0, 0.0], &[2.0, 0.0, 0.0], &[0.0; 3])
            },
        );
        assert_eq!(r, Err(HydroError::InvalidDistribution { layer: 2 }));
    }

    #[test]
    fn dry_upstream_segment_is_dry_path() {
        let g = Grid::uniform(
            vec![(1, 100.0, vec![10.0, 0.0]), (2, 100.0, vec![10.0, 10.0])],
            2,
            1.0,
            0.0,
        )
        .unwrap();
        let r = build_flow_field(&g, &inputs(0.9, &[0.0, 0.0], &[0.0, 0.1], &[0.0; 2]));
        assert_eq!(r, Err(HydroError::DryPath { segment: 0 }));
    }

    fn field(g: &Grid, e: f64, t: f64) -> CellField {
        CellField::uniform(g, e, t, 8.0, 2.0)
    }

    #[test]
    fn zero_flow_is_identity() {
        let g = pipe(3, 1);
        let mut c = field(&g, 1.0, 12.0);
        c.temp[1] = 20.0;
        let before = c.clone();
        let f = FlowField::zero(3, 1, 1.0);
        let b = BoundaryState { temp: 5.0, oxygen: 9.0, bod: 1.0 };
        advect(&mut c, &f, &b, 3600.0).unwrap();
        assert_eq!(c, before);
    }

    #[test]
    fn uniform_field_is_preserved() {
        let g = pipe(3, 1);
        let mut c = field(&g, 1.0, 12.0);
        let f = build_flow_field(&g, &inputs(1.0, &[0.1], &[0.1], &[0.0; 3])).unwrap();
        let b = BoundaryState { temp: 12.0, oxygen: 8.0, bod: 2.0 };
        advect(&mut c, &f, &b, 3600.0).unwrap();
        assert!(c.temp.iter().all(|&t| t == 12.0));
        assert!(c.oxygen.iter().all(|&x| x == 8.0));
    }

    #[test]
    fn tracer_mass_conserved_in_closed_pipe() {
        let g = pipe(3, 1);
        let mut c = field(&g, 1.0, 0.0);
        c.bod = vec![0.0, 10.0, 0.0];
        let mut f = FlowField::zero(3, 1, 1.0);
        f.horizontal[0] = 0.05;
        f.horizontal[1] = -0.03;
        let before = c.content(Constituent::Bod);
        let b = BoundaryState { temp: 0.0, oxygen: 0.0, bod: 0.0 };
        for _ in 0..20 {
            advect(&mut c, &f, &b, 600.0).unwrap();
        }
        let after = c.content(Constituent::Bod);
        assert!(((after - before) / before).abs() < 1e-12);
    }

    #[test]
    fn cfl_violation_detected() {
        let g = pipe(2, 1);
        let mut c = field(&g, 1.0, 10.0);
        let f = build_flow_field(&g, &inputs(1.0, &[5.0], &[5.0], &[0.0; 2])).unwrap();
        let b = BoundaryState { temp: 10.0, oxygen: 8.0, bod: 2.0 };
        // 1000 m3 cells, 5 m3/s for 3600 s
        assert!(matches!(
            advect(&mut c, &f, &b, 3600.0),
            Err(HydroError::CflViolation { .. })
        ));
        assert_eq!(required_substeps(&c, &f, 3600.0), 18);
        let a = advect_substepped(&mut c, &f, &b, 3600.0).unwrap();
        assert_eq!(a.substeps, 18);
        assert!((a.inflow_volume - 18_000.0).abs() < 1e-9);
    }
}
