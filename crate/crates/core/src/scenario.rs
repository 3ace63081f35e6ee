//! Flash-flood scenarios: forcing construction, paired baseline/flood runs and
//! the diagnostics compared between them.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ConfigError;
use crate::contour::{export_contour, ContourExport};
use crate::engine::{run_prepared, EngineError, PreparedRun, RunOutput, Snapshot};
use crate::forcing::{DailySeries, ForcingSeries, InflowRecord};
use crate::grid::Grid;
use crate::hydro::{CellField, Constituent};
use crate::oxygen::{anoxia_mask, anoxic_thickness};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("flood window [{start}, {end}] outside forcing horizon [{first}, {last}]")]
    WindowOutsideHorizon { start: f64, end: f64, first: f64, last: f64 },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("reading {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn one() -> f64 {
    1.0
}

/// A triangular flood hydrograph laid over the baseline inflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// First and last day of the flood, whole days.
    pub window: [f64; 2],
    /// Inflow multiplier at the window center.
    #[serde(default = "one")]
    pub peak_multiplier: f64,
    /// Added to the inflow temperature inside the window, degC.
    #[serde(default)]
    pub t_in_offset_c: f64,
    /// Flat multiplier on inflow BOD inside the window.
    #[serde(default = "one")]
    pub bod_multiplier: f64,
}

impl ScenarioSpec {
    pub fn identity(window: [f64; 2]) -> Self {
        Self {
            window,
            peak_multiplier: 1.0,
            t_in_offset_c: 0.0,
            bod_multiplier: 1.0,
        }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.window[0] + self.window[1])
    }

    /// Before, during and after snapshot days.
    pub fn snapshot_days(&self) -> [f64; 3] {
        [self.window[0] - 1.0, self.center(), self.window[1] + 1.0]
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let [a, b] = self.window;
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return bad(format!("window [{a}, {b}] must be increasing"));
        }
        if a.fract() != 0.0 || b.fract() != 0.0 {
            return bad(format!("window [{a}, {b}] must start and end on whole days"));
        }
        if !(self.peak_multiplier >= 1.0) || !(self.bod_multiplier >= 1.0) {
            return bad("multipliers must be at least 1".into());
        }
        if !self.t_in_offset_c.is_finite() {
            return bad("t_in_offset_c must be finite".into());
        }
        Ok(())
    }

    /// Inflow multiplier at day `t`.
    pub fn discharge_factor(&self, t: f64) -> f64 {
        let [a, b] = self.window;
        if t < a || t > b {
            return 1.0;
        }
        let half = 0.5 * (b - a);
        1.0 + (self.peak_multiplier - 1.0) * (1.0 - (t - self.center()).abs() / half)
    }

    /// Extra inflow volume of the pulse over a flat baseline `q`, m3.
    pub fn excess_volume(&self, q: f64) -> f64 {
        0.5 * (self.peak_multiplier - 1.0) * q * (self.window[1] - self.window[0]) * 86_400.0
    }
}

/// Baseline forcing with the flood applied to the daily inflow records.
pub fn build_flood_forcing(base: &ForcingSeries, spec: &ScenarioSpec) -> Result<ForcingSeries, ScenarioError> {
    spec.validate()?;
    let (first, last) = base.horizon();
    let [a, b] = spec.window;
    if a < first || b > last {
        return Err(ScenarioError::WindowOutsideHorizon { start: a, end: b, first, last });
    }
    let inflow: Vec<InflowRecord> = base
        .inflow
        .records
        .iter()
        .map(|r| {
            if r.day < a || r.day > b {
                return *r;
            }
            InflowRecord {
                q_in: r.q_in * spec.discharge_factor(r.day),
                t_in: r.t_in + spec.t_in_offset_c,
                bod_in: r.bod_in * spec.bod_multiplier,
                ..*r
            }
        })
        .collect();
    Ok(ForcingSeries {
        inflow: DailySeries {
            records: inflow,
            filled: base.inflow.filled.clone(),
        },
        met: base.met.clone(),
        withdrawal: base.withdrawal.clone(),
    })
}

/// Depth to the top of the first cell more than `threshold_c` away from the
/// surface temperature; the whole depth when there is none.
pub fn mixed_layer_depth(temps: &[f64], thickness: &[f64], threshold_c: f64) -> f64 {
    let Some(&t0) = temps.first() else {
        return 0.0;
    };
    let mut depth = 0.0;
    for (t, h) in temps.iter().zip(thickness) {
        if (t - t0).abs() > threshold_c {
            return depth;
        }
        depth += h;
    }
    depth
}

/// Surface minus bottom temperature.
pub fn stratification_index(temps: &[f64]) -> f64 {
    match (temps.first(), temps.last()) {
        (Some(a), Some(b)) => a - b,
        _ => 0.0,
    }
}

/// Wet profile of one segment: (layer, temperature, oxygen, wet thickness), top first.
pub fn segment_profile(field: &CellField, grid: &Grid, segment: usize, surface_m: f64) -> Vec<(usize, f64, f64, f64)> {
    (0..grid.layer_count())
        .filter_map(|k| {
            let c = field.index(segment, k);
            (field.volume[c] > 0.0).then(|| (k, field.temp[c], field.oxygen[c], grid.wet_thickness(k, surface_m)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentDiagnostics {
    pub mixed_layer_m: f64,
    pub stratification_c: f64,
    pub anoxic_volume_m3: f64,
    pub anoxic_thickness_m: f64,
}

pub fn segment_diagnostics(
    snap: &Snapshot,
    grid: &Grid,
    segment: usize,
    mld_threshold_c: f64,
    anoxic_threshold: f64,
) -> SegmentDiagnostics {
    let prof = segment_profile(&snap.field, grid, segment, snap.surface_elevation_m);
    let temps: Vec<f64> = prof.iter().map(|p| p.1).collect();
    let thick: Vec<f64> = prof.iter().map(|p| p.3).collect();
    let anoxic_volume = prof
        .iter()
        .filter(|p| p.2 < anoxic_threshold)
        .map(|p| snap.field.volume[snap.field.index(segment, p.0)])
        .fold(0.0, |a, v| a + v);
    SegmentDiagnostics {
        mixed_layer_m: mixed_layer_depth(&temps, &thick, mld_threshold_c),
        stratification_c: stratification_index(&temps),
        anoxic_volume_m3: anoxic_volume,
        anoxic_thickness_m: anoxic_thickness(&snap.field, grid, segment, snap.surface_elevation_m, anoxic_threshold),
    }
}

/// Thresholds used by the comparison diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticParams {
    #[serde(default = "one")]
    pub mld_threshold_c: f64,
    #[serde(default = "one")]
    pub anoxic_threshold_mgl: f64,
}

impl Default for DiagnosticParams {
    fn default() -> Self {
        Self {
            mld_threshold_c: 1.0,
            anoxic_threshold_mgl: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub snapshot_day: f64,
    pub segment: u32,
    pub distance_from_dam_m: f64,
    pub base: SegmentDiagnostics,
    pub flood: SegmentDiagnostics,
}

pub const COMPARISON_HEADER: &str = "snapshot_day,segment,distance_from_dam_m,mld_base_m,mld_flood_m,strat_base_c,strat_flood_c,anoxic_vol_base_m3,anoxic_vol_flood_m3";
pub const DELTA_PROFILE_HEADER: &str =
    "snapshot_day,depth_m,temp_base_c,temp_flood_c,delta_temp_c,do_base_mgl,do_flood_mgl,delta_do_mgl";

/// Baseline and flood runs of the same configuration.
#[derive(Debug, Clone)]
pub struct RunComparison {
    pub spec: ScenarioSpec,
    pub params: DiagnosticParams,
    pub base: RunOutput,
    pub flood: RunOutput,
    pub rows: Vec<ComparisonRow>,
    /// Station name to segment position.
    pub stations: BTreeMap<String, usize>,
}

/// Runs baseline and flood concurrently, with snapshots forced before, at the
/// center of and after the flood window.
pub fn run_pair(base: &PreparedRun, spec: &ScenarioSpec, params: DiagnosticParams) -> Result<RunComparison, ScenarioError> {
    let flood_forcing = build_flood_forcing(&base.forcing, spec)?;
    let mut config = base.config.clone();
    let days = spec.snapshot_days();
    for d in days {
        if d < config.run.start_day || d > config.run.end_day {
            return Err(ScenarioError::WindowOutsideHorizon {
                start: spec.window[0],
                end: spec.window[1],
                first: config.run.start_day + 1.0,
                last: config.run.end_day - 1.0,
            });
        }
        if !config.run.snapshot_days.contains(&d) {
            config.run.snapshot_days.push(d);
        }
    }
    let base_run = base.with_config(config)?;
    let flood_run = base_run.with_forcing(flood_forcing)?;
    let (b, f) = rayon::join(|| run_prepared(&base_run), || run_prepared(&flood_run));
    let (b, f) = (b?, f?);

    let grid = &*b.grid;
    let mut rows = Vec::new();
    for d in days {
        let (sb, sf) = (b.snapshot(d).expect("forced"), f.snapshot(d).expect("forced"));
        for i in 0..grid.segment_count() {
            rows.push(ComparisonRow {
                snapshot_day: d,
                segment: grid.segments()[i].id,
                distance_from_dam_m: grid.distance_from_dam(i),
                base: segment_diagnostics(sb, grid, i, params.mld_threshold_c, params.anoxic_threshold_mgl),
                flood: segment_diagnostics(sf, grid, i, params.mld_threshold_c, params.anoxic_threshold_mgl),
            });
        }
    }
    let stations = base_run
        .config
        .stations
        .iter()
        .map(|(n, id)| (n.clone(), grid.segment_position(*id).expect("validated")))
        .collect();
    Ok(RunComparison {
        spec: spec.clone(),
        params,
        base: b,
        flood: f,
        rows,
        stations,
    })
}

impl RunComparison {
    pub fn snapshots(&self, day: f64) -> (&Snapshot, &Snapshot) {
        (
            self.base.snapshot(day).expect("forced snapshot"),
            self.flood.snapshot(day).expect("forced snapshot"),
        )
    }

    pub fn write_comparison<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "{COMPARISON_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.snapshot_day,
                r.segment,
                r.distance_from_dam_m,
                r.base.mixed_layer_m,
                r.flood.mixed_layer_m,
                r.base.stratification_c,
                r.flood.stratification_c,
                r.base.anoxic_volume_m3,
                r.flood.anoxic_volume_m3
            )?;
        }
        w.flush()
    }

    /// Flood minus baseline profiles at one station over the three snapshots.
    /// Depths follow the baseline profile; flood values are taken from the
    /// same layers.
    pub fn write_delta_profile<W: Write>(&self, station: &str, w: W) -> std::io::Result<()> {
        let seg = self.stations[station];
        let grid = &*self.base.grid;
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "{DELTA_PROFILE_HEADER}")?;
        for d in self.spec.snapshot_days() {
            let (sb, sf) = self.snapshots(d);
            let e = sb.surface_elevation_m;
            for (k, tb, xb, h) in segment_profile(&sb.field, grid, seg, e) {
                let c = sf.field.index(seg, k);
                if sf.field.volume[c] <= 0.0 {
                    continue;
                }
                let depth = e - grid.layer_bottom(k) - 0.5 * h;
                let (tf, xf) = (sf.field.temp[c], sf.field.oxygen[c]);
                writeln!(w, "{d},{depth},{tb},{tf},{},{xb},{xf},{}", tf - tb, xf - xb)?;
            }
        }
        w.flush()
    }

    /// Temperature and oxygen matrices of both runs at the three forced days.
    pub fn contours(&self) -> Vec<(String, ContourExport)> {
        let grid = &*self.base.grid;
        let mut out = Vec::with_capacity(12);
        for (run, o) in [("base", &self.base), ("flood", &self.flood)] {
            for day in self.spec.snapshot_days() {
                let snap = o.snapshot(day).expect("forced snapshot");
                for c in [Constituent::Temperature, Constituent::Oxygen] {
                    let m = export_contour(snap, grid, c);
                    out.push((m.file_name(run), m));
                }
            }
        }
        out
    }

    /// Writes `comparison.csv`, one `delta_profile_<station>.csv` per station
    /// and the contour matrices.
    pub fn write_all(&self, dir: &Path) -> Result<(), ScenarioError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ScenarioError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let p = dir.join("comparison.csv");
        self.write_comparison(std::fs::File::create(&p).map_err(io(&p))?).map_err(io(&p))?;
        for name in self.stations.keys() {
            let p = dir.join(format!("delta_profile_{name}.csv"));
            self.write_delta_profile(name, std::fs::File::create(&p).map_err(io(&p))?)
                .map_err(io(&p))?;
        }
        for (name, m) in self.contours() {
            let p = dir.join(name);
            m.write_csv(std::fs::File::create(&p).map_err(io(&p))?).map_err(io(&p))?;
        }
        Ok(())
    }
}

/// Where the directional checks look.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionalSpec {
    pub suite: Suite,
    /// Segments at least this far from the dam count as upstream.
    #[serde(default)]
    pub upstream_distance_m: f64,
    /// Fixed distance at which anoxic thickness is compared.
    #[serde(default)]
    pub probe_distance_m: f64,
    /// Distance band treated as mid-reservoir.
    #[serde(default)]
    pub mid_range_m: [f64; 2],
    #[serde(default = "default_deepening")]
    pub min_mld_deepening_m: f64,
    #[serde(default = "default_do_drop")]
    pub min_do_drop_mgl: f64,
}

fn default_deepening() -> f64 {
    5.0
}

fn default_do_drop() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Deep reservoir: mixed-layer deepening, upper-water DO drop, anoxic zone shift.
    Deep,
    /// Shallow reservoir: hypolimnetic DO loss with no loss of stratification.
    Shallow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn nearest_segment(grid: &Grid, distance: f64) -> usize {
    (0..grid.segment_count())
        .min_by(|&a, &b| {
            (grid.distance_from_dam(a) - distance)
                .abs()
                .total_cmp(&(grid.distance_from_dam(b) - distance).abs())
        })
        .expect("grid has segments")
}

/// Volume-weighted mean oxygen over cells above each segment's hypolimnion,
/// taken as the water within 1 degC of the bottom temperature in `mask_from`.
pub fn upper_water_oxygen(snap: &Snapshot, mask_from: &Snapshot, grid: &Grid) -> f64 {
    let (mut sum, mut vol) = (0.0, 0.0);
    for i in 0..grid.segment_count() {
        let prof = segment_profile(&mask_from.field, grid, i, mask_from.surface_elevation_m);
        let Some(bottom) = prof.last().map(|p| p.1) else {
            continue;
        };
        for (k, t, _, _) in prof {
            if t <= bottom + 1.0 {
                continue;
            }
            let c = snap.field.index(i, k);
            let v = snap.field.volume[c];
            sum += snap.field.oxygen[c] * v;
            vol += v;
        }
    }
    if vol > 0.0 {
        sum / vol
    } else {
        f64::NAN
    }
}

/// Sign checks of the flood response.
pub fn directional_checks(cmp: &RunComparison, spec: &DirectionalSpec) -> Vec<Check> {
    let grid = &*cmp.base.grid;
    let [before, during, after] = cmp.spec.snapshot_days();
    let thr = cmp.params.anoxic_threshold_mgl;
    let mut checks = Vec::new();
    match spec.suite {
        Suite::Deep => {
            let upstream: Vec<&ComparisonRow> = cmp
                .rows
                .iter()
                .filter(|r| r.snapshot_day == during && r.distance_from_dam_m >= spec.upstream_distance_m)
                .collect();
            let deepening = upstream
                .iter()
                .map(|r| r.flood.mixed_layer_m - r.base.mixed_layer_m)
                .sum::<f64>()
                / upstream.len().max(1) as f64;
            checks.push(Check {
                name: "mixed layer deepens upstream during the flood",
                passed: !upstream.is_empty() && deepening >= spec.min_mld_deepening_m,
                detail: format!(
                    "mean deepening {deepening:.2} m over {} segments beyond {} m (need >= {} m)",
                    upstream.len(),
                    spec.upstream_distance_m,
                    spec.min_mld_deepening_m
                ),
            });

            let (_, f0) = cmp.snapshots(before);
            let (_, f1) = cmp.snapshots(after);
            let do0 = upper_water_oxygen(f0, f0, grid);
            let do1 = upper_water_oxygen(f1, f0, grid);
            checks.push(Check {
                name: "epilimnion and metalimnion DO drops across the flood",
                passed: do0 - do1 >= spec.min_do_drop_mgl,
                detail: format!(
                    "mean DO {do0:.2} -> {do1:.2} mg/L (drop {:.2}, need >= {})",
                    do0 - do1,
                    spec.min_do_drop_mgl
                ),
            });

            let a0 = anoxia_mask(&f0.field, grid, thr).distance_range_m;
            let a1 = anoxia_mask(&f1.field, grid, thr).distance_range_m;
            let probe = nearest_segment(grid, spec.probe_distance_m);
            let h0 = anoxic_thickness(&f0.field, grid, probe, f0.surface_elevation_m, thr);
            let h1 = anoxic_thickness(&f1.field, grid, probe, f1.surface_elevation_m, thr);
            let moved = matches!((a0, a1), (Some((n0, _)), Some((n1, _))) if n1 < n0);
            checks.push(Check {
                name: "anoxic zone extends toward the dam",
                passed: moved,
                detail: format!(
                    "nearest anoxic distance {} -> {} m",
                    a0.map_or("none".into(), |r| format!("{:.0}", r.0)),
                    a1.map_or("none".into(), |r| format!("{:.0}", r.0))
                ),
            });
            checks.push(Check {
                name: "anoxic thickness at the probe does not grow",
                passed: h1 <= h0,
                detail: format!(
                    "thickness at {:.0} m: {h0:.2} -> {h1:.2} m",
                    grid.distance_from_dam(probe)
                ),
            });
        }
        Suite::Shallow => {
            let [lo, hi] = spec.mid_range_m;
            let mid: Vec<usize> = (0..grid.segment_count())
                .filter(|&i| (lo..=hi).contains(&grid.distance_from_dam(i)))
                .collect();
            let (sb, sf) = cmp.snapshots(after);
            let bottom_do = |s: &Snapshot| {
                let (mut sum, mut n) = (0.0, 0.0);
                for &i in &mid {
                    if let Some(p) = segment_profile(&s.field, grid, i, s.surface_elevation_m).last() {
                        sum += p.2;
                        n += 1.0;
                    }
                }
                sum / n
            };
            let (xb, xf) = (bottom_do(sb), bottom_do(sf));
            checks.push(Check {
                name: "hypolimnetic DO decreases after the flood",
                passed: !mid.is_empty() && xf < xb,
                detail: format!("mid-reservoir bottom DO {xb:.2} (base) vs {xf:.2} mg/L (flood)"),
            });
            let rows: Vec<&ComparisonRow> = cmp
                .rows
                .iter()
                .filter(|r| r.snapshot_day == after && (lo..=hi).contains(&r.distance_from_dam_m))
                .collect();
            let worst = rows
                .iter()
                .map(|r| r.flood.stratification_c - r.base.stratification_c)
                .fold(f64::INFINITY, f64::min);
            checks.push(Check {
                name: "stratification does not weaken after the flood",
                passed: !rows.is_empty() && worst >= 0.0,
                detail: format!("smallest stratification change {worst:.3} degC over {} segments", rows.len()),
            });
        }
    }
    checks
}

/// Contents of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub flood: ScenarioSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticParams,
    #[serde(default)]
    pub directional: Option<DirectionalSpec>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let f: ScenarioFile = toml::from_str(text).map_err(|e| e.to_string())?;
        f.flood.validate().map_err(|e| e.to_string())?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|message| ScenarioError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::{integrated_inflow, MetRecord, WithdrawalRecord};

    fn flat(q: f64, days: usize) -> ForcingSeries {
        let inflow = (0..=days)
            .map(|d| InflowRecord { day: d as f64, q_in: q, t_in: 12.0, do_in: 9.0, bod_in: 2.0 })
            .collect();
        let met = (0..=days)
            .map(|d| MetRecord {
                day: d as f64,
                t_air: 15.0,
                t_dew: 10.0,
                wind_speed: 2.0,
                wind_dir: 0.0,
                cloud_frac: 0.3,
            })
            .collect();
        let wd = (0..=days)
            .map(|d| WithdrawalRecord { day: d as f64, q_out: q, intake_elevation_m: 1.0 })
            .collect();
        ForcingSeries {
            inflow: DailySeries::from_records(inflow),
            met: DailySeries::from_records(met),
            withdrawal: DailySeries::from_records(wd),
        }
    }

    #[test]
    fn identity_spec_leaves_forcing_alone() {
        let base = flat(19.4, 30);
        let f = build_flood_forcing(&base, &ScenarioSpec::identity([10.0, 20.0])).unwrap();
        assert_eq!(f, base);
    }

    #[test]
    fn recorded_extreme_from_mean_flow() {
        let base = flat(19.4, 30);
        let spec = ScenarioSpec {
            peak_multiplier: 650.9 / 19.4,
            ..ScenarioSpec::identity([10.0, 20.0])
        };
        let f = build_flood_forcing(&base, &spec).unwrap();
        let q = f.inflow.sample(15.0).unwrap().q_in;
        assert!((q - 650.9).abs() < 1e-9, "{q}");
        assert!((spec.peak_multiplier - 33.6).abs() < 0.05);
        assert_eq!(f.inflow.sample(10.0).unwrap().q_in, 19.4);
        assert_eq!(f.inflow.sample(20.0).unwrap().q_in, 19.4);
        assert_eq!(f.inflow.sample(9.5).unwrap().q_in, 19.4);
    }

    #[test]
    fn pulse_volume_matches_triangle() {
        let base = flat(19.4, 30);
        let spec = ScenarioSpec {
            peak_multiplier: 10.0,
            t_in_offset_c: -3.0,
            bod_multiplier: 5.0,
            window: [10.0, 20.0],
        };
        let f = build_flood_forcing(&base, &spec).unwrap();
        let extra = integrated_inflow(&f.inflow, 0.0, 30.0).unwrap() - integrated_inflow(&base.inflow, 0.0, 30.0).unwrap();
        assert!((extra / spec.excess_volume(19.4) - 1.0).abs() < 1e-12);
        let r = f.inflow.sample(12.0).unwrap();
        assert_eq!(r.t_in, 9.0);
        assert_eq!(r.bod_in, 10.0);
        assert_eq!(r.do_in, 9.0);
    }

    #[test]
    fn window_outside_horizon() {
        let base = flat(1.0, 30);
        let r = build_flood_forcing(&base, &ScenarioSpec::identity([25.0, 35.0]));
        assert!(matches!(r, Err(ScenarioError::WindowOutsideHorizon { .. })));
        assert!(ScenarioSpec { peak_multiplier: 0.5, ..ScenarioSpec::identity([1.0, 2.0]) }
            .validate()
            .is_err());
    }

    #[test]
    fn mixed_layer_cases() {
        assert_eq!(mixed_layer_depth(&[10.0; 8], &[1.0; 8], 1.0), 8.0);
        let mut t = vec![25.0; 12];
        t.extend([18.0; 8]);
        assert_eq!(mixed_layer_depth(&t, &[1.0; 20], 1.0), 12.0);
    }

    #[test]
    fn stratification_cases() {
        assert_eq!(stratification_index(&[12.0; 5]), 0.0);
        assert_eq!(stratification_index(&[25.0, 20.0, 10.0]), 15.0);
    }
}
