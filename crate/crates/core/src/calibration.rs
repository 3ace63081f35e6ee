//! Goodness of fit against observed station profiles and a deterministic
//! parameter search that minimises a weighted absolute mean error.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::engine::{run_prepared, EngineError, PreparedRun, RunOutput, Snapshot};
use crate::grid::Grid;

pub const OBSERVATION_HEADER: &str = "day,station,depth_m,temp_c,do_mgl";

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("predicted has {predicted} values but observed has {observed}")]
    LengthMismatch { predicted: usize, observed: usize },
    #[error("no values to compare")]
    Empty,
    #[error("unknown station `{0}`")]
    StationUnknown(String),
    #[error("observation day {day} outside run [{first}, {last}]")]
    DayOutsideHorizon { day: f64, first: f64, last: f64 },
    #[error("run produced no snapshots to compare against")]
    NoSnapshots,
    #[error("evaluation budget is zero")]
    BudgetZero,
    #[error("invalid calibration spec: {0}")]
    InvalidSpec(String),
    #[error("invalid observations: {0}")]
    InvalidObservations(String),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn check_pair(predicted: &[f64], observed: &[f64]) -> Result<(), CalibrationError> {
    if predicted.len() != observed.len() {
        return Err(CalibrationError::LengthMismatch {
            predicted: predicted.len(),
            observed: observed.len(),
        });
    }
    if predicted.is_empty() {
        return Err(CalibrationError::Empty);
    }
    Ok(())
}

/// Absolute mean error.
pub fn ame(predicted: &[f64], observed: &[f64]) -> Result<f64, CalibrationError> {
    check_pair(predicted, observed)?;
    let sum: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o).abs()).sum();
    Ok(sum / predicted.len() as f64)
}

/// Root mean square error.
pub fn rmse(predicted: &[f64], observed: &[f64]) -> Result<f64, CalibrationError> {
    check_pair(predicted, observed)?;
    let sum: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok((sum / predicted.len() as f64).sqrt())
}

/// One observed profile point. Either constituent may be missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub day: f64,
    pub station: String,
    pub depth_m: f64,
    pub temp_c: Option<f64>,
    pub do_mgl: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationProfileSet {
    pub rows: Vec<Observation>,
}

impl StationProfileSet {
    pub fn new(rows: Vec<Observation>) -> Result<Self, CalibrationError> {
        for (n, r) in rows.iter().enumerate() {
            if !(r.depth_m >= 0.0) || !r.day.is_finite() {
                return Err(CalibrationError::InvalidObservations(format!(
                    "row {}: day {} depth {}",
                    n + 1,
                    r.day,
                    r.depth_m
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn parse(text: &str) -> Result<Self, CalibrationError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| CalibrationError::InvalidObservations(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.join(",") != OBSERVATION_HEADER {
            return Err(CalibrationError::InvalidObservations(format!(
                "expected header `{OBSERVATION_HEADER}`, found `{}`",
                header.join(",")
            )));
        }
        let rows = rdr
            .deserialize()
            .enumerate()
            .map(|(n, r)| r.map_err(|e| CalibrationError::InvalidObservations(format!("line {}: {e}", n + 2))))
            .collect::<Result<Vec<Observation>, _>>()?;
        Self::new(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CalibrationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CalibrationError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CalibrationError::InvalidObservations(message) => CalibrationError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "{OBSERVATION_HEADER}")?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.day, r.station, r.depth_m, opt(r.temp_c), opt(r.do_mgl))?;
        }
        w.flush()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct observation days, ascending.
    pub fn days(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.rows.iter().map(|r| r.day).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }
}

/// Model and observed value at one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub day: f64,
    pub snapshot_day: f64,
    pub station: String,
    pub depth_m: f64,
    pub predicted: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchedProfiles {
    pub temp: Vec<Pair>,
    pub oxygen: Vec<Pair>,
    /// Observations below the local bed, as (day, station, depth).
    pub skipped: Vec<(f64, String, f64)>,
}

/// Depth of each wet layer center below the surface with its temperature and oxygen.
fn station_profile(snap: &Snapshot, grid: &Grid, seg: usize) -> Vec<(f64, f64, f64)> {
    let e = snap.surface_elevation_m;
    (0..grid.layer_count())
        .filter_map(|k| {
            let c = snap.field.index(seg, k);
            (snap.field.volume[c] > 0.0).then(|| {
                let h = grid.wet_thickness(k, e);
                (e - grid.layer_bottom(k) - 0.5 * h, snap.field.temp[c], snap.field.oxygen[c])
            })
        })
        .collect()
}

/// Linear in depth between layer centers, constant beyond the outermost ones.
fn interpolate(profile: &[(f64, f64, f64)], depth: f64) -> (f64, f64) {
    let first = profile[0];
    if depth <= first.0 {
        return (first.1, first.2);
    }
    for w in profile.windows(2) {
        let (a, b) = (w[0], w[1]);
        if depth <= b.0 {
            let f = (depth - a.0) / (b.0 - a.0);
            return (a.1 + f * (b.1 - a.1), a.2 + f * (b.2 - a.2));
        }
    }
    let last = profile[profile.len() - 1];
    (last.1, last.2)
}

/// Model values at every observation: nearest snapshot day (earlier on a
/// tie), then linear interpolation in depth.
pub fn match_profiles(
    output: &RunOutput,
    stations: &BTreeMap<String, u32>,
    observations: &StationProfileSet,
) -> Result<MatchedProfiles, CalibrationError> {
    let grid = &*output.grid;
    let first = output.balance.first().map_or(f64::NAN, |b| b.day);
    let last = output.balance.last().map_or(f64::NAN, |b| b.day);
    let mut out = MatchedProfiles::default();
    for r in &observations.rows {
        let id = *stations
            .get(&r.station)
            .ok_or_else(|| CalibrationError::StationUnknown(r.station.clone()))?;
        let seg = grid
            .segment_position(id)
            .ok_or_else(|| CalibrationError::StationUnknown(r.station.clone()))?;
        if !(r.day >= first - 1e-9 && r.day <= last + 1e-9) {
            return Err(CalibrationError::DayOutsideHorizon { day: r.day, first, last });
        }
        let snap = output
            .snapshots
            .iter()
            .min_by(|a, b| (a.day - r.day).abs().total_cmp(&(b.day - r.day).abs()))
            .ok_or(CalibrationError::NoSnapshots)?;
        let profile = station_profile(snap, grid, seg);
        let bed = grid.bed_layer(seg).map_or(snap.surface_elevation_m, |k| grid.layer_bottom(k));
        let bed_depth = snap.surface_elevation_m - bed;
        if profile.is_empty() || r.depth_m > bed_depth {
            out.skipped.push((r.day, r.station.clone(), r.depth_m));
            continue;
        }
        let (t, x) = interpolate(&profile, r.depth_m);
        let pair = |predicted, observed| Pair {
            day: r.day,
            snapshot_day: snap.day,
            station: r.station.clone(),
            depth_m: r.depth_m,
            predicted,
            observed,
        };
        if let Some(o) = r.temp_c {
            out.temp.push(pair(t, o));
        }
        if let Some(o) = r.do_mgl {
            out.oxygen.push(pair(x, o));
        }
    }
    Ok(out)
}

/// Errors of one constituent, `None` when it has no pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ErrorStats {
    pub ame: Option<f64>,
    pub rmse: Option<f64>,
    pub count: usize,
}

impl ErrorStats {
    pub fn of(pairs: &[&Pair]) -> Self {
        let p: Vec<f64> = pairs.iter().map(|x| x.predicted).collect();
        let o: Vec<f64> = pairs.iter().map(|x| x.observed).collect();
        Self {
            ame: ame(&p, &o).ok(),
            rmse: rmse(&p, &o).ok(),
            count: p.len(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitMetrics {
    pub temp: ErrorStats,
    pub oxygen: ErrorStats,
}

impl FitMetrics {
    pub fn from_matched(m: &MatchedProfiles) -> Self {
        Self {
            temp: ErrorStats::of(&m.temp.iter().collect::<Vec<_>>()),
            oxygen: ErrorStats::of(&m.oxygen.iter().collect::<Vec<_>>()),
        }
    }

    pub fn by_station(m: &MatchedProfiles) -> BTreeMap<String, FitMetrics> {
        let mut names: Vec<&String> = m.temp.iter().chain(&m.oxygen).map(|p| &p.station).collect();
        names.sort();
        names.dedup();
        names
            .into_iter()
            .map(|s| {
                (
                    s.clone(),
                    FitMetrics {
                        temp: ErrorStats::of(&of_station(&m.temp, s)),
                        oxygen: ErrorStats::of(&of_station(&m.oxygen, s)),
                    },
                )
            })
            .collect()
    }
}

fn of_station<'a>(v: &'a [Pair], s: &str) -> Vec<&'a Pair> {
    v.iter().filter(|p| p.station == s).collect()
}

/// Absolute mean error of the water-surface elevation against an observed
/// stage series of (day, elevation), using the nearest snapshot for each day.
pub fn surface_elevation_ame(output: &RunOutput, stage: &[(f64, f64)]) -> Result<f64, CalibrationError> {
    let mut p = Vec::with_capacity(stage.len());
    for &(day, _) in stage {
        let s = output
            .snapshots
            .iter()
            .min_by(|a, b| (a.day - day).abs().total_cmp(&(b.day - day).abs()))
            .ok_or(CalibrationError::NoSnapshots)?;
        p.push(s.surface_elevation_m);
    }
    let o: Vec<f64> = stage.iter().map(|s| s.1).collect();
    ame(&p, &o)
}

fn default_weight() -> f64 {
    1.0
}
fn default_points() -> usize {
    3
}
fn default_budget() -> usize {
    500
}
fn default_min_step() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Tunable parameter, `name` or `section.name`.
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    /// Grid points on this axis; falls back to the search default.
    #[serde(default)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objective {
    #[serde(default = "default_weight")]
    pub temp_weight: f64,
    #[serde(default = "default_weight")]
    pub do_weight: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Self {
            temp_weight: 1.0,
            do_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Search {
    #[serde(default = "default_points")]
    pub grid_points: usize,
    /// Descent stops once every step is below this fraction of its axis range.
    #[serde(default = "default_min_step")]
    pub min_step_fraction: f64,
    #[serde(default = "default_budget")]
    pub max_evaluations: usize,
}

impl Default for Search {
    fn default() -> Self {
        Self {
            grid_points: default_points(),
            min_step_fraction: default_min_step(),
            max_evaluations: default_budget(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    #[serde(rename = "axis")]
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub search: Search,
}

impl CalibrationSpec {
    /// Axes over the usual calibration parameters, bounds around `base`.
    pub fn default_axes(base: &RunConfig) -> Self {
        let axes = ["kz_max", "wind_efficiency", "light_extinction", "k_bod_20", "sod_20", "k_a_base"]
            .into_iter()
            .map(|name| {
                let v = base.parameter(name).expect("default axes are tunable");
                Axis {
                    name: name.to_string(),
                    lo: 0.5 * v,
                    hi: 1.5 * v,
                    points: None,
                }
            })
            .collect();
        Self {
            axes,
            objective: Objective::default(),
            search: Search {
                grid_points: 2,
                ..Search::default()
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self, CalibrationError> {
        let spec: Self = toml::from_str(text).map_err(|e| CalibrationError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CalibrationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CalibrationError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CalibrationError::InvalidSpec(message) => CalibrationError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serialises")
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: String| Err(CalibrationError::InvalidSpec(m));
        if self.axes.is_empty() {
            return bad("no parameter axes".into());
        }
        for a in &self.axes {
            if !(a.lo.is_finite() && a.hi.is_finite()) || a.lo >= a.hi {
                return bad(format!("axis `{}` needs finite lo < hi", a.name));
            }
            if a.points == Some(0) {
                return bad(format!("axis `{}` needs at least one grid point", a.name));
            }
        }
        let o = &self.objective;
        if o.temp_weight < 0.0 || o.do_weight < 0.0 || o.temp_weight + o.do_weight <= 0.0 {
            return bad("weights must be non-negative and not both zero".into());
        }
        if self.search.grid_points == 0 {
            return bad("grid_points must be at least 1".into());
        }
        if !(self.search.min_step_fraction > 0.0) {
            return bad("min_step_fraction must be positive".into());
        }
        let mut names: Vec<&str> = self.axes.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate axis".into());
        }
        Ok(())
    }

    fn points(&self, a: &Axis) -> usize {
        a.points.unwrap_or(self.search.grid_points)
    }

    /// Grid values of one axis, lo first. A single point sits at lo.
    pub fn axis_values(&self, a: &Axis) -> Vec<f64> {
        let n = self.points(a);
        if n == 1 {
            return vec![a.lo];
        }
        (0..n).map(|j| snap(a, a.lo + (a.hi - a.lo) * j as f64 / (n - 1) as f64)).collect()
    }

    pub fn grid_size(&self) -> usize {
        self.axes.iter().map(|a| self.points(a)).product()
    }

    pub fn objective(&self, m: &FitMetrics) -> Result<f64, CalibrationError> {
        let mut total = 0.0;
        for (w, stats) in [(self.objective.temp_weight, m.temp), (self.objective.do_weight, m.oxygen)] {
            if w > 0.0 {
                total += w * stats.ame.ok_or(CalibrationError::Empty)?;
            }
        }
        Ok(total)
    }
}

/// One engine run at one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub params: Vec<f64>,
    pub metrics: FitMetrics,
    pub by_station: BTreeMap<String, FitMetrics>,
    pub skipped: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub names: Vec<String>,
    /// Every evaluation in the order it was made.
    pub trace: Vec<Evaluation>,
    /// Index of the best evaluation in `trace`.
    pub best: usize,
}

pub const REPORT_FIXED_COLUMNS: &str = "ame_temp_c,ame_do_mgl,rmse_temp_c,rmse_do_mgl,objective";

impl CalibrationResult {
    pub fn best(&self) -> &Evaluation {
        &self.trace[self.best]
    }

    pub fn best_params(&self) -> Vec<(&str, f64)> {
        self.names.iter().map(String::as_str).zip(self.best().params.iter().copied()).collect()
    }

    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }

    pub fn write_report<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "evaluation,{},{REPORT_FIXED_COLUMNS}", self.names.join(","))?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for (n, e) in self.trace.iter().enumerate() {
            let params: Vec<String> = e.params.iter().map(f64::to_string).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                n + 1,
                params.join(","),
                opt(e.metrics.temp.ame),
                opt(e.metrics.oxygen.ame),
                opt(e.metrics.temp.rmse),
                opt(e.metrics.oxygen.rmse),
                e.objective
            )?;
        }
        w.flush()
    }

    /// The best parameters as a config fragment, one table per section.
    pub fn best_toml(&self) -> String {
        let mut doc = toml::map::Map::new();
        for (name, v) in self.best_params() {
            let (section, key) = crate::config::tunable(name).expect("axes were validated");
            let table = doc
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
            table
                .as_table_mut()
                .expect("section is a table")
                .insert(key.to_string(), toml::Value::Float(v));
        }
        toml::to_string(&toml::Value::Table(doc)).expect("fragment serialises")
    }
}

/// Runs the grid pass and coordinate descent. Each evaluation is one full
/// engine run of `base` with the axis parameters replaced; the
/// configuration's snapshot days are set to the observation days.
pub fn calibrate(
    spec: &CalibrationSpec,
    base: &PreparedRun,
    observations: &StationProfileSet,
    jobs: usize,
) -> Result<CalibrationResult, CalibrationError> {
    spec.validate()?;
    let budget = spec.search.max_evaluations;
    if budget == 0 {
        return Err(CalibrationError::BudgetZero);
    }
    if observations.is_empty() {
        return Err(CalibrationError::InvalidObservations("no observations".into()));
    }
    if spec.grid_size() > budget {
        return Err(CalibrationError::InvalidSpec(format!(
            "grid pass needs {} evaluations but the budget is {budget}",
            spec.grid_size()
        )));
    }
    let mut cfg = base.config.clone();
    for a in &spec.axes {
        cfg.parameter(&a.name)?;
    }
    cfg.run.snapshot_days = observations
        .days()
        .into_iter()
        .filter(|d| (cfg.run.start_day..=cfg.run.end_day).contains(d))
        .collect();
    cfg.run.station_interval_steps = 0;
    let base = base.with_config(cfg)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CalibrationError::InvalidSpec(format!("thread pool: {e}")))?;

    let evaluate = |x: &[f64]| -> Result<Evaluation, CalibrationError> {
        let mut cfg = base.config.clone();
        for (a, v) in spec.axes.iter().zip(x) {
            cfg.set_parameter(&a.name, *v)?;
        }
        let out = run_prepared(&base.with_config(cfg)?)?;
        let m = match_profiles(&out, &base.config.stations, observations)?;
        let metrics = FitMetrics::from_matched(&m);
        Ok(Evaluation {
            params: x.to_vec(),
            objective: spec.objective(&metrics)?,
            by_station: FitMetrics::by_station(&m),
            skipped: m.skipped.len(),
            metrics,
        })
    };

    let mut search = SearchState {
        trace: Vec::new(),
        seen: HashMap::new(),
        best: 0,
    };
    // grid pass, first axis slowest so that lo ties win
    let values: Vec<Vec<f64>> = spec.axes.iter().map(|a| spec.axis_values(a)).collect();
    let mut points = vec![Vec::with_capacity(values.len())];
    for v in &values {
        points = points
            .into_iter()
            .flat_map(|p| {
                v.iter().map(move |x| {
                    let mut q = p.clone();
                    q.push(*x);
                    q
                })
            })
            .collect();
    }
    search.evaluate_all(&pool, &points, &evaluate, budget)?;

    // coordinate descent from the best grid point
    let mut steps: Vec<f64> = spec
        .axes
        .iter()
        .map(|a| {
            let n = spec.points(a);
            (a.hi - a.lo) / if n > 1 { (n - 1) as f64 } else { 2.0 }
        })
        .collect();
    let floor: Vec<f64> = spec
        .axes
        .iter()
        .map(|a| spec.search.min_step_fraction * (a.hi - a.lo))
        .collect();
    'descent: while search.trace.len() < budget && steps.iter().zip(&floor).any(|(s, f)| s >= f) {
        for (j, a) in spec.axes.iter().enumerate() {
            if steps[j] < floor[j] {
                continue;
            }
            let x = search.trace[search.best].params.clone();
            let candidates: Vec<Vec<f64>> = [x[j] - steps[j], x[j] + steps[j]]
                .into_iter()
                .map(|v| snap(a, v))
                .filter(|v| *v != x[j])
                .map(|v| {
                    let mut y = x.clone();
                    y[j] = v;
                    y
                })
                .collect();
            let before = search.best;
            search.evaluate_all(&pool, &candidates, &evaluate, budget)?;
            if search.best == before {
                steps[j] *= 0.5;
            }
            if search.trace.len() >= budget {
                break 'descent;
            }
        }
    }
    Ok(CalibrationResult {
        names: spec.axes.iter().map(|a| a.name.clone()).collect(),
        trace: search.trace,
        best: search.best,
    })
}

/// Clamps to the axis and rounds to a fine lattice so that the same point
/// reached along different paths has the same bits.
fn snap(a: &Axis, v: f64) -> f64 {
    let span = a.hi - a.lo;
    let f = ((v - a.lo) / span).clamp(0.0, 1.0);
    (a.lo + span * (f * 1e9).round() / 1e9).clamp(a.lo, a.hi)
}

struct SearchState {
    trace: Vec<Evaluation>,
    seen: HashMap<Vec<u64>, usize>,
    best: usize,
}

impl SearchState {
    /// Evaluates the points not seen before, concurrently, up to the budget.
    /// Improvement must be strict, so earlier points win ties.
    fn evaluate_all<F>(
        &mut self,
        pool: &rayon::ThreadPool,
        points: &[Vec<f64>],
        evaluate: &F,
        budget: usize,
    ) -> Result<(), CalibrationError>
    where
        F: Fn(&[f64]) -> Result<Evaluation, CalibrationError> + Sync,
    {
        let key = |p: &[f64]| p.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
        let mut fresh: Vec<&Vec<f64>> = Vec::new();
        for p in points {
            if !self.seen.contains_key(&key(p)) && !fresh.iter().any(|q| key(q) == key(p)) {
                fresh.push(p);
            }
        }
        fresh.truncate(budget.saturating_sub(self.trace.len()));
        let results: Vec<Result<Evaluation, CalibrationError>> =
            pool.install(|| fresh.par_iter().map(|p| evaluate(p)).collect());
        for r in results {
            let e = r?;
            self.seen.insert(key(&e.params), self.trace.len());
            self.trace.push(e);
            let n = self.trace.len() - 1;
            if n == 0 || self.trace[n].objective < self.trace[self.best].objective {
                self.best = n;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ame_hand_values() {
        let a = ame(&[10.0, 12.0, 14.0], &[11.0, 11.0, 14.0]).unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-12);
        let r = rmse(&[1.0, 1.0, 0.0], &[0.0; 3]).unwrap();
        assert!((r - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(ame(&[1.0], &[1.0, 2.0]), Err(CalibrationError::LengthMismatch { .. })));
        assert!(matches!(rmse(&[], &[]), Err(CalibrationError::Empty)));
    }

    #[test]
    fn interpolation_between_centers() {
        let p = [(0.5, 12.0, 8.0), (1.5, 10.0, 6.0)];
        assert_eq!(interpolate(&p, 1.0), (11.0, 7.0));
        assert_eq!(interpolate(&p, 0.5), (12.0, 8.0));
        assert_eq!(interpolate(&p, 0.1), (12.0, 8.0));
        assert_eq!(interpolate(&p, 1.9), (10.0, 6.0));
    }

    #[test]
    fn observations_parse_with_missing_values() {
        let s = StationProfileSet::parse("day,station,depth_m,temp_c,do_mgl\n10,dam,1.5,,7.2\n10,dam,2.5,14.1,\n").unwrap();
        assert_eq!(s.rows[0].temp_c, None);
        assert_eq!(s.rows[1].do_mgl, None);
        assert_eq!(s.days(), vec![10.0]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(StationProfileSet::parse(std::str::from_utf8(&buf).unwrap()).unwrap(), s);
        assert!(StationProfileSet::parse("day,depth\n1,2\n").is_err());
        assert!(StationProfileSet::parse("day,station,depth_m,temp_c,do_mgl\n1,dam,-2,,\n").is_err());
    }

    #[test]
    fn spec_validation() {
        let ok = "[[axis]]\nname = \"kz_max\"\nlo = 1e-5\nhi = 2e-4\n";
        let s = CalibrationSpec::parse(ok).unwrap();
        assert_eq!(s.search, Search::default());
        assert_eq!(s.axis_values(&s.axes[0]).len(), 3);
        for bad in [
            "[[axis]]\nname = \"kz_max\"\nlo = 2.0\nhi = 1.0\n",
            "axis = []\n",
            "[[axis]]\nname = \"kz_max\"\nlo = 1.0\nhi = 2.0\n[objective]\ntemp_weight = 0.0\ndo_weight = 0.0\n",
        ] {
            assert!(CalibrationSpec::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn objective_needs_weighted_pairs() {
        let s = CalibrationSpec::parse("[[axis]]\nname = \"kz_max\"\nlo = 1e-5\nhi = 2e-4\n").unwrap();
        let m = FitMetrics {
            temp: ErrorStats { ame: Some(0.5), rmse: Some(0.6), count: 3 },
            oxygen: ErrorStats::default(),
        };
        assert!(matches!(s.objective(&m), Err(CalibrationError::Empty)));
    }
}
