//! Daily boundary-condition series: inflow, meteorology and withdrawal.
//!
//! Files are read into a [`RawSeries`] that keeps gaps (absent rows and empty
//! fields). [`fill_gaps`] turns a raw series into a gap-free [`DailySeries`]
//! that can be sampled at any time inside its horizon.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub const INFLOW_HEADER: &str = "day,q_in_m3s,t_in_c,do_in_mgl,bod_in_mgl";
pub const MET_HEADER: &str = "day,t_air_c,t_dew_c,wind_ms,wind_dir_deg,cloud_frac";
pub const WITHDRAWAL_HEADER: &str = "day,q_out_m3s,intake_elev_m";

/// Longest run of consecutive missing days that may be filled.
pub const MAX_GAP_DAYS: usize = 29;

#[derive(Debug, Error)]
pub enum ForcingError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: field `{field}` out of range ({value})")]
    RangeViolation {
        field: &'static str,
        line: usize,
        value: f64,
    },
    #[error("field `{field}` has a gap of {length} days starting at day {start}")]
    GapTooLong {
        field: &'static str,
        start: i64,
        length: usize,
    },
    #[error("field `{field}` has fewer than two present values")]
    InsufficientData { field: &'static str },
    #[error("time {t} outside series horizon [{first}, {last}]")]
    OutOfHorizon { t: f64, first: f64, last: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Inflow,
    Met,
    Withdrawal,
}

impl SeriesKind {
    pub fn header(self) -> &'static str {
        match self {
            SeriesKind::Inflow => INFLOW_HEADER,
            SeriesKind::Met => MET_HEADER,
            SeriesKind::Withdrawal => WITHDRAWAL_HEADER,
        }
    }

    fn fields(self) -> &'static [&'static str] {
        match self {
            SeriesKind::Inflow => &["q_in_m3s", "t_in_c", "do_in_mgl", "bod_in_mgl"],
            SeriesKind::Met => &["t_air_c", "t_dew_c", "wind_ms", "wind_dir_deg", "cloud_frac"],
            SeriesKind::Withdrawal => &["q_out_m3s", "intake_elev_m"],
        }
    }

    /// Column that is interpolated on the circle, if any.
    fn circular_field(self) -> Option<usize> {
        match self {
            SeriesKind::Met => Some(3),
            _ => None,
        }
    }

    fn check_range(self, field: usize, v: f64) -> bool {
        match (self, field) {
            (SeriesKind::Inflow, 0) => v >= 0.0,
            (SeriesKind::Inflow, 1) => (-2.0..=45.0).contains(&v),
            (SeriesKind::Inflow, 2 | 3) => v >= 0.0,
            (SeriesKind::Met, 2) => v >= 0.0,
            (SeriesKind::Met, 3) => (0.0..360.0).contains(&v),
            (SeriesKind::Met, 4) => (0.0..=1.0).contains(&v),
            (SeriesKind::Withdrawal, 0) => v >= 0.0,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflowRecord {
    pub day: f64,
    pub q_in: f64,
    pub t_in: f64,
    pub do_in: f64,
    pub bod_in: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetRecord {
    pub day: f64,
    pub t_air: f64,
    pub t_dew: f64,
    pub wind_speed: f64,
    pub wind_dir: f64,
    pub cloud_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WithdrawalRecord {
    pub day: f64,
    pub q_out: f64,
    pub intake_elevation_m: f64,
}

/// A record type stored as a fixed set of numeric columns.
pub trait Record: Copy {
    const KIND: SeriesKind;
    fn from_values(day: f64, v: &[f64]) -> Self;
    fn values(&self) -> Vec<f64>;
    fn day(&self) -> f64;
}

impl Record for InflowRecord {
    const KIND: SeriesKind = SeriesKind::Inflow;
    fn from_values(day: f64, v: &[f64]) -> Self {
        Self {
            day,
            q_in: v[0],
            t_in: v[1],
            do_in: v[2],
            bod_in: v[3],
        }
    }
    fn values(&self) -> Vec<f64> {
        vec![self.q_in, self.t_in, self.do_in, self.bod_in]
    }
    fn day(&self) -> f64 {
        self.day
    }
}

impl Record for MetRecord {
    const KIND: SeriesKind = SeriesKind::Met;
    fn from_values(day: f64, v: &[f64]) -> Self {
        Self {
            day,
            t_air: v[0],
            t_dew: v[1],
            wind_speed: v[2],
            wind_dir: v[3],
            cloud_frac: v[4],
        }
    }
    fn values(&self) -> Vec<f64> {
        vec![
            self.t_air,
            self.t_dew,
            self.wind_speed,
            self.wind_dir,
            self.cloud_frac,
        ]
    }
    fn day(&self) -> f64 {
        self.day
    }
}

impl Record for WithdrawalRecord {
    const KIND: SeriesKind = SeriesKind::Withdrawal;
    fn from_values(day: f64, v: &[f64]) -> Self {
        Self {
            day,
            q_out: v[0],
            intake_elevation_m: v[1],
        }
    }
    fn values(&self) -> Vec<f64> {
        vec![self.q_out, self.intake_elevation_m]
    }
    fn day(&self) -> f64 {
        self.day
    }
}

/// A parsed series that may contain gaps. Days run contiguously from
/// `first_day`; each day holds one optional value per field.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub kind: SeriesKind,
    pub first_day: i64,
    pub values: Vec<Vec<Option<f64>>>,
    /// Whether a row for the day appeared in the file at all.
    pub present: Vec<bool>,
}

impl RawSeries {
    /// Number of rows present in the source.
    pub fn record_count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    /// Days for which at least one field is missing.
    pub fn gaps(&self) -> Vec<i64> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, row)| row.iter().any(Option::is_none))
            .map(|(i, _)| self.first_day + i as i64)
            .collect()
    }

    pub fn last_day(&self) -> i64 {
        self.first_day + self.values.len() as i64 - 1
    }

    /// Builds a complete raw series from records (no gaps).
    pub fn from_records<R: Record>(records: &[R]) -> Self {
        let first_day = records.first().map(|r| r.day() as i64).unwrap_or(0);
        Self {
            kind: R::KIND,
            first_day,
            values: records
                .iter()
                .map(|r| r.values().into_iter().map(Some).collect())
                .collect(),
            present: vec![true; records.len()],
        }
    }
}

/// Reads a series CSV of the given kind.
pub fn load_series(path: impl AsRef<Path>, kind: SeriesKind) -> Result<RawSeries, ForcingError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ForcingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_series(&text, kind)
}

pub fn parse_series(text: &str, kind: SeriesKind) -> Result<RawSeries, ForcingError> {
    let nfields = kind.fields().len();
    let mut rows: Vec<(usize, i64, Vec<Option<f64>>)> = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim().trim_start_matches('\u{feff}');
        if raw.is_empty() {
            continue;
        }
        if !header_seen {
            if raw != kind.header() {
                return Err(ForcingError::Parse {
                    line,
                    message: format!("expected header `{}`", kind.header()),
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != nfields + 1 {
            return Err(ForcingError::Parse {
                line,
                message: format!("expected {} fields, found {}", nfields + 1, fields.len()),
            });
        }
        let day: f64 = fields[0].parse().map_err(|_| ForcingError::Parse {
            line,
            message: format!("invalid day `{}`", fields[0]),
        })?;
        if day < 0.0 || day.fract() != 0.0 {
            return Err(ForcingError::Parse {
                line,
                message: format!("day must be a whole number >= 0, got {day}"),
            });
        }
        let mut values = Vec::with_capacity(nfields);
        for (j, f) in fields[1..].iter().enumerate() {
            if f.is_empty() {
                values.push(None);
                continue;
            }
            let v: f64 = f
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| ForcingError::Parse {
                    line,
                    message: format!("invalid {} `{f}`", kind.fields()[j]),
                })?;
            if !kind.check_range(j, v) {
                return Err(ForcingError::RangeViolation {
                    field: kind.fields()[j],
                    line,
                    value: v,
                });
            }
            values.push(Some(v));
        }
        if kind == SeriesKind::Met {
            if let (Some(ta), Some(td)) = (values[0], values[1]) {
                if td > ta {
                    return Err(ForcingError::RangeViolation {
                        field: "t_dew_c",
                        line,
                        value: td,
                    });
                }
            }
        }
        if let Some((_, prev, _)) = rows.last() {
            if day as i64 <= *prev {
                return Err(ForcingError::Parse {
                    line,
                    message: "days must be strictly increasing".into(),
                });
            }
        }
        rows.push((line, day as i64, values));
    }
    let first_day = match rows.first() {
        Some(r) => r.1,
        None => {
            return Err(ForcingError::Parse {
                line: 1,
                message: "series has no records".into(),
            })
        }
    };
    let last_day = rows.last().unwrap().1;
    let len = (last_day - first_day + 1) as usize;
    let mut values = vec![vec![None; nfields]; len];
    let mut present = vec![false; len];
    for (_, day, v) in rows {
        let i = (day - first_day) as usize;
        values[i] = v;
        present[i] = true;
    }
    Ok(RawSeries {
        kind,
        first_day,
        values,
        present,
    })
}

fn wrap_degrees(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Interpolates an angle along the shortest arc.
pub fn lerp_angle(a: f64, b: f64, f: f64) -> f64 {
    let diff = (b - a + 180.0).rem_euclid(360.0) - 180.0;
    wrap_degrees(a + f * diff)
}

/// Gap-free daily series of one record kind.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries<R> {
    pub records: Vec<R>,
    /// True where any field of the record was filled rather than observed.
    pub filled: Vec<bool>,
}

impl<R: Record> DailySeries<R> {
    pub fn from_records(records: Vec<R>) -> Self {
        let filled = vec![false; records.len()];
        Self { records, filled }
    }

    pub fn first_day(&self) -> f64 {
        self.records.first().map(|r| r.day()).unwrap_or(0.0)
    }

    pub fn last_day(&self) -> f64 {
        self.records.last().map(|r| r.day()).unwrap_or(0.0)
    }

    /// Piecewise-linear sample in time; circular fields follow the shortest arc.
    pub fn sample(&self, t: f64) -> Result<R, ForcingError> {
        let (first, last) = (self.first_day(), self.last_day());
        if self.records.is_empty() || !(t >= first && t <= last) {
            return Err(ForcingError::OutOfHorizon { t, first, last });
        }
        let pos = t - first;
        let i = (pos.floor() as usize).min(self.records.len() - 1);
        let f = pos - i as f64;
        if f == 0.0 || i + 1 >= self.records.len() {
            return Ok(R::from_values(t, &self.records[i].values()));
        }
        let a = self.records[i].values();
        let b = self.records[i + 1].values();
        let circ = R::KIND.circular_field();
        let v: Vec<f64> = a
            .iter()
            .zip(&b)
            .enumerate()
            .map(|(j, (&x, &y))| {
                if Some(j) == circ {
                    lerp_angle(x, y, f)
                } else {
                    x + f * (y - x)
                }
            })
            .collect();
        Ok(R::from_values(t, &v))
    }

    pub fn to_raw(&self) -> RawSeries {
        RawSeries::from_records(&self.records)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_raw(&self.to_raw(), w)
    }
}

/// Writes a raw series; missing values become empty fields and absent rows are omitted.
pub fn write_raw<W: Write>(raw: &RawSeries, w: W) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "{}", raw.kind.header())?;
    let mut line = String::new();
    for (i, row) in raw.values.iter().enumerate() {
        if !raw.present[i] {
            continue;
        }
        line.clear();
        write!(line, "{}", raw.first_day + i as i64).unwrap();
        for v in row {
            line.push(',');
            if let Some(v) = v {
                write!(line, "{v}").unwrap();
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

/// Fills every missing value by linear interpolation between the nearest present
/// neighbours; leading and trailing gaps take the nearest present value.
pub fn fill_gaps<R: Record>(raw: &RawSeries) -> Result<DailySeries<R>, ForcingError> {
    assert_eq!(raw.kind, R::KIND, "series kind mismatch");
    let nfields = raw.kind.fields().len();
    let len = raw.values.len();
    let mut columns = vec![vec![0.0; len]; nfields];
    let mut filled = vec![false; len];
    for j in 0..nfields {
        let field = raw.kind.fields()[j];
        let known: Vec<usize> = (0..len).filter(|&i| raw.values[i][j].is_some()).collect();
        if known.len() < 2 {
            return Err(ForcingError::InsufficientData { field });
        }
        let check_gap = |start: usize, length: usize| {
            if length > MAX_GAP_DAYS {
                Err(ForcingError::GapTooLong {
                    field,
                    start: raw.first_day + start as i64,
                    length,
                })
            } else {
                Ok(())
            }
        };
        let circular = raw.kind.circular_field() == Some(j);
        let col = &mut columns[j];
        let first = known[0];
        let last = *known.last().unwrap();
        check_gap(0, first)?;
        check_gap(last + 1, len - 1 - last)?;
        let v_first = raw.values[first][j].unwrap();
        let v_last = raw.values[last][j].unwrap();
        for i in 0..first {
            col[i] = v_first;
            filled[i] = true;
        }
        for i in last + 1..len {
            col[i] = v_last;
            filled[i] = true;
        }
        for w in known.windows(2) {
            let (a, b) = (w[0], w[1]);
            let va = raw.values[a][j].unwrap();
            let vb = raw.values[b][j].unwrap();
            col[a] = va;
            col[b] = vb;
            if b > a + 1 {
                check_gap(a + 1, b - a - 1)?;
            }
            for i in a + 1..b {
                let f = (i - a) as f64 / (b - a) as f64;
                col[i] = if circular {
                    lerp_angle(va, vb, f)
                } else {
                    va + f * (vb - va)
                };
                filled[i] = true;
            }
        }
    }
    let records = (0..len)
        .map(|i| {
            let v: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            R::from_values((raw.first_day + i as i64) as f64, &v)
        })
        .collect();
    Ok(DailySeries { records, filled })
}

/// The three boundary series that drive a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSeries {
    pub inflow: DailySeries<InflowRecord>,
    pub met: DailySeries<MetRecord>,
    pub withdrawal: DailySeries<WithdrawalRecord>,
}

impl ForcingSeries {
    /// Loads and gap-fills all three series.
    pub fn load(
        inflow: impl AsRef<Path>,
        met: impl AsRef<Path>,
        withdrawal: impl AsRef<Path>,
    ) -> Result<Self, ForcingError> {
        Ok(Self {
            inflow: fill_gaps(&load_series(inflow, SeriesKind::Inflow)?)?,
            met: fill_gaps(&load_series(met, SeriesKind::Met)?)?,
            withdrawal: fill_gaps(&load_series(withdrawal, SeriesKind::Withdrawal)?)?,
        })
    }

    /// Common horizon covered by all three series.
    pub fn horizon(&self) -> (f64, f64) {
        let first = self
            .inflow
            .first_day()
            .max(self.met.first_day())
            .max(self.withdrawal.first_day());
        let last = self
            .inflow
            .last_day()
            .min(self.met.last_day())
            .min(self.withdrawal.last_day());
        (first, last)
    }
}

/// Inflow volume between `t0` and `t1` (days) by exact integration of the
/// piecewise-linear daily discharge, in m3.
pub fn integrated_inflow(series: &DailySeries<InflowRecord>, t0: f64, t1: f64) -> Result<f64, ForcingError> {
    let q = |t: f64| series.sample(t).map(|r| r.q_in);
    let mut knots = vec![t0];
    let mut d = t0.floor() + 1.0;
    while d < t1 {
        knots.push(d);
        d += 1.0;
    }
    knots.push(t1);
    let mut total = 0.0;
    for w in knots.windows(2) {
        total += 0.5 * (q(w[0])? + q(w[1])?) * (w[1] - w[0]) * 86_400.0;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inflow_text(days: impl Iterator<Item = i64>, q: impl Fn(i64) -> f64) -> String {
        let mut s = format!("{INFLOW_HEADER}\n");
        for d in days {
            s.push_str(&format!("{d},{},12,9,2\n", q(d)));
        }
        s
    }

    #[test]
    fn complete_year_has_no_gaps() {
        let raw = parse_series(&inflow_text(0..365, |_| 5.0), SeriesKind::Inflow).unwrap();
        assert_eq!(raw.record_count(), 365);
        assert!(raw.gaps().is_empty());
    }

    #[test]
    fn missing_row_is_a_gap() {
        let raw = parse_series(
            &inflow_text((0..365).filter(|&d| d != 100), |_| 5.0),
            SeriesKind::Inflow,
        )
        .unwrap();
        assert_eq!(raw.record_count(), 364);
        assert_eq!(raw.gaps(), vec![100]);
    }

    #[test]
    fn cloud_fraction_bound() {
        let text = format!("{MET_HEADER}\n0,20,10,2,90,1.7\n");
        match parse_series(&text, SeriesKind::Met) {
            Err(ForcingError::RangeViolation { field, line, .. }) => {
                assert_eq!(field, "cloud_frac");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dew_point_above_air_rejected() {
        let text = format!("{MET_HEADER}\n0,10,12,2,90,0.5\n");
        assert!(matches!(
            parse_series(&text, SeriesKind::Met),
            Err(ForcingError::RangeViolation { field: "t_dew_c", .. })
        ));
    }

    #[test]
    fn empty_field_is_missing() {
        let text = format!("{INFLOW_HEADER}\n0,4,12,9,2\n1,,12,9,2\n2,6,12,9,2\n");
        let raw = parse_series(&text, SeriesKind::Inflow).unwrap();
        assert_eq!(raw.gaps(), vec![1]);
        let s: DailySeries<InflowRecord> = fill_gaps(&raw).unwrap();
        assert_eq!(s.records[1].q_in, 5.0);
        assert_eq!(s.filled, vec![false, true, false]);
    }

    #[test]
    fn midpoint_fill() {
        let text = format!("{INFLOW_HEADER}\n10,4,12,9,2\n12,6,12,9,2\n");
        let s: DailySeries<InflowRecord> =
            fill_gaps(&parse_series(&text, SeriesKind::Inflow).unwrap()).unwrap();
        assert_eq!(s.records[1].day, 11.0);
        assert_eq!(s.records[1].q_in, 5.0);
    }

    #[test]
    fn three_day_gap_fill() {
        // hand interpolation between 2 and 10 over four intervals
        let text = format!("{INFLOW_HEADER}\n0,2,12,9,2\n4,10,12,9,2\n");
        let s: DailySeries<InflowRecord> =
            fill_gaps(&parse_series(&text, SeriesKind::Inflow).unwrap()).unwrap();
        let q: Vec<f64> = s.records.iter().map(|r| r.q_in).collect();
        assert_eq!(q, vec![2.0, 4.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn no_gaps_is_identity() {
        let raw = parse_series(&inflow_text(0..20, |d| d as f64 * 0.5), SeriesKind::Inflow).unwrap();
        let s: DailySeries<InflowRecord> = fill_gaps(&raw).unwrap();
        assert!(s.filled.iter().all(|f| !f));
        assert_eq!(s.to_raw(), raw);
    }

    #[test]
    fn leading_and_trailing_gaps_take_nearest() {
        let text = format!("{INFLOW_HEADER}\n0,,12,9,2\n1,3,12,9,2\n2,5,12,9,2\n3,,12,9,2\n");
        let s: DailySeries<InflowRecord> =
            fill_gaps(&parse_series(&text, SeriesKind::Inflow).unwrap()).unwrap();
        let q: Vec<f64> = s.records.iter().map(|r| r.q_in).collect();
        assert_eq!(q, vec![3.0, 3.0, 5.0, 5.0]);
    }

    #[test]
    fn long_gap_rejected() {
        let text = format!("{INFLOW_HEADER}\n0,2,12,9,2\n31,2,12,9,2\n");
        assert!(matches!(
            fill_gaps::<InflowRecord>(&parse_series(&text, SeriesKind::Inflow).unwrap()),
            Err(ForcingError::GapTooLong { length: 30, .. })
        ));
        let text = format!("{INFLOW_HEADER}\n0,2,12,9,2\n30,2,12,9,2\n");
        assert!(fill_gaps::<InflowRecord>(&parse_series(&text, SeriesKind::Inflow).unwrap()).is_ok());
    }

    #[test]
    fn single_value_is_insufficient() {
        let text = format!("{INFLOW_HEADER}\n0,2,12,9,2\n1,,12,9,2\n");
        assert!(matches!(
            fill_gaps::<InflowRecord>(&parse_series(&text, SeriesKind::Inflow).unwrap()),
            Err(ForcingError::InsufficientData { field: "q_in_m3s" })
        ));
    }

    #[test]
    fn sample_on_record_day_and_midpoint() {
        let text = format!("{INFLOW_HEADER}\n10,4,12,9,2\n11,6,14,9,2\n");
        let s: DailySeries<InflowRecord> =
            fill_gaps(&parse_series(&text, SeriesKind::Inflow).unwrap()).unwrap();
        assert_eq!(s.sample(10.0).unwrap(), s.records[0]);
        assert_eq!(s.sample(11.0).unwrap(), s.records[1]);
        let mid = s.sample(10.5).unwrap();
        assert_eq!(mid.q_in, 5.0);
        assert_eq!(mid.t_in, 13.0);
        assert!(matches!(s.sample(11.5), Err(ForcingError::OutOfHorizon { .. })));
        assert!(matches!(s.sample(9.0), Err(ForcingError::OutOfHorizon { .. })));
    }

    #[test]
    fn wind_direction_crosses_north() {
        let text = format!("{MET_HEADER}\n0,20,10,2,350,0.5\n1,20,10,2,10,0.5\n");
        let s: DailySeries<MetRecord> =
            fill_gaps(&parse_series(&text, SeriesKind::Met).unwrap()).unwrap();
        let mid = s.sample(0.5).unwrap();
        // circular mean of 350 and 10 degrees is north
        let oracle = {
            let (a, b) = (350f64.to_radians(), 10f64.to_radians());
            let (x, y) = (a.cos() + b.cos(), a.sin() + b.sin());
            y.atan2(x).to_degrees().rem_euclid(360.0)
        };
        let d = (mid.wind_dir - oracle + 180.0).rem_euclid(360.0) - 180.0;
        assert!(d.abs() < 1e-9, "{}", mid.wind_dir);
        assert_eq!(s.sample(0.25).unwrap().wind_dir, 355.0);
    }

    #[test]
    fn integrated_inflow_is_trapezoid() {
        let text = inflow_text(0..5, |d| [1.0, 3.0, 2.0, 2.0, 5.0][d as usize]);
        let s: DailySeries<InflowRecord> =
            fill_gaps(&parse_series(&text, SeriesKind::Inflow).unwrap()).unwrap();
        let trap = (0.5 * (1.0 + 3.0) + 0.5 * (3.0 + 2.0) + 2.0 + 0.5 * (2.0 + 5.0)) * 86_400.0;
        let v = integrated_inflow(&s, 0.0, 4.0).unwrap();
        assert!((v - trap).abs() <= 1e-9 * trap);
    }

    #[test]
    fn write_then_parse_keeps_gaps() {
        let text = format!("{INFLOW_HEADER}\n0,4,12,9,2\n1,,12,9,2\n3,6,12,9,2\n");
        let raw = parse_series(&text, SeriesKind::Inflow).unwrap();
        let mut out = Vec::new();
        write_raw(&raw, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }
}
