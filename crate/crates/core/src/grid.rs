//! Segment x layer computational grid.
//!
//! Segments run upstream to dam (index 0 is the most upstream segment, the
//! last one abuts the dam). Layers run top to bottom (index 0 is the highest
//! layer). Every segment shares the same elevation ladder; the local bed is
//! expressed by zero widths in the layers below it.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

/// Header of the bathymetry CSV, exactly as read and written.
pub const BATHYMETRY_HEADER: &str = "segment,layer,elevation_bottom_m,thickness_m,width_m,length_m";

/// Relative tolerance used when checking that the layer ladder is contiguous.
const LADDER_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing cell: segment {segment}, layer {layer}")]
    MissingCell { segment: u32, layer: usize },
    #[error("duplicate cell on line {line}: segment {segment}, layer {layer}")]
    DuplicateCell { line: usize, segment: u32, layer: usize },
    #[error("segment {segment}: width increases downward at layer {layer}")]
    NonMonotonicWidth { segment: u32, layer: usize },
    #[error("negative or zero geometry: {what}")]
    NegativeGeometry { what: String },
    #[error("segment {segment}, layer {layer}: layer elevations differ from the shared ladder")]
    InconsistentLadder { segment: u32, layer: usize },
    #[error("grid has no cells")]
    Empty,
    #[error("elevation {elevation} m outside grid range [{bottom}, {top}]")]
    ElevationOutOfRange { elevation: f64, bottom: f64, top: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGeom {
    pub id: u32,
    pub length_m: f64,
    /// Per-layer widths, top layer first.
    pub widths_m: Vec<f64>,
    /// Distance of the segment center from the dam face.
    pub distance_from_dam_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    segments: Vec<SegmentGeom>,
    /// Bottom elevation of each layer, top layer first.
    layer_bottoms: Vec<f64>,
    thicknesses: Vec<f64>,
    datum_elevation_m: f64,
    /// Plan area of each layer summed over all segments.
    layer_plan_areas: Vec<f64>,
}

impl Grid {
    /// Builds a grid from segments ordered upstream to dam and a shared layer ladder.
    ///
    /// `layer_bottoms` and `thicknesses` are given top layer first.
    pub fn new(
        segments: Vec<(u32, f64, Vec<f64>)>,
        layer_bottoms: Vec<f64>,
        thicknesses: Vec<f64>,
    ) -> Result<Self, GridError> {
        let layer_count = thicknesses.len();
        if segments.is_empty() || layer_count == 0 {
            return Err(GridError::Empty);
        }
        if layer_bottoms.len() != layer_count {
            return Err(GridError::Parse {
                line: 0,
                message: "layer bottoms and thicknesses differ in length".into(),
            });
        }
        for (k, &h) in thicknesses.iter().enumerate() {
            if !(h > 0.0) || !h.is_finite() {
                return Err(GridError::NegativeGeometry {
                    what: format!("thickness of layer {} is {h}", k + 1),
                });
            }
        }
        for k in 0..layer_count - 1 {
            let expected = layer_bottoms[k + 1] + thicknesses[k + 1];
            if (layer_bottoms[k] - expected).abs() > LADDER_TOL * expected.abs().max(1.0) {
                return Err(GridError::InconsistentLadder {
                    segment: segments[0].0,
                    layer: k + 1,
                });
            }
        }
        for (id, length, widths) in &segments {
            if !(*length > 0.0) || !length.is_finite() {
                return Err(GridError::NegativeGeometry {
                    what: format!("length of segment {id} is {length}"),
                });
            }
            if widths.len() != layer_count {
                return Err(GridError::MissingCell {
                    segment: *id,
                    layer: widths.len().min(layer_count) + 1,
                });
            }
            for (k, &w) in widths.iter().enumerate() {
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(GridError::NegativeGeometry {
                        what: format!("width of segment {id}, layer {} is {w}", k + 1),
                    });
                }
                if k > 0 && w > widths[k - 1] {
                    return Err(GridError::NonMonotonicWidth {
                        segment: *id,
                        layer: k + 1,
                    });
                }
            }
        }

        let n = segments.len();
        let mut distances = vec![0.0; n];
        let mut downstream_edge = 0.0;
        for i in (0..n).rev() {
            let length = segments[i].1;
            distances[i] = downstream_edge + 0.5 * length;
            downstream_edge += length;
        }
        let segments: Vec<SegmentGeom> = segments
            .into_iter()
            .zip(distances)
            .map(|((id, length_m, widths_m), distance_from_dam_m)| SegmentGeom {
                id,
                length_m,
                widths_m,
                distance_from_dam_m,
            })
            .collect();
        let layer_plan_areas = (0..layer_count)
            .map(|k| segments.iter().map(|s| s.length_m * s.widths_m[k]).sum())
            .collect();
        let datum_elevation_m = layer_bottoms[layer_count - 1];
        Ok(Self {
            segments,
            layer_bottoms,
            thicknesses,
            datum_elevation_m,
            layer_plan_areas,
        })
    }

    /// Uniform ladder convenience constructor: `layer_count` layers of equal thickness above `datum`.
    pub fn uniform(
        segments: Vec<(u32, f64, Vec<f64>)>,
        layer_count: usize,
        thickness: f64,
        datum: f64,
    ) -> Result<Self, GridError> {
        let bottoms = (0..layer_count)
            .map(|k| datum + (layer_count - 1 - k) as f64 * thickness)
            .collect();
        Self::new(segments, bottoms, vec![thickness; layer_count])
    }

    pub fn segments(&self) -> &[SegmentGeom] {
        &self.segments
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn layer_count(&self) -> usize {
        self.thicknesses.len()
    }

    pub fn cell_count(&self) -> usize {
        self.segment_count() * self.layer_count()
    }

    /// Flat index of cell (segment, layer).
    #[inline]
    pub fn index(&self, segment: usize, layer: usize) -> usize {
        segment * self.layer_count() + layer
    }

    pub fn datum_elevation_m(&self) -> f64 {
        self.datum_elevation_m
    }

    pub fn top_elevation_m(&self) -> f64 {
        self.layer_bottoms[0] + self.thicknesses[0]
    }

    #[inline]
    pub fn layer_bottom(&self, layer: usize) -> f64 {
        self.layer_bottoms[layer]
    }

    #[inline]
    pub fn layer_top(&self, layer: usize) -> f64 {
        self.layer_bottoms[layer] + self.thicknesses[layer]
    }

    #[inline]
    pub fn thickness(&self, layer: usize) -> f64 {
        self.thicknesses[layer]
    }

    pub fn layer_center(&self, layer: usize) -> f64 {
        self.layer_bottoms[layer] + 0.5 * self.thicknesses[layer]
    }

    #[inline]
    pub fn width(&self, segment: usize, layer: usize) -> f64 {
        self.segments[segment].widths_m[layer]
    }

    #[inline]
    pub fn length(&self, segment: usize) -> f64 {
        self.segments[segment].length_m
    }

    pub fn distance_from_dam(&self, segment: usize) -> f64 {
        self.segments[segment].distance_from_dam_m
    }

    /// Deepest layer with non-zero width in a segment.
    pub fn bed_layer(&self, segment: usize) -> Option<usize> {
        self.segments[segment].widths_m.iter().rposition(|&w| w > 0.0)
    }

    /// Segment position by id.
    pub fn segment_position(&self, id: u32) -> Option<usize> {
        self.segments.iter().position(|s| s.id == id)
    }

    /// Plan area of a cell: the horizontal footprint of the layer in one segment.
    #[inline]
    pub fn cell_plan_area(&self, segment: usize, layer: usize) -> f64 {
        self.length(segment) * self.width(segment, layer)
    }

    /// Exposed bed area of a cell: the part of its footprint not covered by the layer below.
    pub fn cell_bed_area(&self, segment: usize, layer: usize) -> f64 {
        let below = if layer + 1 < self.layer_count() {
            self.width(segment, layer + 1)
        } else {
            0.0
        };
        self.length(segment) * (self.width(segment, layer) - below)
    }

    /// Layer containing elevation `e` (bottom < e <= top). `None` above the top or at/below datum.
    pub fn layer_containing(&self, e: f64) -> Option<usize> {
        if e > self.top_elevation_m() || e <= self.datum_elevation_m {
            return None;
        }
        (0..self.layer_count()).find(|&k| e > self.layer_bottoms[k])
    }

    /// Wetted thickness of a layer for surface elevation `e`.
    #[inline]
    pub fn wet_thickness(&self, layer: usize, e: f64) -> f64 {
        (e - self.layer_bottoms[layer]).clamp(0.0, self.thicknesses[layer])
    }

    /// Volume of a single cell at surface elevation `e`.
    #[inline]
    pub fn cell_volume(&self, segment: usize, layer: usize, e: f64) -> f64 {
        self.cell_plan_area(segment, layer) * self.wet_thickness(layer, e)
    }

    fn check_elevation(&self, e: f64) -> Result<(), GridError> {
        let bottom = self.datum_elevation_m;
        let top = self.top_elevation_m();
        if !(e >= bottom && e <= top) {
            return Err(GridError::ElevationOutOfRange {
                elevation: e,
                bottom,
                top,
            });
        }
        Ok(())
    }

    /// Total water volume stored below surface elevation `e`.
    pub fn total_volume(&self, e: f64) -> Result<f64, GridError> {
        self.check_elevation(e)?;
        Ok(self
            .layer_plan_areas
            .iter()
            .enumerate()
            .map(|(k, a)| a * self.wet_thickness(k, e))
            .sum())
    }

    /// Water-surface plan area at elevation `e`: plan area of the layer holding the surface.
    pub fn surface_area(&self, e: f64) -> Result<f64, GridError> {
        self.check_elevation(e)?;
        let k = self
            .layer_containing(e)
            .unwrap_or(self.layer_count() - 1);
        Ok(self.layer_plan_areas[k])
    }

    pub fn layer_plan_area(&self, layer: usize) -> f64 {
        self.layer_plan_areas[layer]
    }

    pub fn area_volume_curve(&self) -> AreaVolumeCurve {
        let n = self.layer_count();
        let mut rows = Vec::with_capacity(n + 1);
        let mut volume = 0.0;
        rows.push(CurveRow {
            elevation_m: self.datum_elevation_m,
            plan_area_m2: self.layer_plan_areas[n - 1],
            volume_m3: 0.0,
        });
        for k in (0..n).rev() {
            volume += self.layer_plan_areas[k] * self.thicknesses[k];
            rows.push(CurveRow {
                elevation_m: self.layer_top(k),
                plan_area_m2: self.layer_plan_areas[k],
                volume_m3: volume,
            });
        }
        AreaVolumeCurve { rows }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub elevation_m: f64,
    pub plan_area_m2: f64,
    pub volume_m3: f64,
}

/// Storage curve at every layer interface, bottom to top.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaVolumeCurve {
    pub rows: Vec<CurveRow>,
}

impl AreaVolumeCurve {
    /// Linear interpolation of volume between interface rows. Exact for the grid
    /// because stored volume is piecewise linear in elevation.
    pub fn volume_at(&self, e: f64) -> Option<f64> {
        let rows = &self.rows;
        let first = rows.first()?;
        let last = rows.last()?;
        if e < first.elevation_m || e > last.elevation_m {
            return None;
        }
        let j = rows
            .windows(2)
            .position(|w| e <= w[1].elevation_m)
            .unwrap_or(rows.len() - 2);
        let (a, b) = (rows[j], rows[j + 1]);
        Some(a.volume_m3 + b.plan_area_m2 * (e - a.elevation_m))
    }

    /// Inverse of [`volume_at`](Self::volume_at).
    pub fn elevation_at_volume(&self, v: f64) -> Option<f64> {
        let rows = &self.rows;
        let last = rows.last()?;
        if v < 0.0 || v > last.volume_m3 {
            return None;
        }
        let j = rows
            .windows(2)
            .position(|w| v <= w[1].volume_m3 && w[1].plan_area_m2 > 0.0)
            .unwrap_or(rows.len() - 2);
        let (a, b) = (rows[j], rows[j + 1]);
        if b.plan_area_m2 <= 0.0 {
            return Some(a.elevation_m);
        }
        let e = a.elevation_m + (v - a.volume_m3) / b.plan_area_m2;
        Some(e.min(b.elevation_m))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "elevation_m,plan_area_m2,volume_m3")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.elevation_m, r.plan_area_m2, r.volume_m3)?;
        }
        w.flush()
    }
}

/// Reads a bathymetry CSV from disk.
pub fn load_bathymetry(path: impl AsRef<Path>) -> Result<Grid, GridError> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| GridError::Io {
            path: path.display().to_string(),
            source,
        })?;
    parse_bathymetry(&text)
}

struct Row {
    line: usize,
    elevation_bottom: f64,
    thickness: f64,
    width: f64,
    length: f64,
}

/// Parses bathymetry CSV text. Layer 1 is the surface layer.
pub fn parse_bathymetry(text: &str) -> Result<Grid, GridError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => break (i + 1, l.trim().trim_start_matches('\u{feff}')),
            None => return Err(GridError::Empty),
        }
    };
    if header.1 != BATHYMETRY_HEADER {
        return Err(GridError::Parse {
            line: header.0,
            message: format!("expected header `{BATHYMETRY_HEADER}`"),
        });
    }

    let mut cells: BTreeMap<u32, BTreeMap<usize, Row>> = BTreeMap::new();
    for (i, raw) in lines {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(GridError::Parse {
                line,
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let parse_f = |s: &str, name: &str| -> Result<f64, GridError> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| GridError::Parse {
                    line,
                    message: format!("invalid {name} `{s}`"),
                })
        };
        let segment: u32 = fields[0].parse().map_err(|_| GridError::Parse {
            line,
            message: format!("invalid segment `{}`", fields[0]),
        })?;
        let layer: usize = fields[1]
            .parse()
            .ok()
            .filter(|&l| l >= 1)
            .ok_or_else(|| GridError::Parse {
                line,
                message: format!("invalid layer `{}`", fields[1]),
            })?;
        let row = Row {
            line,
            elevation_bottom: parse_f(fields[2], "elevation_bottom_m")?,
            thickness: parse_f(fields[3], "thickness_m")?,
            width: parse_f(fields[4], "width_m")?,
            length: parse_f(fields[5], "length_m")?,
        };
        if row.thickness <= 0.0 || row.width < 0.0 || row.length <= 0.0 {
            return Err(GridError::NegativeGeometry {
                what: format!("line {line}: segment {segment}, layer {layer}"),
            });
        }
        let seg = cells.entry(segment).or_default();
        if seg.insert(layer, row).is_some() {
            return Err(GridError::DuplicateCell {
                line,
                segment,
                layer,
            });
        }
    }
    if cells.is_empty() {
        return Err(GridError::Empty);
    }
    let layer_count = cells
        .values()
        .flat_map(|s| s.keys().copied())
        .max()
        .unwrap_or(0);

    let (first_id, first) = cells.iter().next().unwrap();
    let mut bottoms = Vec::with_capacity(layer_count);
    let mut thicknesses = Vec::with_capacity(layer_count);
    for layer in 1..=layer_count {
        let row = first.get(&layer).ok_or(GridError::MissingCell {
            segment: *first_id,
            layer,
        })?;
        bottoms.push(row.elevation_bottom);
        thicknesses.push(row.thickness);
    }

    let mut segments = Vec::with_capacity(cells.len());
    for (&id, seg) in &cells {
        let mut widths = Vec::with_capacity(layer_count);
        let mut length = None;
        for layer in 1..=layer_count {
            let row = seg.get(&layer).ok_or(GridError::MissingCell {
                segment: id,
                layer,
            })?;
            let k = layer - 1;
            if row.elevation_bottom != bottoms[k] || row.thickness != thicknesses[k] {
                return Err(GridError::InconsistentLadder { segment: id, layer });
            }
            match length {
                None => length = Some(row.length),
                Some(l) if l != row.length => {
                    return Err(GridError::Parse {
                        line: row.line,
                        message: format!("segment {id} has inconsistent lengths"),
                    })
                }
                _ => {}
            }
            widths.push(row.width);
        }
        segments.push((id, length.unwrap(), widths));
    }
    Grid::new(segments, bottoms, thicknesses)
}

/// Writes the grid in bathymetry CSV form. Values use shortest round-trip formatting,
/// so reading the output back reproduces the geometry bit for bit.
pub fn write_bathymetry<W: Write>(grid: &Grid, w: W) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "{BATHYMETRY_HEADER}")?;
    for seg in grid.segments() {
        for k in 0..grid.layer_count() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                seg.id,
                k + 1,
                grid.layer_bottom(k),
                grid.thickness(k),
                seg.widths_m[k],
                seg.length_m
            )?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cell() -> Grid {
        Grid::uniform(vec![(1, 50.0, vec![20.0])], 1, 1.0, 100.0).unwrap()
    }

    #[test]
    fn single_cell_grid() {
        let g = one_cell();
        assert_eq!(g.cell_count(), 1);
        assert_eq!(g.total_volume(101.0).unwrap(), 1000.0);
        assert_eq!(g.total_volume(100.5).unwrap(), 500.0);
        assert_eq!(g.distance_from_dam(0), 25.0);
    }

    #[test]
    fn single_cell_curve_has_two_rows() {
        let c = one_cell().area_volume_curve();
        assert_eq!(c.rows.len(), 2);
        assert_eq!(
            c.rows[0],
            CurveRow {
                elevation_m: 100.0,
                plan_area_m2: 1000.0,
                volume_m3: 0.0
            }
        );
        assert_eq!(
            c.rows[1],
            CurveRow {
                elevation_m: 101.0,
                plan_area_m2: 1000.0,
                volume_m3: 1000.0
            }
        );
    }

    #[test]
    fn three_layer_uniform_curve_ratios() {
        let g = Grid::uniform(vec![(1, 10.0, vec![5.0; 3])], 3, 2.0, 0.0).unwrap();
        let c = g.area_volume_curve();
        let v: Vec<f64> = c.rows.iter().map(|r| r.volume_m3).collect();
        // hand summation: each layer is 10 * 5 * 2 = 100 m3
        assert_eq!(v, vec![0.0, 100.0, 200.0, 300.0]);
    }

    #[test]
    fn width_increasing_downward_rejected() {
        let text = format!(
            "{BATHYMETRY_HEADER}\n1,1,1,1,10,50\n1,2,0,1,12,50\n"
        );
        assert!(matches!(
            parse_bathymetry(&text),
            Err(GridError::NonMonotonicWidth { segment: 1, layer: 2 })
        ));
    }

    #[test]
    fn missing_cell_rejected() {
        let text = format!(
            "{BATHYMETRY_HEADER}\n1,1,1,1,10,50\n1,2,0,1,8,50\n2,1,1,1,10,50\n"
        );
        assert!(matches!(
            parse_bathymetry(&text),
            Err(GridError::MissingCell { segment: 2, layer: 2 })
        ));
    }

    #[test]
    fn negative_geometry_rejected() {
        let text = format!("{BATHYMETRY_HEADER}\n1,1,0,1,-3,50\n");
        assert!(matches!(
            parse_bathymetry(&text),
            Err(GridError::NegativeGeometry { .. })
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = format!("{BATHYMETRY_HEADER}\n1,1,0,1,3,50\n1,2,x,1,3,50\n");
        match parse_bathymetry(&text) {
            Err(GridError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn elevation_out_of_range() {
        let g = one_cell();
        assert!(g.total_volume(101.5).is_err());
        assert!(g.total_volume(99.0).is_err());
    }

    #[test]
    fn distances_measured_from_dam() {
        let g = Grid::uniform(
            vec![(1, 100.0, vec![1.0]), (2, 50.0, vec![1.0]), (3, 20.0, vec![1.0])],
            1,
            1.0,
            0.0,
        )
        .unwrap();
        assert_eq!(g.distance_from_dam(2), 10.0);
        assert_eq!(g.distance_from_dam(1), 45.0);
        assert_eq!(g.distance_from_dam(0), 120.0);
    }

    #[test]
    fn curve_inverse_matches_forward() {
        let g = Grid::uniform(
            vec![(1, 10.0, vec![5.0, 4.0, 0.0]), (2, 20.0, vec![6.0, 6.0, 3.0])],
            3,
            1.0,
            10.0,
        )
        .unwrap();
        let c = g.area_volume_curve();
        for e in [10.2, 11.0, 11.7, 12.5, 13.0] {
            let v = g.total_volume(e).unwrap();
            let back = c.elevation_at_volume(v).unwrap();
            assert!((back - e).abs() < 1e-12, "{e} vs {back}");
        }
    }
}
