//! Distance-by-elevation matrices of one constituent at one snapshot, for
//! contour plots.

use std::io::Write;

use crate::engine::Snapshot;
use crate::grid::Grid;
use crate::hydro::Constituent;

#[derive(Debug, Clone, PartialEq)]
pub struct ContourExport {
    pub constituent: Constituent,
    pub day: f64,
    /// Column axis, ascending.
    pub distance_m: Vec<f64>,
    /// Row axis (layer centers), descending.
    pub elevation_m: Vec<f64>,
    /// `values[row][col]`, `None` for dry cells.
    pub values: Vec<Vec<Option<f64>>>,
}

/// Unknown names are rejected with the offending name.
pub fn export_contour_named(snapshot: &Snapshot, grid: &Grid, constituent: &str) -> Result<ContourExport, String> {
    Ok(export_contour(snapshot, grid, constituent.parse()?))
}

pub fn export_contour(snapshot: &Snapshot, grid: &Grid, constituent: Constituent) -> ContourExport {
    let ns = grid.segment_count();
    let nl = grid.layer_count();
    let mut segs: Vec<usize> = (0..ns).collect();
    segs.sort_by(|&a, &b| grid.distance_from_dam(a).total_cmp(&grid.distance_from_dam(b)));
    let mut layers: Vec<usize> = (0..nl).collect();
    layers.sort_by(|&a, &b| grid.layer_center(b).total_cmp(&grid.layer_center(a)));
    let field = &snapshot.field;
    let data = match constituent {
        Constituent::Temperature => &field.temp,
        Constituent::Oxygen => &field.oxygen,
        Constituent::Bod => &field.bod,
    };
    let values = layers
        .iter()
        .map(|&k| {
            segs.iter()
                .map(|&i| {
                    let c = field.index(i, k);
                    (field.volume[c] > 0.0).then(|| data[c])
                })
                .collect()
        })
        .collect();
    ContourExport {
        constituent,
        day: snapshot.day,
        distance_m: segs.iter().map(|&i| grid.distance_from_dam(i)).collect(),
        elevation_m: layers.iter().map(|&k| grid.layer_center(k)).collect(),
        values,
    }
}

impl ContourExport {
    /// First row holds the distances, first column the elevations.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let head: Vec<String> = self.distance_m.iter().map(f64::to_string).collect();
        writeln!(w, "elevation_m,{}", head.join(","))?;
        for (e, row) in self.elevation_m.iter().zip(&self.values) {
            let cells: Vec<String> = row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()).collect();
            writeln!(w, "{e},{}", cells.join(","))?;
        }
        w.flush()
    }

    pub fn file_name(&self, run: &str) -> String {
        format!("contour_{run}_{}_day{}.csv", self.constituent.name(), self.day)
    }
}
