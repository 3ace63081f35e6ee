//! One segment's wet cells as a vertical ladder for the column-local processes.

use crate::grid::Grid;
use crate::hydro::{water_density, CellField, Constituent, HydroError};

/// Wet part of a segment, top cell first. A surface layer less than half wet
/// is merged with the layer below into one computational cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub temp: Vec<f64>,
    pub oxygen: Vec<f64>,
    pub bod: Vec<f64>,
    pub volume: Vec<f64>,
    /// Wet thickness of each cell, m.
    pub thickness: Vec<f64>,
    /// Elevation of each cell's midpoint, m.
    pub center_elevation: Vec<f64>,
    /// Exchange area between cell j and j + 1 (length `len() - 1`).
    pub interface_area: Vec<f64>,
    /// Sediment contact area of each cell.
    pub bed_area: Vec<f64>,
    pub surface_area: f64,
    pub surface_elevation: f64,
}

/// Layers of the source segment covered by each computational cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub segment: usize,
    /// Inclusive layer range per cell.
    pub cells: Vec<(usize, usize)>,
}

impl Column {
    /// Prismatic test column from per-cell thicknesses and plan areas, top first.
    pub fn from_layers(
        thickness: &[f64],
        area: &[f64],
        surface_elevation: f64,
        temp: Vec<f64>,
        oxygen: Vec<f64>,
        bod: Vec<f64>,
    ) -> Self {
        let n = thickness.len();
        let mut center = Vec::with_capacity(n);
        let mut top = surface_elevation;
        for h in thickness {
            center.push(top - 0.5 * h);
            top -= h;
        }
        let bed_area = (0..n)
            .map(|j| if j + 1 < n { area[j] - area[j + 1] } else { area[j] })
            .collect();
        Self {
            temp,
            oxygen,
            bod,
            volume: thickness.iter().zip(area).map(|(h, a)| h * a).collect(),
            thickness: thickness.to_vec(),
            center_elevation: center,
            interface_area: area.iter().skip(1).copied().collect(),
            bed_area,
            surface_area: area.first().copied().unwrap_or(0.0),
            surface_elevation,
        }
    }

    pub fn len(&self) -> usize {
        self.volume.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume.is_empty()
    }

    pub fn depth(&self) -> f64 {
        self.thickness.iter().sum()
    }

    /// Depth of the top face of cell `j` below the surface.
    pub fn depth_to_top(&self, j: usize) -> f64 {
        self.thickness[..j].iter().sum()
    }

    pub fn values(&self, c: Constituent) -> &[f64] {
        match c {
            Constituent::Temperature => &self.temp,
            Constituent::Oxygen => &self.oxygen,
            Constituent::Bod => &self.bod,
        }
    }

    pub fn values_mut(&mut self, c: Constituent) -> &mut Vec<f64> {
        match c {
            Constituent::Temperature => &mut self.temp,
            Constituent::Oxygen => &mut self.oxygen,
            Constituent::Bod => &mut self.bod,
        }
    }

    /// Sum of value x volume.
    pub fn content(&self, c: Constituent) -> f64 {
        self.values(c)
            .iter()
            .zip(&self.volume)
            .map(|(x, v)| x * v)
            .sum()
    }

    pub fn densities(&self) -> Result<Vec<f64>, HydroError> {
        self.temp.iter().map(|&t| water_density(t)).collect()
    }

    /// Cut the wet column of `segment` out of the field.
    pub fn extract(field: &CellField, grid: &Grid, segment: usize, e: f64) -> Option<(Column, ColumnMap)> {
        let nl = grid.layer_count();
        let wet = |k: usize| field.volume[field.index(segment, k)] > 0.0;
        let top = (0..nl).find(|&k| wet(k))?;
        let bottom = (top..nl).take_while(|&k| wet(k)).last()?;
        let mut cells = Vec::with_capacity(bottom - top + 1);
        // thin top layers join the first layer that is at least half wet
        let mut last = top;
        let mut h = grid.wet_thickness(top, e);
        while last < bottom && h < 0.5 * grid.thickness(last) {
            last += 1;
            h += grid.wet_thickness(last, e);
        }
        cells.push((top, last));
        let mut k = cells[0].1 + 1;
        while k <= bottom {
            cells.push((k, k));
            k += 1;
        }

        let len = grid.length(segment);
        let n = cells.len();
        let mut col = Column {
            temp: Vec::with_capacity(n),
            oxygen: Vec::with_capacity(n),
            bod: Vec::with_capacity(n),
            volume: Vec::with_capacity(n),
            thickness: Vec::with_capacity(n),
            center_elevation: Vec::with_capacity(n),
            interface_area: Vec::with_capacity(n.saturating_sub(1)),
            bed_area: Vec::with_capacity(n),
            surface_area: len * grid.width(segment, top),
            surface_elevation: e,
        };
        for (j, &(a, b)) in cells.iter().enumerate() {
            let ia = field.index(segment, a);
            let mut v = field.volume[ia];
            let mut x = [field.temp[ia], field.oxygen[ia], field.bod[ia]];
            let mut h = grid.wet_thickness(a, e);
            let mut bed = grid.cell_bed_area(segment, a);
            for k in a + 1..=b {
                let ik = field.index(segment, k);
                let vk = field.volume[ik];
                let y = [field.temp[ik], field.oxygen[ik], field.bod[ik]];
                for c in 0..3 {
                    x[c] += vk * (y[c] - x[c]) / (v + vk);
                }
                v += vk;
                h += grid.wet_thickness(k, e);
                bed += grid.cell_bed_area(segment, k);
            }
            col.temp.push(x[0]);
            col.oxygen.push(x[1]);
            col.bod.push(x[2]);
            col.volume.push(v);
            col.thickness.push(h);
            col.center_elevation.push(if j == 0 {
                e.min(grid.layer_top(a)) - 0.5 * h
            } else {
                grid.layer_center(a)
            });
            if j > 0 {
                col.interface_area.push(grid.cell_plan_area(segment, a));
            }
            col.bed_area.push(bed);
        }
        Some((
            col,
            ColumnMap {
                segment,
                cells,
            },
        ))
    }

    /// Write concentrations back to every layer of the source segment.
    pub fn write_back(&self, field: &mut CellField, map: &ColumnMap) {
        for (j, &(a, b)) in map.cells.iter().enumerate() {
            for k in a..=b {
                let i = field.index(map.segment, k);
                field.temp[i] = self.temp[j];
                field.oxygen[i] = self.oxygen[j];
                field.bod[i] = self.bod[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::uniform(vec![(1, 100.0, vec![20.0, 10.0, 5.0])], 3, 1.0, 0.0).unwrap()
    }

    #[test]
    fn full_column_maps_one_to_one() {
        let g = grid();
        let f = CellField::uniform(&g, 3.0, 10.0, 8.0, 1.0);
        let (c, m) = Column::extract(&f, &g, 0, 3.0).unwrap();
        assert_eq!(m.cells, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(c.volume, vec![2000.0, 1000.0, 500.0]);
        assert_eq!(c.interface_area, vec![1000.0, 500.0]);
        assert_eq!(c.bed_area, vec![1000.0, 500.0, 500.0]);
        assert_eq!(c.center_elevation, vec![2.5, 1.5, 0.5]);
    }

    #[test]
    fn thin_surface_layer_is_merged() {
        let g = grid();
        let mut f = CellField::uniform(&g, 2.2, 10.0, 8.0, 1.0);
        f.temp[0] = 20.0;
        let (c, m) = Column::extract(&f, &g, 0, 2.2).unwrap();
        assert_eq!(m.cells, vec![(0, 1), (2, 2)]);
        // 400 m3 at 20 and 1000 m3 at 10
        assert!((c.temp[0] - (20.0 * 400.0 + 10.0 * 1000.0) / 1400.0).abs() < 1e-12);
        assert!((c.thickness[0] - 1.2).abs() < 1e-12);
        assert!((c.center_elevation[0] - 1.6).abs() < 1e-12);
        let mut f2 = f.clone();
        c.write_back(&mut f2, &m);
        assert_eq!(f2.temp[0], f2.temp[1]);
        let heat = |f: &CellField| f.content(Constituent::Temperature);
        assert!((heat(&f) - heat(&f2)).abs() < 1e-9);
    }

    #[test]
    fn dry_segment_has_no_column() {
        let g = grid();
        let mut f = CellField::uniform(&g, 3.0, 10.0, 8.0, 1.0);
        f.volume.iter_mut().for_each(|v| *v = 0.0);
        assert!(Column::extract(&f, &g, 0, 3.0).is_none());
    }
}
