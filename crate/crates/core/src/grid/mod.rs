//! Regular lon/lat lattices, land/ocean masks and gridded series.
//!
//! Cells are addressed by a flat index `ilat * nlon + ilon`, so the natural
//! ordering of [`Cell`] is lexicographic in (lat-index, lon-index). Every
//! deterministic ordering in the crate relies on that.

mod concentration;
pub(crate) mod field;
mod locate;
mod senders;

pub use concentration::{load_concentration, write_concentration, ConcentrationSeries, Period};
pub use field::{load_mask, load_vector_field, write_mask, write_vector_field, VectorFieldSeries};
pub use locate::{nearest_ocean_cell, CellLocator};
pub use senders::{select_senders, shoreline_buffer_mean, SenderConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractional-index tolerance for treating a coordinate as a cell center.
const CENTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell(pub u32);

impl Cell {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Longitude of the first cell center, degrees.
    pub lon0: f64,
    /// Latitude of the first cell center, degrees.
    pub lat0: f64,
    #[serde(default = "default_res")]
    pub dlon: f64,
    #[serde(default = "default_res")]
    pub dlat: f64,
    pub nlon: usize,
    pub nlat: usize,
    #[serde(default = "default_lat_min")]
    pub lat_min: f64,
    #[serde(default = "default_lat_max")]
    pub lat_max: f64,
}

fn default_res() -> f64 {
    0.25
}
fn default_lat_min() -> f64 {
    -37.0
}
fn default_lat_max() -> f64 {
    37.0
}

impl GridSpec {
    pub fn new(
        lon0: f64,
        lat0: f64,
        dlon: f64,
        dlat: f64,
        nlon: usize,
        nlat: usize,
    ) -> Result<Self> {
        let spec = GridSpec {
            lon0,
            lat0,
            dlon,
            dlat,
            nlon,
            nlat,
            lat_min: default_lat_min(),
            lat_max: default_lat_max(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_lat_band(mut self, lat_min: f64, lat_max: f64) -> Result<Self> {
        self.lat_min = lat_min;
        self.lat_max = lat_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dlon > 0.0 && self.dlat > 0.0) {
            return Err(Error::Grid(format!(
                "cell sizes must be positive (dlon={}, dlat={})",
                self.dlon, self.dlat
            )));
        }
        if self.nlon == 0 || self.nlat == 0 {
            return Err(Error::Grid("grid must contain at least one cell".into()));
        }
        if self.nlon * self.nlat > u32::MAX as usize {
            return Err(Error::Grid("grid too large".into()));
        }
        let top = self.lat0 + (self.nlat - 1) as f64 * self.dlat;
        if self.lat0 < self.lat_min - 1e-9 || top > self.lat_max + 1e-9 {
            return Err(Error::Grid(format!(
                "cell centers span latitudes [{}, {}] outside the coverage band [{}, {}]",
                self.lat0, top, self.lat_min, self.lat_max
            )));
        }
        if self.lat_min < -90.0 || self.lat_max > 90.0 {
            return Err(Error::Grid("coverage band exceeds the poles".into()));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.nlon * self.nlat
    }

    pub fn cell(&self, ilon: usize, ilat: usize) -> Cell {
        debug_assert!(ilon < self.nlon && ilat < self.nlat);
        Cell((ilat * self.nlon + ilon) as u32)
    }

    /// (ilon, ilat) of a cell.
    pub fn indices(&self, cell: Cell) -> (usize, usize) {
        let i = cell.index();
        (i % self.nlon, i / self.nlon)
    }

    pub fn lon_of(&self, ilon: usize) -> f64 {
        self.lon0 + ilon as f64 * self.dlon
    }

    pub fn lat_of(&self, ilat: usize) -> f64 {
        self.lat0 + ilat as f64 * self.dlat
    }

    /// (lon, lat) of a cell center.
    pub fn center(&self, cell: Cell) -> (f64, f64) {
        let (ilon, ilat) = self.indices(cell);
        (self.lon_of(ilon), self.lat_of(ilat))
    }

    /// Fractional (lon, lat) index of a position.
    pub fn fractional(&self, lon: f64, lat: f64) -> (f64, f64) {
        ((lon - self.lon0) / self.dlon, (lat - self.lat0) / self.dlat)
    }

    /// Maps a coordinate that must sit on a cell center to its cell.
    pub fn locate_center(&self, lon: f64, lat: f64) -> std::result::Result<Cell, String> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(format!("latitude out of range: {lat}"));
        }
        if !lon.is_finite() || !(-360.0..=360.0).contains(&lon) {
            return Err(format!("longitude out of range: {lon}"));
        }
        if lat < self.lat_min - 1e-9 || lat > self.lat_max + 1e-9 {
            return Err(format!(
                "latitude out of range: {lat} outside coverage band"
            ));
        }
        let (fx, fy) = self.fractional(lon, lat);
        let (ix, iy) = (fx.round(), fy.round());
        if iy < 0.0 || iy >= self.nlat as f64 {
            return Err(format!("latitude out of range: {lat} outside grid"));
        }
        if ix < 0.0 || ix >= self.nlon as f64 {
            return Err(format!("longitude out of range: {lon} outside grid"));
        }
        if (fx - ix).abs() > CENTER_TOL || (fy - iy).abs() > CENTER_TOL {
            return Err(format!("coordinate ({lon}, {lat}) is not a cell center"));
        }
        Ok(self.cell(ix as usize, iy as usize))
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        (0..self.n_cells() as u32).map(Cell)
    }
}

/// Per-cell ocean flag on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    spec: GridSpec,
    ocean: Vec<bool>,
}

impl Mask {
    pub fn new(spec: GridSpec, ocean: Vec<bool>) -> Result<Self> {
        if ocean.len() != spec.n_cells() {
            return Err(Error::Grid(format!(
                "mask has {} cells, grid has {}",
                ocean.len(),
                spec.n_cells()
            )));
        }
        Ok(Mask { spec, ocean })
    }

    pub fn all_ocean(spec: GridSpec) -> Self {
        Mask {
            spec,
            ocean: vec![true; spec.n_cells()],
        }
    }

    pub fn from_fn(spec: GridSpec, mut is_ocean: impl FnMut(usize, usize) -> bool) -> Self {
        let mut ocean = Vec::with_capacity(spec.n_cells());
        for ilat in 0..spec.nlat {
            for ilon in 0..spec.nlon {
                ocean.push(is_ocean(ilon, ilat));
            }
        }
        Mask { spec, ocean }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn is_ocean(&self, cell: Cell) -> bool {
        self.ocean[cell.index()]
    }

    pub fn is_ocean_at(&self, ilon: usize, ilat: usize) -> bool {
        self.ocean[ilat * self.spec.nlon + ilon]
    }

    pub fn ocean_cells(&self) -> Vec<Cell> {
        self.spec.cells().filter(|&c| self.is_ocean(c)).collect()
    }

    pub fn land_cells(&self) -> Vec<Cell> {
        self.spec.cells().filter(|&c| !self.is_ocean(c)).collect()
    }

    pub fn n_ocean(&self) -> usize {
        self.ocean.iter().filter(|&&o| o).count()
    }

    /// Ocean cells with at least one land cell among their eight neighbours.
    pub fn coastal_cells(&self) -> Vec<Cell> {
        let s = &self.spec;
        self.ocean_cells()
            .into_iter()
            .filter(|&c| {
                let (ilon, ilat) = s.indices(c);
                (-1i64..=1).any(|dy| {
                    (-1i64..=1).any(|dx| {
                        let (x, y) = (ilon as i64 + dx, ilat as i64 + dy);
                        (dx, dy) != (0, 0)
                            && x >= 0
                            && y >= 0
                            && (x as usize) < s.nlon
                            && (y as usize) < s.nlat
                            && !self.is_ocean_at(x as usize, y as usize)
                    })
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_order_is_lat_major() {
        let s = GridSpec::new(0.0, 0.0, 0.25, 0.25, 4, 3).unwrap();
        assert!(s.cell(3, 0) < s.cell(0, 1));
        assert_eq!(s.indices(s.cell(2, 1)), (2, 1));
        assert_eq!(s.center(s.cell(2, 1)), (0.5, 0.25));
    }

    #[test]
    fn locate_rejects_bad_latitude() {
        let s = GridSpec::new(0.0, 0.0, 0.25, 0.25, 4, 3).unwrap();
        let err = s.locate_center(0.0, 95.0).unwrap_err();
        assert!(err.contains("latitude out of range"), "{err}");
        assert!(s
            .locate_center(0.1, 0.0)
            .unwrap_err()
            .contains("not a cell center"));
        assert_eq!(s.locate_center(0.75, 0.5).unwrap(), s.cell(3, 2));
    }

    #[test]
    fn spec_invariants() {
        assert!(GridSpec::new(0.0, 0.0, 0.0, 0.25, 4, 3).is_err());
        assert!(GridSpec::new(0.0, 0.0, 0.25, 0.25, 0, 3).is_err());
        assert!(GridSpec::new(0.0, 36.0, 0.25, 0.25, 4, 8).is_err());
    }

    #[test]
    fn coastal_cells_touch_land() {
        let s = GridSpec::new(0.0, 0.0, 1.0, 1.0, 4, 4).unwrap();
        let m = Mask::from_fn(s, |ilon, _| ilon > 0);
        let coast: Vec<_> = m.coastal_cells().iter().map(|&c| s.indices(c)).collect();
        assert_eq!(coast, vec![(1, 0), (1, 1), (1, 2), (1, 3)]);
    }
}
