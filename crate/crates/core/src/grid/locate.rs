//! Exact nearest-cell search by great-circle distance.
//!
//! Cells are bucketed by grid row. Great-circle distance is bounded below by
//! the meridional separation, so rows are visited outward from the query
//! latitude until that bound exceeds the best distance found. Within a row the
//! distance is monotone in the wrapped longitude gap, so only the neighbours
//! of the query position (and the row ends, for wrap-around) are candidates.

use super::{Cell, GridSpec, Mask};
use crate::error::{Error, Result};
use crate::geo::{haversine_km, EARTH_RADIUS_KM};

#[derive(Debug, Clone)]
pub struct CellLocator {
    spec: GridSpec,
    // (ilat, sorted ilons) for every row holding at least one cell
    rows: Vec<(usize, Vec<usize>)>,
}

impl CellLocator {
    pub fn new(spec: GridSpec, cells: &[Cell]) -> Self {
        let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); spec.nlat];
        for &c in cells {
            let (ilon, ilat) = spec.indices(c);
            by_row[ilat].push(ilon);
        }
        let rows = by_row
            .into_iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(ilat, mut r)| {
                r.sort_unstable();
                r.dedup();
                (ilat, r)
            })
            .collect();
        CellLocator { spec, rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Nearest cell and its distance in km. Ties go to the smaller cell index.
    pub fn nearest(&self, lon: f64, lat: f64) -> Option<(Cell, f64)> {
        if self.rows.is_empty() {
            return None;
        }
        let fy = (lat - self.spec.lat0) / self.spec.dlat;
        // first row index whose ilat >= fy
        let split = self.rows.partition_point(|(ilat, _)| (*ilat as f64) < fy);
        let mut below = split.checked_sub(1);
        let mut above = (split < self.rows.len()).then_some(split);
        let mut best: Option<(Cell, f64)> = None;
        loop {
            let lb = |i: usize| {
                let row_lat = self.spec.lat_of(self.rows[i].0);
                EARTH_RADIUS_KM * (row_lat - lat).abs().to_radians() * (1.0 - 1e-12)
            };
            let next = match (below, above) {
                (None, None) => break,
                (Some(b), None) => b,
                (None, Some(a)) => a,
                (Some(b), Some(a)) => {
                    if lb(b) <= lb(a) {
                        b
                    } else {
                        a
                    }
                }
            };
            if let Some((_, d)) = best {
                if lb(next) > d {
                    break;
                }
            }
            self.scan_row(next, lon, lat, &mut best);
            if Some(next) == below {
                below = next.checked_sub(1);
            } else {
                above = (next + 1 < self.rows.len()).then_some(next + 1);
            }
        }
        best
    }

    fn scan_row(&self, row: usize, lon: f64, lat: f64, best: &mut Option<(Cell, f64)>) {
        let (ilat, ref ilons) = self.rows[row];
        let row_lat = self.spec.lat_of(ilat);
        let fx = (lon - self.spec.lon0) / self.spec.dlon;
        let pos = ilons.partition_point(|&i| (i as f64) < fx);
        let mut candidates = [None; 4];
        candidates[0] = pos.checked_sub(1);
        candidates[1] = (pos < ilons.len()).then_some(pos);
        candidates[2] = Some(0);
        candidates[3] = Some(ilons.len() - 1);
        for k in candidates.into_iter().flatten() {
            let ilon = ilons[k];
            let d = haversine_km(lon, lat, self.spec.lon_of(ilon), row_lat);
            let cell = self.spec.cell(ilon, ilat);
            let better = match *best {
                None => true,
                Some((bc, bd)) => d < bd || (d == bd && cell < bc),
            };
            if better {
                *best = Some((cell, d));
            }
        }
    }
}

/// Ocean cell whose center is nearest to (lon, lat) by great-circle distance.
pub fn nearest_ocean_cell(lon: f64, lat: f64, mask: &Mask) -> Result<Cell> {
    CellLocator::new(*mask.spec(), &mask.ocean_cells())
        .nearest(lon, lat)
        .map(|(c, _)| c)
        .ok_or(Error::NoOceanCell)
}
