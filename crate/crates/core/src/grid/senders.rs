use serde::{Deserialize, Serialize};

use super::{Cell, CellLocator, ConcentrationSeries, GridSpec, Mask};
use crate::error::{Error, Result};
use crate::geo::KM_PER_DEGREE_EQUATOR;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SenderConfig {
    /// Minimum great-circle distance from a sender to the nearest land cell.
    #[serde(default = "default_buffer")]
    pub buffer_km: f64,
    /// Lattice pitch along the equator.
    #[serde(default = "default_spacing")]
    pub spacing_km: f64,
}

fn default_buffer() -> f64 {
    200.0
}
fn default_spacing() -> f64 {
    250.0
}

impl Default for SenderConfig {
    fn default() -> Self {
        SenderConfig {
            buffer_km: default_buffer(),
            spacing_km: default_spacing(),
        }
    }
}

impl SenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.buffer_km >= 0.0) || !(self.spacing_km > 0.0) {
            return Err(Error::Param(format!(
                "sender config needs buffer_km >= 0 and spacing_km > 0 (got {}, {})",
                self.buffer_km, self.spacing_km
            )));
        }
        Ok(())
    }

    /// Lattice pitch in degrees.
    pub fn res(&self) -> f64 {
        self.spacing_km / KM_PER_DEGREE_EQUATOR
    }
}

/// Lattice coordinates along one axis snapped to cell indices.
fn lattice_axis(step: f64, n: usize, res: f64) -> Vec<usize> {
    let extent = (n - 1) as f64 * step;
    let count = (extent / res + 1e-9).floor() as usize + 1;
    let mut out: Vec<usize> = (0..count)
        .map(|k| ((k as f64 * res) / step).round() as usize)
        .filter(|&i| i < n)
        .collect();
    out.dedup();
    out
}

/// Ocean cells on the `res`-pitch lattice that are at least `buffer_km`
/// from every land cell, in cell order.
pub fn select_senders(mask: &Mask, cfg: &SenderConfig) -> Result<Vec<Cell>> {
    cfg.validate()?;
    let spec = mask.spec();
    let res = cfg.res();
    let xs = lattice_axis(spec.dlon, spec.nlon, res);
    let ys = lattice_axis(spec.dlat, spec.nlat, res);
    let land = CellLocator::new(*spec, &mask.land_cells());
    let mut senders = Vec::new();
    let mut rejected = 0usize;
    for &ilat in &ys {
        let lat = spec.lat_of(ilat);
        if lat < spec.lat_min || lat > spec.lat_max {
            continue;
        }
        for &ilon in &xs {
            let cell = spec.cell(ilon, ilat);
            if !mask.is_ocean(cell) {
                continue;
            }
            let far_enough = match land.nearest(spec.lon_of(ilon), lat) {
                None => true,
                Some((_, d)) => d >= cfg.buffer_km,
            };
            if far_enough {
                senders.push(cell);
            } else {
                rejected += 1;
            }
        }
    }
    if senders.is_empty() {
        log::warn!("select_senders: no sender qualifies ({rejected} lattice ocean cells within {} km of land)", cfg.buffer_km);
    } else {
        log::info!(
            "select_senders: {} senders, {rejected} rejected by buffer",
            senders.len()
        );
    }
    Ok(senders)
}

/// Per-period mean concentration over ocean cells within `buffer_km` of
/// any of `shoreline` cells. Periods with no usable cell are missing.
pub fn shoreline_buffer_mean(
    series: &ConcentrationSeries,
    shoreline: &[Cell],
    buffer_km: f64,
) -> Result<Vec<Option<f64>>> {
    if shoreline.is_empty() {
        return Err(Error::Param("country has no shoreline cells".into()));
    }
    let spec: &GridSpec = series.spec();
    let shore = CellLocator::new(*spec, shoreline);
    let in_buffer: Vec<Cell> = series
        .mask()
        .ocean_cells()
        .into_iter()
        .filter(|&c| {
            let (lon, lat) = spec.center(c);
            shore.nearest(lon, lat).is_some_and(|(_, d)| d <= buffer_km)
        })
        .collect();
    Ok((0..series.periods().len())
        .map(|p| {
            let (sum, n) = in_buffer
                .iter()
                .filter_map(|&c| series.value(p, c))
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            (n > 0).then(|| sum / n as f64)
        })
        .collect())
}
