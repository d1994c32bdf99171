use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::rng::{stream, SynthRng};
use crate::error::{Error, Result};
use crate::geo::KM_PER_DEGREE;
use crate::grid::{ConcentrationSeries, GridSpec, Mask, VectorFieldSeries};
use crate::time::YearMonth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    #[default]
    Uniform,
    Gyre,
    RandomDivfree,
}

impl FromStr for FieldKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(FieldKind::Uniform),
            "gyre" => Ok(FieldKind::Gyre),
            "random_divfree" => Ok(FieldKind::RandomDivfree),
            _ => Err(format!(
                "unknown field kind `{s}`; expected uniform, gyre or random_divfree"
            )),
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Uniform => "uniform",
            FieldKind::Gyre => "gyre",
            FieldKind::RandomDivfree => "random_divfree",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub kind: FieldKind,
    /// Speed in m/s: the uniform speed, the gyre rim speed, or the maximum
    /// speed of the random field.
    pub magnitude: f64,
    /// Uniform flow direction, degrees counterclockwise from east.
    pub direction_deg: f64,
    /// Gyre center; defaults to the center of the middle cell.
    pub center: Option<[f64; 2]>,
    /// Gyre rim radius; defaults to a third of the smaller grid extent.
    pub rim_km: Option<f64>,
    /// Number of Fourier modes in the random stream function.
    pub modes: usize,
    /// Daily speed modulation 1 + pulse·sin(2π d / pulse_period_days).
    pub pulse: f64,
    pub pulse_period_days: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            kind: FieldKind::Uniform,
            magnitude: 0.2,
            direction_deg: 0.0,
            center: None,
            rim_km: None,
            modes: 6,
            pulse: 0.0,
            pulse_period_days: 60.0,
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude.is_finite() && self.magnitude >= 0.0) {
            return Err(Error::Param(format!(
                "field magnitude must be nonnegative, got {}",
                self.magnitude
            )));
        }
        if !(0.0..1.0).contains(&self.pulse) || !(self.pulse_period_days > 0.0) {
            return Err(Error::Param(
                "field pulse must be in [0, 1) with a positive period".into(),
            ));
        }
        if self.kind == FieldKind::RandomDivfree && self.modes == 0 {
            return Err(Error::Param("random field needs at least one mode".into()));
        }
        Ok(())
    }
}

/// Monthly lognormal AR(1) per cell: ln X = mean_log + x with
/// x_m = rho·x_{m-1} + sigma·e_m, started from its stationary law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesConfig {
    pub rho: f64,
    pub sigma: f64,
    pub mean_log: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            rho: 0.5,
            sigma: 1.0,
            mean_log: 0.0,
        }
    }
}

impl SeriesConfig {
    pub fn validate(&self, what: &str) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) || !(self.sigma >= 0.0) || !self.mean_log.is_finite() {
            return Err(Error::Param(format!(
                "{what}: need rho in [0, 1), sigma >= 0 and finite mean_log"
            )));
        }
        Ok(())
    }
}

/// Land on the `coast_width` westernmost columns, ocean elsewhere.
pub fn gen_mask(spec: GridSpec, coast_width: usize) -> Mask {
    Mask::from_fn(spec, |ilon, _| ilon >= coast_width)
}

fn middle(spec: &GridSpec) -> (f64, f64) {
    (spec.lon_of(spec.nlon / 2), spec.lat_of(spec.nlat / 2))
}

/// Steady current on every ocean cell, modulated in speed day by day.
pub fn gen_current_field(
    mask: &Mask,
    cfg: &FieldConfig,
    start: NaiveDate,
    n_days: usize,
    seed: u64,
) -> Result<VectorFieldSeries> {
    cfg.validate()?;
    let spec = *mask.spec();
    let base: Vec<(f64, f64)> = match cfg.kind {
        FieldKind::Uniform => {
            let a = cfg.direction_deg.to_radians();
            vec![(cfg.magnitude * a.cos(), cfg.magnitude * a.sin()); spec.n_cells()]
        }
        FieldKind::Gyre => {
            let (lc, pc) = cfg.center.map_or_else(|| middle(&spec), |c| (c[0], c[1]));
            let extent_km =
                KM_PER_DEGREE * (spec.nlon as f64 * spec.dlon).min(spec.nlat as f64 * spec.dlat);
            let rim = cfg.rim_km.unwrap_or(extent_km / 3.0);
            spec.cells()
                .map(|c| {
                    let (lon, lat) = spec.center(c);
                    let dx = (lon - lc) * KM_PER_DEGREE * pc.to_radians().cos();
                    let dy = (lat - pc) * KM_PER_DEGREE;
                    let r = dx.hypot(dy);
                    if r == 0.0 {
                        return (0.0, 0.0);
                    }
                    let s = if r <= rim {
                        cfg.magnitude * r / rim
                    } else {
                        cfg.magnitude * rim / r
                    };
                    (-s * dy / r, s * dx / r)
                })
                .collect()
        }
        FieldKind::RandomDivfree => divfree(mask, cfg, seed),
    };
    VectorFieldSeries::from_fn(mask.clone(), start, n_days, |d, lon, lat| {
        let c = spec.locate_center(lon, lat).expect("cell center");
        let f = 1.0 + cfg.pulse * (std::f64::consts::TAU * d as f64 / cfg.pulse_period_days).sin();
        let (u, v) = base[c.index()];
        (u * f, v * f)
    })
}

/// Central differences of a random stream function on index coordinates,
/// scaled so the fastest ocean cell moves at the configured magnitude.
fn divfree(mask: &Mask, cfg: &FieldConfig, seed: u64) -> Vec<(f64, f64)> {
    let spec = mask.spec();
    let mut rng = SynthRng::new(seed, stream::FIELD);
    let modes: Vec<(f64, f64, f64, f64)> = (0..cfg.modes)
        .map(|_| {
            let a = rng.below(3) as f64 + 1.0;
            let b = rng.below(5) as f64 - 2.0;
            (rng.normal(), a, b, rng.range(0.0, std::f64::consts::TAU))
        })
        .collect();
    let (nx, ny) = (spec.nlon as f64, spec.nlat as f64);
    let psi = |i: f64, j: f64| -> f64 {
        modes
            .iter()
            .map(|&(amp, a, b, ph)| {
                amp * (std::f64::consts::TAU * (a * i / nx + b * j / ny) + ph).sin()
            })
            .sum()
    };
    let raw: Vec<(f64, f64)> = spec
        .cells()
        .map(|c| {
            let (i, j) = spec.indices(c);
            let (i, j) = (i as f64, j as f64);
            (
                -(psi(i, j + 1.0) - psi(i, j - 1.0)) / 2.0,
                (psi(i + 1.0, j) - psi(i - 1.0, j)) / 2.0,
            )
        })
        .collect();
    let top = spec
        .cells()
        .filter(|&c| mask.is_ocean(c))
        .map(|c| raw[c.index()].0.hypot(raw[c.index()].1))
        .fold(0.0, f64::max);
    let k = if top > 0.0 { cfg.magnitude / top } else { 0.0 };
    raw.into_iter().map(|(u, v)| (u * k, v * k)).collect()
}

/// Monthly lognormal AR(1) concentrations on ocean cells.
pub fn gen_mp_field(
    mask: &Mask,
    cfg: &SeriesConfig,
    first: YearMonth,
    n_months: usize,
    seed: u64,
    stream_id: u64,
) -> Result<ConcentrationSeries> {
    cfg.validate("concentration")?;
    let spec = *mask.spec();
    let mut rng = SynthRng::new(seed, stream_id);
    let sd0 = cfg.sigma / (1.0 - cfg.rho * cfg.rho).sqrt();
    let mut logs = vec![0.0; spec.n_cells() * n_months];
    for c in spec.cells().filter(|&c| mask.is_ocean(c)) {
        let mut x = sd0 * rng.normal();
        for m in 0..n_months {
            if m > 0 {
                x = cfg.rho * x + cfg.sigma * rng.normal();
            }
            logs[m * spec.n_cells() + c.index()] = x;
        }
    }
    ConcentrationSeries::monthly_from_fn(mask.clone(), first, n_months, |m, c| {
        Some((cfg.mean_log + logs[m * spec.n_cells() + c.index()]).exp())
    })
}

pub fn gen_mp(
    mask: &Mask,
    cfg: &SeriesConfig,
    first: YearMonth,
    n_months: usize,
    seed: u64,
) -> Result<ConcentrationSeries> {
    gen_mp_field(mask, cfg, first, n_months, seed, stream::MP)
}

pub fn gen_evaporation(
    mask: &Mask,
    cfg: &SeriesConfig,
    first: YearMonth,
    n_months: usize,
    seed: u64,
) -> Result<ConcentrationSeries> {
    gen_mp_field(mask, cfg, first, n_months, seed, stream::EVAPORATION)
}

/// ln AOD = intercept + b_mp·ln MP + b_evap·ln E + b_x·ln MP·ln E + sigma·e.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AerosolConfig {
    pub intercept: f64,
    pub b_mp: f64,
    pub b_evaporation: f64,
    pub b_interaction: f64,
    pub sigma: f64,
}

impl Default for AerosolConfig {
    fn default() -> Self {
        AerosolConfig {
            intercept: -1.5,
            b_mp: 0.02,
            b_evaporation: 0.05,
            b_interaction: 0.01,
            sigma: 0.05,
        }
    }
}

pub fn gen_aerosol(
    mp: &ConcentrationSeries,
    evaporation: &ConcentrationSeries,
    cfg: &AerosolConfig,
    seed: u64,
) -> Result<ConcentrationSeries> {
    if mp.periods() != evaporation.periods() {
        return Err(Error::Param(
            "aerosol inputs cover different periods".into(),
        ));
    }
    let mut rng = SynthRng::new(seed, stream::AEROSOL);
    let mask = mp.mask().clone();
    let spec = *mask.spec();
    let n = mp.periods().len();
    let mut vals = vec![None; n * spec.n_cells()];
    for p in 0..n {
        for c in spec.cells() {
            if let (Some(m), Some(e)) = (mp.value(p, c), evaporation.value(p, c)) {
                let (lm, le) = (m.ln(), e.ln());
                let l = cfg.intercept
                    + cfg.b_mp * lm
                    + cfg.b_evaporation * le
                    + cfg.b_interaction * lm * le
                    + cfg.sigma * rng.normal();
                vals[p * spec.n_cells() + c.index()] = Some(l.exp());
            }
        }
    }
    ConcentrationSeries::new(mask, mp.periods().to_vec(), vals)
}
