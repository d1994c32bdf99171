//! Seeded generators for currents, concentrations and birth panels with a
//! known data-generating process.
//!
//! Every piece draws from its own stream of one seed (see [`SynthRng`]), so
//! a fixed seed reproduces the bundle byte for byte.

mod births;
mod fields;
mod passthrough;
mod rng;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use births::{
    admin1_name, country_name, gen_birth_panel, gen_trade, BirthConfig, BirthPanel, Truth,
};
pub use fields::{
    gen_aerosol, gen_current_field, gen_evaporation, gen_mask, gen_mp, gen_mp_field, AerosolConfig,
    FieldConfig, FieldKind, SeriesConfig,
};
pub use passthrough::{gen_passthrough, PassthroughConfig};
pub use rng::SynthRng;

use crate::error::{Error, Result};
use crate::exposure::{local_series, Births, Provenance, TradeFlow};
use crate::grid::{Cell, ConcentrationSeries, GridSpec, Mask, VectorFieldSeries};
use crate::time::YearMonth;
use crate::transport::{RunPeriod, ScoreMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub seed: u64,
    /// Land columns on the western edge of the grid.
    pub coast_width: usize,
    pub field: FieldConfig,
    pub mp: SeriesConfig,
    pub evaporation: SeriesConfig,
    pub aerosol: AerosolConfig,
    pub births: BirthConfig,
    /// Mixing of transported concentration into receivers; off when kappa is 0.
    pub passthrough: PassthroughConfig,
    pub n_exporters: usize,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            seed: 0,
            coast_width: 2,
            field: FieldConfig::default(),
            mp: SeriesConfig::default(),
            evaporation: SeriesConfig {
                rho: 0.6,
                sigma: 0.3,
                mean_log: 1.0,
            },
            aerosol: AerosolConfig::default(),
            births: BirthConfig::default(),
            passthrough: PassthroughConfig {
                kappa: 0.0,
                ..Default::default()
            },
            n_exporters: 3,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        self.field.validate()?;
        self.mp.validate("mp")?;
        self.evaporation.validate("evaporation")?;
        self.births.validate()?;
        if self.coast_width == 0 || self.coast_width >= spec.nlon {
            return Err(Error::Param(format!(
                "coast_width must be in 1..{} for a {}-column grid",
                spec.nlon, spec.nlon
            )));
        }
        Ok(())
    }
}

/// Everything one synthetic run reads.
#[derive(Debug, Clone)]
pub struct SynthBundle {
    pub mask: Mask,
    pub field: VectorFieldSeries,
    pub mp: ConcentrationSeries,
    pub evaporation: ConcentrationSeries,
    pub aod: ConcentrationSeries,
    pub births: Births,
    pub truth: Truth,
    pub clamped: usize,
    pub trade: Vec<TradeFlow>,
    pub shorelines: BTreeMap<String, Vec<Cell>>,
}

/// Months touched by the period.
pub fn period_months(period: &RunPeriod) -> (YearMonth, YearMonth) {
    (YearMonth::of(period.start), YearMonth::of(period.end))
}

pub fn gen_field_and_mask(
    spec: GridSpec,
    cfg: &DgpConfig,
    period: &RunPeriod,
) -> Result<(Mask, VectorFieldSeries)> {
    cfg.validate(&spec)?;
    let mask = gen_mask(spec, cfg.coast_width);
    let field = gen_current_field(&mask, &cfg.field, period.start, period.n_days(), cfg.seed)?;
    Ok((mask, field))
}

/// Generates the bundle. With a positive `passthrough.kappa`, `matrix` must
/// be the score matrix of `field`; receiver concentrations then carry the
/// transported mixture before births are drawn.
pub fn gen_bundle(
    mask: Mask,
    field: VectorFieldSeries,
    cfg: &DgpConfig,
    period: &RunPeriod,
    matrix: Option<&ScoreMatrix>,
) -> Result<SynthBundle> {
    let (first, last) = period_months(period);
    let n_months = last.months_since(first) as usize + 1;
    let mut mp = gen_mp(&mask, &cfg.mp, first, n_months, cfg.seed)?;
    if cfg.passthrough.kappa > 0.0 {
        let m =
            matrix.ok_or_else(|| Error::Param("passthrough mixing needs a score matrix".into()))?;
        mp = gen_passthrough(&mp, m, &cfg.passthrough, cfg.seed)?;
    }
    let evaporation = gen_evaporation(&mask, &cfg.evaporation, first, n_months, cfg.seed)?;
    let aod = gen_aerosol(&mp, &evaporation, &cfg.aerosol, cfg.seed)?;
    let local: BTreeMap<Cell, _> = mask
        .ocean_cells()
        .into_iter()
        .map(|c| (c, local_series(&mp, c)))
        .collect();
    let panel = gen_birth_panel(
        &mask,
        (Provenance::Local, &local),
        &cfg.births,
        (first, last),
        cfg.seed,
    )?;
    let (trade, shorelines) = gen_trade(
        &mask,
        cfg.births.n_admin1,
        cfg.n_exporters,
        (first, last),
        cfg.seed,
    )?;
    let mut truth = panel.truth;
    truth.push("log_mp_local", cfg.aerosol.b_mp);
    truth.push("log_evaporation", cfg.aerosol.b_evaporation);
    truth.push("log_mp_local_x_log_evaporation", cfg.aerosol.b_interaction);
    Ok(SynthBundle {
        mask,
        field,
        mp,
        evaporation,
        aod,
        births: panel.births,
        truth,
        clamped: panel.clamped,
        trade,
        shorelines,
    })
}
