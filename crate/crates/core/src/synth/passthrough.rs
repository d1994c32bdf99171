use serde::{Deserialize, Serialize};

use super::rng::{stream, SynthRng};
use crate::error::{Error, Result};
use crate::grid::ConcentrationSeries;
use crate::transport::ScoreMatrix;

/// Receiver concentration = own background + kappa · Σ_s score · sender
/// concentration, times lognormal noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassthroughConfig {
    pub kappa: f64,
    pub noise_sd: f64,
}

impl Default for PassthroughConfig {
    fn default() -> Self {
        PassthroughConfig {
            kappa: 1.0,
            noise_sd: 0.05,
        }
    }
}

/// Replaces receiver values in the matrix months by the transported mixture.
/// Other cells and months are unchanged.
pub fn gen_passthrough(
    mp: &ConcentrationSeries,
    matrix: &ScoreMatrix,
    cfg: &PassthroughConfig,
    seed: u64,
) -> Result<ConcentrationSeries> {
    if !(cfg.kappa >= 0.0 && cfg.noise_sd >= 0.0) {
        return Err(Error::Param(
            "passthrough needs kappa >= 0 and noise_sd >= 0".into(),
        ));
    }
    let spec = *mp.spec();
    let n = spec.n_cells();
    let mut values: Vec<Option<f64>> = (0..mp.periods().len())
        .flat_map(|p| spec.cells().map(move |c| (p, c)))
        .map(|(p, c)| mp.value(p, c))
        .collect();
    let months = matrix.months();
    let mut inflow = vec![0.0; months.len() * n];
    for ((s, r), scores) in matrix.pairs() {
        for (k, (&m, &score)) in months.iter().zip(scores).enumerate() {
            if let Some(c) = mp.monthly_value(m, s) {
                inflow[k * n + r.index()] += score * c;
            }
        }
    }
    let mut rng = SynthRng::new(seed, stream::PASSTHROUGH);
    let receivers = matrix.receivers();
    for (k, &m) in months.iter().enumerate() {
        let Some(p) = mp.month_index(m) else { continue };
        for &r in &receivers {
            let noise = (cfg.noise_sd * rng.normal()).exp();
            if let Some(v) = values[p * n + r.index()].as_mut() {
                *v = (*v + cfg.kappa * inflow[k * n + r.index()]) * noise;
            }
        }
    }
    ConcentrationSeries::new(mp.mask().clone(), mp.periods().to_vec(), values)
}
