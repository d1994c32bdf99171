use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a daily displacement in metres is converted to degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvectMetric {
    /// Both axes divided by the length of one degree of longitude at the
    /// current latitude.
    #[default]
    Faithful,
    /// Longitude by the parallel length, latitude by the meridian length.
    Spherical,
}

impl FromStr for AdvectMetric {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "faithful" => Ok(AdvectMetric::Faithful),
            "spherical" => Ok(AdvectMetric::Spherical),
            other => Err(format!(
                "advect metric must be `faithful` or `spherical`, got `{other}`"
            )),
        }
    }
}

impl fmt::Display for AdvectMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdvectMetric::Faithful => "faithful",
            AdvectMetric::Spherical => "spherical",
        })
    }
}

/// Decay coefficients and search-radius schedule for streamline scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportParams {
    /// Weight on the search radius.
    pub alpha: f64,
    /// Weight on the perpendicular offset from the current direction.
    pub beta: f64,
    /// Weight on the distance from the streamline position.
    pub gamma: f64,
    /// Search radius at step 0, degrees.
    pub rad0: f64,
    /// Radius growth per step, degrees.
    pub rad_step: f64,
    pub max_steps: usize,
    /// Largest admissible angle between the current and the receiver direction, radians.
    pub theta_cutoff: f64,
    pub advect_metric: AdvectMetric,
}

impl Default for TransportParams {
    fn default() -> Self {
        TransportParams {
            alpha: 0.8,
            beta: 0.49,
            gamma: 0.23,
            rad0: 1.0,
            rad_step: 0.05,
            max_steps: 90,
            theta_cutoff: 0.4,
            advect_metric: AdvectMetric::Faithful,
        }
    }
}

impl TransportParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("rad0", self.rad0),
            ("rad_step", self.rad_step),
            ("theta_cutoff", self.theta_cutoff),
        ];
        if let Some((name, v)) = vals.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Param(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Param("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Search radius at step `t`.
    pub fn radius(&self, t: usize) -> f64 {
        self.rad0 + t as f64 * self.rad_step
    }
}
