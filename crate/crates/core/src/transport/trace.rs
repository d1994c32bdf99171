use std::fmt;

use chrono::NaiveDate;

use super::interp::{in_ocean_hull, interpolate_current};
use super::score::{score_at, ReceiverIndex, StepScore, TraceState};
use super::{AdvectMetric, TransportParams};
use crate::error::{Error, Result};
use crate::geo::{metres_per_degree_lat, metres_per_degree_lon};
use crate::grid::{Cell, VectorFieldSeries};

const SECONDS_PER_DAY: f64 = 86_400.0;
const POLAR_LIMIT: f64 = 85.0;

/// The position is too close to a pole for the longitude metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarSingularity {
    pub lat: f64,
}

/// Position after one day of drift with current (u, v) in m/s.
pub fn advect(
    lon: f64,
    lat: f64,
    u: f64,
    v: f64,
    metric: AdvectMetric,
) -> Result<(f64, f64), PolarSingularity> {
    if lat.abs() > POLAR_LIMIT {
        return Err(PolarSingularity { lat });
    }
    let dm = metres_per_degree_lon(lat);
    let dlat_m = match metric {
        AdvectMetric::Faithful => dm,
        AdvectMetric::Spherical => metres_per_degree_lat(),
    };
    Ok((
        lon + SECONDS_PER_DAY * u / dm,
        lat + SECONDS_PER_DAY * v / dlat_m,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// All steps were taken.
    MaxSteps,
    /// The next position left the local ocean hull.
    HullExit,
    /// The field has no data for the next day.
    CoverageEnd,
    PolarSingularity,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxSteps => "max_steps",
            StopReason::HullExit => "hull_exit",
            StopReason::CoverageEnd => "coverage_end",
            StopReason::PolarSingularity => "polar_singularity",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub sender: Cell,
    pub start_day: NaiveDate,
    /// One state per scored step.
    pub states: Vec<TraceState>,
    /// Positive scores in (t, receiver) order.
    pub scores: Vec<StepScore>,
    pub stop: StopReason,
}

/// Follows the current from `sender` starting on `start_day`, scoring every
/// receiver inside the growing search disk at each step.
pub fn trace_streamline(
    sender: Cell,
    start_day: NaiveDate,
    field: &VectorFieldSeries,
    receivers: &ReceiverIndex,
    params: &TransportParams,
) -> Result<Trace> {
    let spec = field.spec();
    if !field.mask().is_ocean(sender) {
        let (lon, lat) = spec.center(sender);
        return Err(Error::SenderOnLand { lon, lat });
    }
    let Some(d0) = field.day_index(start_day) else {
        return Err(Error::MissingCoverage(crate::time::format_date(start_day)));
    };
    let (mut lon, mut lat) = spec.center(sender);
    let mut states = Vec::new();
    let mut scores = Vec::new();
    let mut stop = StopReason::MaxSteps;
    for t in 0..params.max_steps {
        let day = d0 + t;
        if day >= field.n_days() {
            stop = StopReason::CoverageEnd;
            break;
        }
        let (u, v) = match interpolate_current(field, day, lon, lat) {
            Ok(c) => c,
            Err(_) => {
                stop = StopReason::HullExit;
                break;
            }
        };
        let state = TraceState {
            sender,
            start_day,
            t,
            lon,
            lat,
            rad: params.radius(t),
            u,
            v,
        };
        for r in receivers.within(lon, lat, state.rad) {
            let (rlon, rlat) = spec.center(r);
            let value = score_at(&state, rlon, rlat, params);
            if value > 0.0 {
                scores.push(StepScore {
                    sender,
                    receiver: r,
                    start_day,
                    t,
                    value,
                });
            }
        }
        states.push(state);
        if t + 1 == params.max_steps {
            break;
        }
        match advect(lon, lat, u, v, params.advect_metric) {
            Ok((nlon, nlat)) => {
                if !in_ocean_hull(field.mask(), nlon, nlat) {
                    stop = StopReason::HullExit;
                    break;
                }
                lon = nlon;
                lat = nlat;
            }
            Err(p) => {
                log::warn!(
                    "trace: polar singularity at lat {} for sender {} from {start_day}",
                    p.lat,
                    sender.0
                );
                stop = StopReason::PolarSingularity;
                break;
            }
        }
    }
    Ok(Trace {
        sender,
        start_day,
        states,
        scores,
        stop,
    })
}
