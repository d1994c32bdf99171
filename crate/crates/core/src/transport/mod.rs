//! Streamline tracing over daily current fields and downstream intensity
//! scoring.
//!
//! A trace starts at a sender cell center on a given day and moves with the
//! interpolated current once per day. At step `t` every receiver within the
//! search radius `rad0 + t * rad_step` of the streamline position is scored by
//! an exponential decay in radius, cross-current offset and distance. Step
//! scores are summed by arrival day and averaged into calendar months.

mod aggregate;
mod interp;
mod params;
mod run;
mod score;
mod trace;

pub use aggregate::{
    aggregate_daily, aggregate_monthly, read_score_matrix, write_score_matrix, DailyScores,
    RunPeriod, ScoreMatrix, SCORE_HEADER,
};
pub use interp::{in_ocean_hull, interpolate_current, stencil, HullExit, Stencil};
pub use params::{AdvectMetric, TransportParams};
pub use run::{
    missing_coverage, run_starts, run_traces, thread_pool, write_heatmap, write_trace_path,
    TraceStats,
};
pub use score::{score_at, score_step, wrap_lon, ReceiverIndex, StepScore, TraceState};
pub use trace::{advect, trace_streamline, PolarSingularity, StopReason, Trace};
