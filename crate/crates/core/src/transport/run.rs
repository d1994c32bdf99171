use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;

use super::aggregate::{aggregate_daily, aggregate_monthly, RunPeriod, ScoreMatrix};
use super::score::ReceiverIndex;
use super::trace::{trace_streamline, StopReason, Trace};
use super::TransportParams;
use crate::error::{Error, Result};
use crate::grid::field::write_lines;
use crate::grid::{Cell, VectorFieldSeries};
use crate::time::format_date;

/// Days of the run period that the field does not cover, as compact ranges.
pub fn missing_coverage(field: &VectorFieldSeries, period: &RunPeriod) -> Option<String> {
    let missing: Vec<NaiveDate> = period
        .days()
        .filter(|d| field.day_index(*d).is_none())
        .collect();
    if missing.is_empty() {
        return None;
    }
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < missing.len() {
        let mut j = i;
        while j + 1 < missing.len() && (missing[j + 1] - missing[j]).num_days() == 1 {
            j += 1;
        }
        parts.push(if i == j {
            format_date(missing[i])
        } else {
            format!("{}..{}", format_date(missing[i]), format_date(missing[j]))
        });
        i = j + 1;
    }
    Some(parts.join(", "))
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Param(format!("cannot start {workers} workers: {e}")))
}

/// Counts of trace stop reasons.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceStats {
    pub traces: usize,
    pub steps: usize,
    pub scores: usize,
    pub stops: BTreeMap<String, usize>,
}

impl TraceStats {
    fn add(&mut self, t: &Trace) {
        self.traces += 1;
        self.steps += t.states.len();
        self.scores += t.scores.len();
        *self.stops.entry(t.stop.to_string()).or_default() += 1;
    }

    fn absorb(&mut self, o: TraceStats) {
        self.traces += o.traces;
        self.steps += o.steps;
        self.scores += o.scores;
        for (k, v) in o.stops {
            *self.stops.entry(k).or_default() += v;
        }
    }

    pub fn stopped(&self, reason: StopReason) -> usize {
        self.stops.get(&reason.to_string()).copied().unwrap_or(0)
    }
}

fn check_inputs(
    field: &VectorFieldSeries,
    senders: &[Cell],
    period: &RunPeriod,
    params: &TransportParams,
) -> Result<()> {
    params.validate()?;
    if let Some(missing) = missing_coverage(field, period) {
        return Err(Error::MissingCoverage(missing));
    }
    for &s in senders {
        if !field.mask().is_ocean(s) {
            let (lon, lat) = field.spec().center(s);
            return Err(Error::SenderOnLand { lon, lat });
        }
    }
    Ok(())
}

fn run_sender(
    sender: Cell,
    field: &VectorFieldSeries,
    receivers: &ReceiverIndex,
    period: &RunPeriod,
    params: &TransportParams,
) -> Result<(ScoreMatrix, TraceStats)> {
    let mut stats = TraceStats::default();
    let mut scores = Vec::new();
    for day in period.days() {
        let tr = trace_streamline(sender, day, field, receivers, params)?;
        stats.add(&tr);
        scores.extend(tr.scores);
    }
    let daily = aggregate_daily(&scores);
    Ok((
        aggregate_monthly(&daily, *field.spec(), period, params.max_steps),
        stats,
    ))
}

/// Traces every sender from every day of the period and aggregates the
/// results into a monthly score matrix. Work is split by sender; the result
/// is identical for any worker count.
pub fn run_traces(
    field: &VectorFieldSeries,
    senders: &[Cell],
    receivers: &ReceiverIndex,
    period: &RunPeriod,
    params: &TransportParams,
    workers: usize,
) -> Result<(ScoreMatrix, TraceStats)> {
    check_inputs(field, senders, period, params)?;
    let mut senders = senders.to_vec();
    senders.sort();
    senders.dedup();
    let parts: Vec<Result<(ScoreMatrix, TraceStats)>> = thread_pool(workers)?.install(|| {
        senders
            .par_iter()
            .map(|&s| run_sender(s, field, receivers, period, params))
            .collect()
    });
    let mut matrix = ScoreMatrix::empty(*field.spec(), period.complete_months(params.max_steps));
    let mut stats = TraceStats::default();
    for part in parts {
        let (m, st) = part?;
        matrix = matrix.merge(m)?;
        stats.absorb(st);
    }
    log::info!(
        "score: {} traces, {} steps, {} positive step scores, {} pairs x {} months",
        stats.traces,
        stats.steps,
        stats.scores,
        matrix.n_pairs(),
        matrix.months().len()
    );
    Ok((matrix, stats))
}

/// Traces for explicit (sender, day) starts, in input order.
pub fn run_starts(
    field: &VectorFieldSeries,
    starts: &[(Cell, NaiveDate)],
    receivers: &ReceiverIndex,
    params: &TransportParams,
    workers: usize,
) -> Result<Vec<Trace>> {
    params.validate()?;
    let missing: Vec<String> = starts
        .iter()
        .filter(|(_, d)| field.day_index(*d).is_none())
        .map(|(_, d)| format_date(*d))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingCoverage(missing.join(", ")));
    }
    thread_pool(workers)?.install(|| {
        starts
            .par_iter()
            .map(|&(s, d)| trace_streamline(s, d, field, receivers, params))
            .collect()
    })
}

/// Per-step positions of a trace: `step,date,lon,lat,u,v,rad`.
pub fn write_trace_path(trace: &Trace, path: &Path) -> Result<()> {
    write_lines(path, |w| {
        writeln!(w, "step,date,lon,lat,u,v,rad")?;
        for s in &trace.states {
            let date = format_date(trace.start_day + chrono::Days::new(s.t as u64));
            writeln!(
                w,
                "{},{date},{},{},{},{},{}",
                s.t, s.lon, s.lat, s.u, s.v, s.rad
            )?;
        }
        Ok(())
    })
}

/// Sum over steps of the scores a trace gives each receiver: `lon,lat,score_sum`.
/// Every receiver in the index is listed, zeros included.
pub fn write_heatmap(trace: &Trace, receivers: &ReceiverIndex, path: &Path) -> Result<()> {
    let mut sums: BTreeMap<Cell, f64> = receivers.cells().into_iter().map(|c| (c, 0.0)).collect();
    for s in &trace.scores {
        *sums.entry(s.receiver).or_insert(0.0) += s.value;
    }
    let spec = *receivers.spec();
    write_lines(path, |w| {
        writeln!(w, "lon,lat,score_sum")?;
        for (c, v) in &sums {
            let (lon, lat) = spec.center(*c);
            writeln!(w, "{lon},{lat},{v}")?;
        }
        Ok(())
    })
}
