use std::collections::{BTreeMap, BTreeSet};

use super::MonthlySeries;
use crate::grid::{Cell, ConcentrationSeries};
use crate::time::YearMonth;
use crate::transport::ScoreMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportedExposure {
    pub series: BTreeMap<Cell, MonthlySeries>,
    /// Distinct (sender, month) pairs whose concentration was missing.
    pub missing_sender_months: usize,
}

/// Score-weighted sum of sender concentrations arriving at each receiver,
/// over the matrix months. Receivers absent from the matrix get zeros.
pub fn transported_series(
    matrix: &ScoreMatrix,
    mp: &ConcentrationSeries,
    receivers: &[Cell],
) -> TransportedExposure {
    let months = matrix.months();
    let mut sums: BTreeMap<Cell, Vec<f64>> = receivers
        .iter()
        .map(|&r| (r, vec![0.0; months.len()]))
        .collect();
    let mut missing: BTreeSet<(Cell, YearMonth)> = BTreeSet::new();
    for ((s, r), vals) in matrix.pairs() {
        let Some(acc) = sums.get_mut(&r) else {
            continue;
        };
        for (k, (&m, &score)) in months.iter().zip(vals).enumerate() {
            match mp.monthly_value(m, s) {
                Some(c) => acc[k] += score * c,
                None => {
                    missing.insert((s, m));
                }
            }
        }
    }
    if !missing.is_empty() {
        log::warn!(
            "exposure: {} sender-months lack a concentration value and contribute zero",
            missing.len()
        );
    }
    let first = months
        .first()
        .copied()
        .unwrap_or(YearMonth::new(2000, 1).expect("valid month"));
    TransportedExposure {
        series: sums
            .into_iter()
            .map(|(r, v)| {
                (
                    r,
                    MonthlySeries::new(first, v.into_iter().map(Some).collect()),
                )
            })
            .collect(),
        missing_sender_months: missing.len(),
    }
}

/// The cell's own monthly concentration.
pub fn local_series(mp: &ConcentrationSeries, cell: Cell) -> MonthlySeries {
    let months: Vec<YearMonth> = mp.periods().iter().map(|p| p.month()).collect();
    let Some(&first) = months.first() else {
        return MonthlySeries::new(YearMonth::new(2000, 1).expect("valid month"), vec![]);
    };
    let n = months.last().expect("nonempty").months_since(first) as usize + 1;
    MonthlySeries::new(
        first,
        (0..n)
            .map(|k| mp.monthly_value(first.offset(k as i32), cell))
            .collect(),
    )
}

/// Trade-weighted mean of exporter concentrations. Exporters without a
/// concentration value are left out of both sums; `None` when no positive
/// trade weight remains.
pub fn exporter_weighted_mp(flows: impl IntoIterator<Item = (f64, Option<f64>)>) -> Option<f64> {
    let (num, den) = flows
        .into_iter()
        .filter_map(|(w, mp)| mp.map(|m| (w, m)))
        .fold((0.0, 0.0), |(n, d), (w, m)| (n + w * m, d + w));
    (den > 0.0).then(|| num / den)
}
