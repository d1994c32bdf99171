use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::{
    exporter_weighted_mp, window_exposure, window_log_mean, Births, MonthlySeries, Provenance,
    TradeFlow, Window, WindowIssue,
};
use crate::error::{Error, Result};
use crate::grid::field::write_lines;
use crate::grid::{Cell, CellLocator, ConcentrationSeries, GridSpec, Mask};
use crate::table::Table;
use crate::time::YearMonth;
use crate::transport::ScoreMatrix;

pub const EXCLUSION_REASONS: [&str; 4] = [
    "missing_window",
    "nonpositive_window",
    "missing_covariate",
    "missing_exporter",
];

/// `lon_lat` label of a cell center.
pub fn cell_label(spec: &GridSpec, cell: Cell) -> String {
    let (lon, lat) = spec.center(cell);
    format!("{lon}_{lat}")
}

/// Counts of births dropped from a panel, by first failing rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusionReport {
    pub input: usize,
    pub retained: usize,
    pub counts: BTreeMap<String, usize>,
}

impl ExclusionReport {
    fn new(input: usize) -> Self {
        ExclusionReport {
            input,
            retained: 0,
            counts: EXCLUSION_REASONS
                .iter()
                .map(|r| (r.to_string(), 0))
                .collect(),
        }
    }

    pub fn excluded(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn count(&self, reason: &str) -> usize {
        self.counts.get(reason).copied().unwrap_or(0)
    }

    /// `reason,count` rows, `retained` first.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_lines(path, |w| {
            writeln!(w, "reason,count")?;
            writeln!(w, "retained,{}", self.retained)?;
            for (k, v) in &self.counts {
                writeln!(w, "{k},{v}")?;
            }
            Ok(())
        })
    }
}

pub struct PanelInputs<'a> {
    pub mask: &'a Mask,
    /// Monthly exposure by receiver cell for each provenance.
    pub exposures: Vec<(Provenance, &'a BTreeMap<Cell, MonthlySeries>)>,
    pub windows: Vec<Window>,
    /// Gridded controls entered as the log of their in-utero mean.
    pub controls: Vec<(String, &'a ConcentrationSeries)>,
    /// Trade-weighted exporter concentration by importer region.
    pub exporters: Option<&'a BTreeMap<String, MonthlySeries>>,
}

/// Orders ids numerically when both are integers, otherwise as text.
fn id_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then(a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// Nearest ocean cell of every birth, in record order.
pub fn birth_cells(births: &Births, mask: &Mask) -> Result<Vec<Cell>> {
    let loc = CellLocator::new(*mask.spec(), &mask.ocean_cells());
    if loc.is_empty() {
        return Err(Error::NoOceanCell);
    }
    Ok(births
        .records
        .par_iter()
        .map(|b| loc.nearest(b.lon, b.lat).expect("nonempty locator").0)
        .collect())
}

struct Row {
    idx: usize,
    cell: Cell,
    exposures: Vec<f64>,
    controls: Vec<f64>,
    exporter: Option<f64>,
}

/// One row per retained birth, ordered by id.
///
/// Columns: `id, admin1, country, birth_month, country_month, receiver,
/// receiver_lon, receiver_lat, lbw`, then `log_mp_<provenance>_<window>` for
/// each provenance and window, `log_<control>` for each gridded control, the
/// birth covariates with a `log_<name>` companion, and `log_mp_exporters`
/// when exporter data is given.
pub fn assemble_panel(births: &Births, inputs: &PanelInputs) -> Result<(Table, ExclusionReport)> {
    let spec = *inputs.mask.spec();
    let cells = birth_cells(births, inputs.mask)?;
    let mut order: Vec<usize> = (0..births.records.len()).collect();
    order.sort_by(|&a, &b| id_order(&births.records[a].id, &births.records[b].id));

    let outcomes: Vec<std::result::Result<Row, &'static str>> = order
        .par_iter()
        .map(|&i| {
            let b = &births.records[i];
            let cell = cells[i];
            let mut exposures = Vec::new();
            for (_, series) in &inputs.exposures {
                let s = series.get(&cell).ok_or("missing_window")?;
                for w in &inputs.windows {
                    match window_exposure(s, b.birth_month, *w) {
                        Ok(v) => exposures.push(v),
                        Err(WindowIssue::Missing) => return Err("missing_window"),
                        Err(WindowIssue::NonPositive) => return Err("nonpositive_window"),
                    }
                }
            }
            let mut controls = Vec::new();
            for (_, series) in &inputs.controls {
                let ms = MonthlySeries::from_concentration(series, cell);
                controls.push(
                    window_log_mean(&ms, b.birth_month, Window::IN_UTERO)
                        .map_err(|_| "missing_covariate")?,
                );
            }
            let exporter = match inputs.exporters {
                None => None,
                Some(map) => {
                    let s = map.get(&b.admin1).ok_or("missing_exporter")?;
                    Some(
                        window_exposure(s, b.birth_month, Window::IN_UTERO)
                            .map_err(|_| "missing_exporter")?,
                    )
                }
            };
            Ok(Row {
                idx: i,
                cell,
                exposures,
                controls,
                exporter,
            })
        })
        .collect();

    let mut report = ExclusionReport::new(births.records.len());
    let mut rows = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(reason) => *report.counts.get_mut(reason).expect("known reason") += 1,
        }
    }
    report.retained = rows.len();
    log::info!(
        "exposure: {} births in, {} retained, excluded {:?}",
        report.input,
        report.retained,
        report.counts
    );
    if rows.is_empty() {
        return Err(Error::EmptyPanel(format!(
            "all {} births were excluded ({:?})",
            report.input, report.counts
        )));
    }

    let rec = |r: &Row| &births.records[r.idx];
    let mut t = Table::new();
    t.push_label("id", rows.iter().map(|r| rec(r).id.clone()).collect())?;
    t.push_label(
        "admin1",
        rows.iter().map(|r| rec(r).admin1.clone()).collect(),
    )?;
    t.push_label(
        "country",
        rows.iter().map(|r| rec(r).country.clone()).collect(),
    )?;
    t.push_label(
        "birth_month",
        rows.iter()
            .map(|r| rec(r).birth_month.to_string())
            .collect(),
    )?;
    t.push_label(
        "country_month",
        rows.iter()
            .map(|r| format!("{}_{}", rec(r).country, rec(r).birth_month))
            .collect(),
    )?;
    t.push_label(
        "receiver",
        rows.iter().map(|r| cell_label(&spec, r.cell)).collect(),
    )?;
    t.push_num(
        "receiver_lon",
        rows.iter().map(|r| spec.center(r.cell).0).collect(),
    )?;
    t.push_num(
        "receiver_lat",
        rows.iter().map(|r| spec.center(r.cell).1).collect(),
    )?;
    t.push_num("lbw", rows.iter().map(|r| rec(r).lbw as f64).collect())?;
    let mut k = 0;
    for (prov, _) in &inputs.exposures {
        for w in &inputs.windows {
            t.push_num(
                format!("log_mp_{prov}_{}", w.name),
                rows.iter().map(|r| r.exposures[k]).collect(),
            )?;
            k += 1;
        }
    }
    for (j, (name, _)) in inputs.controls.iter().enumerate() {
        t.push_num(
            format!("log_{name}"),
            rows.iter().map(|r| r.controls[j]).collect(),
        )?;
    }
    for (j, name) in births.covariates.iter().enumerate() {
        let raw: Vec<f64> = rows.iter().map(|r| rec(r).covariates[j]).collect();
        let logged = raw
            .iter()
            .map(|&v| if v > 0.0 { v.ln() } else { f64::NAN })
            .collect();
        t.push_num(name.clone(), raw)?;
        t.push_num(format!("log_{name}"), logged)?;
    }
    if inputs.exporters.is_some() {
        t.push_num(
            "log_mp_exporters",
            rows.iter()
                .map(|r| r.exporter.unwrap_or(f64::NAN))
                .collect(),
        )?;
    }
    Ok((t, report))
}

impl MonthlySeries {
    /// Monthly values of a concentration series at one cell, across the
    /// span of its months.
    pub fn from_concentration(series: &ConcentrationSeries, cell: Cell) -> MonthlySeries {
        super::local_series(series, cell)
    }
}

/// Trade-weighted exporter concentration by importer over the months with
/// trade records. Months with no usable exporter are missing.
pub fn exporter_series(
    flows: &[TradeFlow],
    country_mp: &BTreeMap<String, MonthlySeries>,
) -> BTreeMap<String, MonthlySeries> {
    // importer -> month -> (trade value, exporter concentration)
    type Flows = BTreeMap<YearMonth, Vec<(f64, Option<f64>)>>;
    let mut by_importer: BTreeMap<&str, Flows> = BTreeMap::new();
    for f in flows {
        let mp = country_mp.get(&f.exporter).and_then(|s| s.get(f.month));
        by_importer
            .entry(&f.importer)
            .or_default()
            .entry(f.month)
            .or_default()
            .push((f.value, mp));
    }
    by_importer
        .into_iter()
        .map(|(imp, months)| {
            let first = *months.keys().next().expect("nonempty");
            let last = *months.keys().next_back().expect("nonempty");
            let vals = YearMonth::range_inclusive(first, last)
                .map(|m| {
                    months
                        .get(&m)
                        .and_then(|f| exporter_weighted_mp(f.iter().copied()))
                })
                .collect();
            (imp.to_string(), MonthlySeries::new(first, vals))
        })
        .collect()
}

fn ln_or_nan(v: Option<f64>) -> f64 {
    match v {
        Some(x) if x > 0.0 => x.ln(),
        _ => f64::NAN,
    }
}

/// Sender-receiver-month rows for the passthrough regression:
/// `sender, receiver, pair, month, current, log_mp_sender, log_mp_receiver`.
pub fn passthrough_panel(matrix: &ScoreMatrix, mp: &ConcentrationSeries) -> Result<Table> {
    let spec = *matrix.spec();
    let months = matrix.months();
    let (mut s_l, mut r_l, mut p_l, mut m_l) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let (mut cur, mut lms, mut lmr) = (Vec::new(), Vec::new(), Vec::new());
    for ((s, r), vals) in matrix.pairs() {
        let (sl, rl) = (cell_label(&spec, s), cell_label(&spec, r));
        for (&m, &v) in months.iter().zip(vals) {
            s_l.push(sl.clone());
            r_l.push(rl.clone());
            p_l.push(format!("{sl}|{rl}"));
            m_l.push(m.to_string());
            cur.push(v);
            lms.push(ln_or_nan(mp.monthly_value(m, s)));
            lmr.push(ln_or_nan(mp.monthly_value(m, r)));
        }
    }
    let mut t = Table::new();
    t.push_label("sender", s_l)?;
    t.push_label("receiver", r_l)?;
    t.push_label("pair", p_l)?;
    t.push_label("month", m_l)?;
    t.push_num("current", cur)?;
    t.push_num("log_mp_sender", lms)?;
    t.push_num("log_mp_receiver", lmr)?;
    Ok(t)
}

/// Receiver-month rows for the aerosol regression:
/// `grid, country, month, country_month, log_aod, log_evaporation`, then
/// `log_mp_<provenance>` for the current month.
pub fn grid_month_panel(
    receivers: &[Cell],
    spec: &GridSpec,
    country_of: &BTreeMap<Cell, String>,
    exposures: &[(Provenance, &BTreeMap<Cell, MonthlySeries>)],
    aod: &ConcentrationSeries,
    evaporation: &ConcentrationSeries,
    months: &[YearMonth],
) -> Result<Table> {
    let mut t = Table::new();
    let rows: Vec<(Cell, YearMonth)> = receivers
        .iter()
        .flat_map(|&c| months.iter().map(move |&m| (c, m)))
        .collect();
    let country = |c: &Cell| {
        country_of
            .get(c)
            .cloned()
            .unwrap_or_else(|| "unknown".into())
    };
    t.push_label(
        "grid",
        rows.iter().map(|(c, _)| cell_label(spec, *c)).collect(),
    )?;
    t.push_label("country", rows.iter().map(|(c, _)| country(c)).collect())?;
    t.push_label("month", rows.iter().map(|(_, m)| m.to_string()).collect())?;
    t.push_label(
        "country_month",
        rows.iter()
            .map(|(c, m)| format!("{}_{m}", country(c)))
            .collect(),
    )?;
    t.push_num(
        "log_aod",
        rows.iter()
            .map(|(c, m)| ln_or_nan(aod.monthly_value(*m, *c)))
            .collect(),
    )?;
    t.push_num(
        "log_evaporation",
        rows.iter()
            .map(|(c, m)| ln_or_nan(evaporation.monthly_value(*m, *c)))
            .collect(),
    )?;
    for (prov, series) in exposures {
        t.push_num(
            format!("log_mp_{prov}"),
            rows.iter()
                .map(|(c, m)| ln_or_nan(series.get(c).and_then(|s| s.get(*m))))
                .collect(),
        )?;
    }
    Ok(t)
}
