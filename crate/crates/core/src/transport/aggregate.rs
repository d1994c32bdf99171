use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::StepScore;
use crate::error::{Error, Result};
use crate::grid::field::{open_rows, parse_f64, write_lines};
use crate::grid::{Cell, GridSpec};
use crate::time::YearMonth;

/// Inclusive range of trace start days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunPeriod {
    #[serde(with = "date_serde")]
    pub start: NaiveDate,
    #[serde(with = "date_serde")]
    pub end: NaiveDate,
}

mod date_serde {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::time::format_date(*d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        let s = String::deserialize(d)?;
        crate::time::parse_date(&s).map_err(serde::de::Error::custom)
    }
}

impl RunPeriod {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Param(format!(
                "run period ends ({end}) before it starts ({start})"
            )));
        }
        Ok(RunPeriod { start, end })
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let start = self.start;
        (0..=(self.end - self.start).num_days() as u64).map(move |k| start + chrono::Days::new(k))
    }

    pub fn n_days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    /// Months lying wholly inside the period and beginning at least
    /// `lead_days` after its first day.
    pub fn complete_months(&self, lead_days: usize) -> Vec<YearMonth> {
        YearMonth::range_inclusive(YearMonth::of(self.start), YearMonth::of(self.end))
            .filter(|m| {
                (m.first_day() - self.start).num_days() >= lead_days as i64
                    && m.last_day() <= self.end
            })
            .collect()
    }
}

pub type DailyScores = BTreeMap<(Cell, Cell, NaiveDate), f64>;

/// Sums step scores by (sender, receiver, arrival day). Scores are added in
/// (sender, receiver, arrival, start, step) order so the result does not
/// depend on the order of the input.
pub fn aggregate_daily(scores: &[StepScore]) -> DailyScores {
    let mut keyed: Vec<_> = scores
        .iter()
        .map(|s| {
            (
                (s.sender, s.receiver, s.arrival_day(), s.start_day, s.t),
                s.value,
            )
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out = DailyScores::new();
    for ((sender, receiver, arrival, _, _), v) in keyed {
        *out.entry((sender, receiver, arrival)).or_insert(0.0) += v;
    }
    out
}

/// Monthly source-receptor scores with explicit zero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    spec: GridSpec,
    months: Vec<YearMonth>,
    // one value per month for every known pair
    pairs: BTreeMap<(Cell, Cell), Vec<f64>>,
    // whether any daily score arrived in that pair-month
    observed: BTreeMap<(Cell, Cell), Vec<bool>>,
}

impl ScoreMatrix {
    pub fn empty(spec: GridSpec, months: Vec<YearMonth>) -> Self {
        ScoreMatrix {
            spec,
            months,
            pairs: BTreeMap::new(),
            observed: BTreeMap::new(),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn months(&self) -> &[YearMonth] {
        &self.months
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn n_entries(&self) -> usize {
        self.pairs.len() * self.months.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((Cell, Cell), &[f64])> {
        self.pairs.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn senders(&self) -> Vec<Cell> {
        self.pairs
            .keys()
            .map(|k| k.0)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn receivers(&self) -> Vec<Cell> {
        self.pairs
            .keys()
            .map(|k| k.1)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn get(&self, sender: Cell, receiver: Cell, month: YearMonth) -> Option<f64> {
        let mi = self.months.binary_search(&month).ok()?;
        self.pairs.get(&(sender, receiver)).map(|v| v[mi])
    }

    /// True when the entry exists only through zero-filling.
    pub fn is_zero_filled(&self, sender: Cell, receiver: Cell, month: YearMonth) -> Option<bool> {
        let mi = self.months.binary_search(&month).ok()?;
        self.observed.get(&(sender, receiver)).map(|v| !v[mi])
    }

    /// Matrix restricted to the given senders.
    pub fn restrict_senders(&self, senders: &[Cell]) -> ScoreMatrix {
        let keep: BTreeSet<Cell> = senders.iter().copied().collect();
        ScoreMatrix {
            spec: self.spec,
            months: self.months.clone(),
            pairs: keep_senders(&self.pairs, &keep),
            observed: keep_senders(&self.observed, &keep),
        }
    }

    /// Merges matrices over disjoint sender sets and identical months.
    pub fn merge(mut self, other: ScoreMatrix) -> Result<ScoreMatrix> {
        if self.months != other.months || self.spec != other.spec {
            return Err(Error::Param(
                "score matrices cover different grids or months".into(),
            ));
        }
        for (k, v) in other.pairs {
            if self.pairs.insert(k, v).is_some() {
                return Err(Error::Param(format!(
                    "duplicate pair for sender {} receiver {}",
                    k.0 .0, k.1 .0
                )));
            }
        }
        self.observed.extend(other.observed);
        Ok(self)
    }
}

fn keep_senders<T: Clone>(
    m: &BTreeMap<(Cell, Cell), Vec<T>>,
    keep: &BTreeSet<Cell>,
) -> BTreeMap<(Cell, Cell), Vec<T>> {
    m.iter()
        .filter(|(k, _)| keep.contains(&k.0))
        .map(|(k, v)| (*k, v.clone()))
        .collect()
}

/// Averages daily scores over every calendar day of each complete month.
/// Every pair with a positive daily score anywhere receives an entry for
/// every complete month, zero when nothing arrived.
pub fn aggregate_monthly(
    daily: &DailyScores,
    spec: GridSpec,
    period: &RunPeriod,
    lead_days: usize,
) -> ScoreMatrix {
    let months = period.complete_months(lead_days);
    let mut m = ScoreMatrix::empty(spec, months);
    for (&(s, r, day), &v) in daily {
        if v <= 0.0 {
            continue;
        }
        let n = m.months.len();
        let vals = m.pairs.entry((s, r)).or_insert_with(|| vec![0.0; n]);
        let seen = m.observed.entry((s, r)).or_insert_with(|| vec![false; n]);
        if let Ok(mi) = m.months.binary_search(&YearMonth::of(day)) {
            vals[mi] += v;
            seen[mi] = true;
        }
    }
    let lens: Vec<f64> = m.months.iter().map(|mo| mo.days() as f64).collect();
    for vals in m.pairs.values_mut() {
        for (x, len) in vals.iter_mut().zip(&lens) {
            *x /= len;
        }
    }
    m
}

pub const SCORE_HEADER: &str = "sender_lon,sender_lat,receiver_lon,receiver_lat,month,score";

/// Writes rows in (sender, receiver, month) order, zero entries included.
pub fn write_score_matrix(m: &ScoreMatrix, path: &Path) -> Result<()> {
    let spec = m.spec;
    write_lines(path, |w| {
        writeln!(w, "{SCORE_HEADER}")?;
        for (&(s, r), vals) in &m.pairs {
            let (slon, slat) = spec.center(s);
            let (rlon, rlat) = spec.center(r);
            for (month, v) in m.months.iter().zip(vals) {
                writeln!(w, "{slon},{slat},{rlon},{rlat},{month},{v}")?;
            }
        }
        Ok(())
    })
}

/// Reads a score matrix. Every pair must carry the same set of months.
pub fn read_score_matrix(path: &Path, spec: &GridSpec) -> Result<ScoreMatrix> {
    let header: Vec<&str> = SCORE_HEADER.split(',').collect();
    let mut rows = open_rows(path, &header)?;
    let mut entries: BTreeMap<(Cell, Cell), BTreeMap<YearMonth, f64>> = BTreeMap::new();
    let mut months = BTreeSet::new();
    while let Some((row, rec)) = rows.next(6)? {
        let coord = |i: usize, name: &str| parse_f64(path, row, name, &rec[i]);
        let (slon, slat) = (coord(0, "sender_lon")?, coord(1, "sender_lat")?);
        let (rlon, rlat) = (coord(2, "receiver_lon")?, coord(3, "receiver_lat")?);
        let s = spec
            .locate_center(slon, slat)
            .map_err(|e| Error::load(path, row, e))?;
        let r = spec
            .locate_center(rlon, rlat)
            .map_err(|e| Error::load(path, row, e))?;
        let month: YearMonth = rec[4]
            .parse()
            .map_err(|e: String| Error::load(path, row, e))?;
        let v = parse_f64(path, row, "score", &rec[5])?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::load(
                path,
                row,
                format!("score must be nonnegative, found {v}"),
            ));
        }
        months.insert(month);
        if entries
            .entry((s, r))
            .or_default()
            .insert(month, v)
            .is_some()
        {
            return Err(Error::load(
                path,
                row,
                "duplicate (sender, receiver, month)",
            ));
        }
    }
    let months: Vec<YearMonth> = months.into_iter().collect();
    let mut m = ScoreMatrix::empty(*spec, months.clone());
    for (k, by_month) in entries {
        if by_month.len() != months.len() {
            let (slon, slat) = spec.center(k.0);
            return Err(Error::Load {
                path: path.into(),
                row: 0,
                message: format!("pair from ({slon}, {slat}) lacks entries for some months"),
            });
        }
        let vals: Vec<f64> = by_month.into_values().collect();
        m.observed
            .insert(k, vals.iter().map(|&v| v > 0.0).collect());
        m.pairs.insert(k, vals);
    }
    Ok(m)
}
