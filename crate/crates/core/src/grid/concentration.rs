use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

use super::field::{open_rows, parse_f64, write_lines};
use super::{Cell, GridSpec, Mask};
use crate::error::{Error, Result};
use crate::time::{format_date, parse_date, YearMonth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Period {
    Month(YearMonth),
    Day(NaiveDate),
}

impl Period {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        match s.trim().len() {
            7 => s.parse().map(Period::Month),
            10 => parse_date(s).map(Period::Day),
            _ => Err(format!("period must be YYYY-MM or YYYY-MM-DD, got `{s}`")),
        }
    }

    pub fn month(self) -> YearMonth {
        match self {
            Period::Month(m) => m,
            Period::Day(d) => YearMonth::of(d),
        }
    }

    fn is_month(self) -> bool {
        matches!(self, Period::Month(_))
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Month(m) => write!(f, "{m}"),
            Period::Day(d) => write!(f, "{}", format_date(*d)),
        }
    }
}

/// Nonnegative per-cell values by period. Missing values are kept distinct from zero.
#[derive(Debug, Clone)]
pub struct ConcentrationSeries {
    mask: Mask,
    periods: Vec<Period>,
    // period-major
    values: Vec<Option<f64>>,
}

impl ConcentrationSeries {
    pub fn new(mask: Mask, periods: Vec<Period>, values: Vec<Option<f64>>) -> Result<Self> {
        let n = mask.spec().n_cells();
        if values.len() != n * periods.len() {
            return Err(Error::Grid(
                "concentration values do not match grid x periods".into(),
            ));
        }
        if periods.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Grid("periods must be strictly increasing".into()));
        }
        if periods
            .windows(2)
            .any(|w| w[0].is_month() != w[1].is_month())
        {
            return Err(Error::Grid("periods mix months and days".into()));
        }
        if let Some(bad) = values
            .iter()
            .flatten()
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Grid(format!(
                "concentration must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(ConcentrationSeries {
            mask,
            periods,
            values,
        })
    }

    /// Monthly series over consecutive months, evaluated on ocean cells; land is missing.
    pub fn monthly_from_fn(
        mask: Mask,
        first: YearMonth,
        n_months: usize,
        mut f: impl FnMut(usize, Cell) -> Option<f64>,
    ) -> Result<Self> {
        let periods: Vec<Period> = (0..n_months)
            .map(|m| Period::Month(first.offset(m as i32)))
            .collect();
        let mut values = Vec::with_capacity(n_months * mask.spec().n_cells());
        for m in 0..n_months {
            for cell in mask.spec().cells() {
                values.push(if mask.is_ocean(cell) {
                    f(m, cell)
                } else {
                    None
                });
            }
        }
        Self::new(mask, periods, values)
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn spec(&self) -> &GridSpec {
        self.mask.spec()
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    pub fn is_monthly(&self) -> bool {
        self.periods.first().is_none_or(|p| p.is_month())
    }

    pub fn value(&self, period: usize, cell: Cell) -> Option<f64> {
        self.values[period * self.spec().n_cells() + cell.index()]
    }

    pub fn period_index(&self, period: Period) -> Option<usize> {
        self.periods.binary_search(&period).ok()
    }

    pub fn month_index(&self, month: YearMonth) -> Option<usize> {
        self.period_index(Period::Month(month))
    }

    /// Monthly value at a cell; `None` when the month is absent or the value missing.
    pub fn monthly_value(&self, month: YearMonth, cell: Cell) -> Option<f64> {
        self.month_index(month).and_then(|i| self.value(i, cell))
    }

    /// Averages daily periods into calendar months over non-missing days.
    /// Monthly series are returned unchanged.
    pub fn to_monthly(&self) -> Result<Self> {
        if self.is_monthly() {
            return Ok(self.clone());
        }
        let months: Vec<YearMonth> = self
            .periods
            .iter()
            .map(|p| p.month())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let n = self.spec().n_cells();
        let mut sums = vec![(0.0, 0usize); months.len() * n];
        for (pi, p) in self.periods.iter().enumerate() {
            let mi = months.binary_search(&p.month()).expect("month listed");
            for c in 0..n {
                if let Some(v) = self.values[pi * n + c] {
                    let s = &mut sums[mi * n + c];
                    s.0 += v;
                    s.1 += 1;
                }
            }
        }
        let values = sums
            .into_iter()
            .map(|(s, k)| (k > 0).then(|| s / k as f64))
            .collect();
        Self::new(
            self.mask.clone(),
            months.into_iter().map(Period::Month).collect(),
            values,
        )
    }
}

/// Loads `lon,lat,period,value` rows. Empty or `NA` values are missing.
/// Without an explicit mask, cells that appear in the file are ocean.
pub fn load_concentration(
    path: &Path,
    spec: &GridSpec,
    mask: Option<&Mask>,
) -> Result<ConcentrationSeries> {
    let mut rows = open_rows(path, &["lon", "lat", "period", "value"])?;
    let mut entries: BTreeMap<(Period, Cell), Option<f64>> = BTreeMap::new();
    let mut seen_cells = BTreeSet::new();
    while let Some((row, rec)) = rows.next(4)? {
        let lon = parse_f64(path, row, "lon", &rec[0])?;
        let lat = parse_f64(path, row, "lat", &rec[1])?;
        let cell = spec
            .locate_center(lon, lat)
            .map_err(|m| Error::load(path, row, m))?;
        let period = Period::parse(&rec[2]).map_err(|m| Error::load(path, row, m))?;
        let value = match &rec[3] {
            "" | "NA" => None,
            s => {
                let v = parse_f64(path, row, "value", s)?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::load(
                        path,
                        row,
                        format!("concentration must be nonnegative, found {v}"),
                    ));
                }
                Some(v)
            }
        };
        if let Some(first) = entries.keys().next() {
            if first.0.is_month() != period.is_month() {
                return Err(Error::load(
                    path,
                    row,
                    "file mixes monthly and daily periods",
                ));
            }
        }
        if entries.insert((period, cell), value).is_some() {
            return Err(Error::load(
                path,
                row,
                format!("duplicate value for ({lon}, {lat}) in {period}"),
            ));
        }
        seen_cells.insert(cell);
    }
    let periods: Vec<Period> = entries
        .keys()
        .map(|(p, _)| *p)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mask = match mask {
        Some(m) => m.clone(),
        None => Mask::from_fn(*spec, |ilon, ilat| {
            seen_cells.contains(&spec.cell(ilon, ilat))
        }),
    };
    let n = spec.n_cells();
    let mut values = vec![None; n * periods.len()];
    for ((p, cell), v) in entries {
        if mask.is_ocean(cell) {
            let pi = periods.binary_search(&p).expect("period listed");
            values[pi * n + cell.index()] = v;
        }
    }
    ConcentrationSeries::new(mask, periods, values)
}

pub fn write_concentration(series: &ConcentrationSeries, path: &Path) -> Result<()> {
    let spec = *series.spec();
    let ocean = series.mask().ocean_cells();
    write_lines(path, |w| {
        writeln!(w, "lon,lat,period,value")?;
        for (pi, p) in series.periods().iter().enumerate() {
            for &cell in &ocean {
                let (lon, lat) = spec.center(cell);
                match series.value(pi, cell) {
                    Some(v) => writeln!(w, "{lon},{lat},{p},{v}")?,
                    None => writeln!(w, "{lon},{lat},{p},NA")?,
                }
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn missing_is_distinct_from_zero() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        fs::write(
            &p,
            "lon,lat,period,value\n0,0,2017-05,0\n0.25,0,2017-05,NA\n0,0,2017-04,2.5\n",
        )
        .unwrap();
        let spec = GridSpec::new(0.0, 0.0, 0.25, 0.25, 2, 1).unwrap();
        let s = load_concentration(&p, &spec, None).unwrap();
        let may: YearMonth = "2017-05".parse().unwrap();
        assert_eq!(s.monthly_value(may, spec.cell(0, 0)), Some(0.0));
        assert_eq!(s.monthly_value(may, spec.cell(1, 0)), None);
        assert_eq!(s.monthly_value(may.offset(-1), spec.cell(0, 0)), Some(2.5));
        let out = dir.path().join("o.csv");
        write_concentration(&s, &out).unwrap();
        let again = load_concentration(&out, &spec, None).unwrap();
        assert_eq!(again.monthly_value(may, spec.cell(1, 0)), None);
    }

    #[test]
    fn rejects_negative_and_mixed_periods() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let spec = GridSpec::new(0.0, 0.0, 0.25, 0.25, 2, 1).unwrap();
        fs::write(&p, "lon,lat,period,value\n0,0,2017-05,-1\n").unwrap();
        assert!(load_concentration(&p, &spec, None).is_err());
        fs::write(
            &p,
            "lon,lat,period,value\n0,0,2017-05,1\n0,0,2017-05-02,1\n",
        )
        .unwrap();
        let err = load_concentration(&p, &spec, None).unwrap_err().to_string();
        assert!(err.contains("mixes"), "{err}");
    }

    #[test]
    fn daily_to_monthly_averages_present_days() {
        let spec = GridSpec::new(0.0, 0.0, 0.25, 0.25, 1, 1).unwrap();
        let d = |s: &str| Period::Day(parse_date(s).unwrap());
        let s = ConcentrationSeries::new(
            Mask::all_ocean(spec),
            vec![d("2017-04-29"), d("2017-04-30"), d("2017-05-01")],
            vec![Some(1.0), Some(3.0), None],
        )
        .unwrap();
        let m = s.to_monthly().unwrap();
        assert_eq!(m.periods().len(), 2);
        assert_eq!(m.value(0, Cell(0)), Some(2.0));
        assert_eq!(m.value(1, Cell(0)), None);
    }
}
