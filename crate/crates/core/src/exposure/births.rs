use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::field::{open_rows, parse_f64, write_lines};
use crate::grid::{Cell, GridSpec};
use crate::time::YearMonth;

#[derive(Debug, Clone, PartialEq)]
pub struct BirthRecord {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
    pub admin1: String,
    pub country: String,
    pub birth_month: YearMonth,
    pub lbw: u8,
    /// Values aligned with [`Births::covariates`]; NaN when missing.
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Births {
    pub covariates: Vec<String>,
    pub records: Vec<BirthRecord>,
}

impl Births {
    pub fn covariate(&self, name: &str) -> Option<usize> {
        self.covariates.iter().position(|c| c == name)
    }
}

const BIRTH_FIXED: [&str; 7] = [
    "id",
    "lon",
    "lat",
    "admin1",
    "country",
    "birth_month",
    "lbw",
];

/// Reads `id,lon,lat,admin1,country,birth_month,lbw,<covariates…>`.
/// Empty or `NA` covariate values are missing.
pub fn load_births(path: &Path) -> Result<Births> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::load(path, 1, e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::load(path, 1, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.len() < BIRTH_FIXED.len() || header[..BIRTH_FIXED.len()].iter().ne(BIRTH_FIXED.iter())
    {
        return Err(Error::load(
            path,
            1,
            format!("header must start with {}", BIRTH_FIXED.join(",")),
        ));
    }
    let covariates = header[BIRTH_FIXED.len()..].to_vec();
    let mut records = Vec::new();
    let mut ids = BTreeSet::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::load(path, row, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(Error::load(
                path,
                row,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let id = rec[0].trim().to_string();
        if id.is_empty() || !ids.insert(id.clone()) {
            return Err(Error::load(
                path,
                row,
                format!("missing or duplicate id `{id}`"),
            ));
        }
        let lon = parse_f64(path, row, "lon", &rec[1])?;
        let lat = parse_f64(path, row, "lat", &rec[2])?;
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::load(
                path,
                row,
                format!("latitude out of range: {lat}"),
            ));
        }
        let birth_month: YearMonth = rec[5]
            .parse()
            .map_err(|e: String| Error::load(path, row, e))?;
        let lbw = match rec[6].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::load(
                    path,
                    row,
                    format!("lbw must be 0 or 1, got `{other}`"),
                ))
            }
        };
        let mut cov = Vec::with_capacity(covariates.len());
        for (j, name) in covariates.iter().enumerate() {
            cov.push(match rec[BIRTH_FIXED.len() + j].trim() {
                "" | "NA" => f64::NAN,
                s => parse_f64(path, row, name, s)?,
            });
        }
        records.push(BirthRecord {
            id,
            lon,
            lat,
            admin1: rec[3].trim().to_string(),
            country: rec[4].trim().to_string(),
            birth_month,
            lbw,
            covariates: cov,
        });
    }
    Ok(Births {
        covariates,
        records,
    })
}

pub fn write_births(births: &Births, path: &Path) -> Result<()> {
    write_lines(path, |w| {
        write!(w, "{}", BIRTH_FIXED.join(","))?;
        for c in &births.covariates {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
        for b in &births.records {
            write!(
                w,
                "{},{},{},{},{},{},{}",
                b.id, b.lon, b.lat, b.admin1, b.country, b.birth_month, b.lbw
            )?;
            for v in &b.covariates {
                if v.is_nan() {
                    write!(w, ",NA")?;
                } else {
                    write!(w, ",{v}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeFlow {
    pub importer: String,
    pub exporter: String,
    pub month: YearMonth,
    pub value: f64,
}

/// Reads `importer,exporter,month,value`.
pub fn load_trade(path: &Path) -> Result<Vec<TradeFlow>> {
    let mut rows = open_rows(path, &["importer", "exporter", "month", "value"])?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    while let Some((row, rec)) = rows.next(4)? {
        let month: YearMonth = rec[2]
            .parse()
            .map_err(|e: String| Error::load(path, row, e))?;
        let value = parse_f64(path, row, "value", &rec[3])?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::load(
                path,
                row,
                format!("trade value must be nonnegative, found {value}"),
            ));
        }
        let key = (rec[0].to_string(), rec[1].to_string(), month);
        if !seen.insert(key.clone()) {
            return Err(Error::load(
                path,
                row,
                "duplicate (importer, exporter, month)",
            ));
        }
        out.push(TradeFlow {
            importer: key.0,
            exporter: key.1,
            month,
            value,
        });
    }
    Ok(out)
}

pub fn write_trade(flows: &[TradeFlow], path: &Path) -> Result<()> {
    write_lines(path, |w| {
        writeln!(w, "importer,exporter,month,value")?;
        for f in flows {
            writeln!(w, "{},{},{},{}", f.importer, f.exporter, f.month, f.value)?;
        }
        Ok(())
    })
}

/// Reads `country,lon,lat` shoreline cells; coordinates must be cell centers.
pub fn load_shorelines(path: &Path, spec: &GridSpec) -> Result<BTreeMap<String, Vec<Cell>>> {
    let mut rows = open_rows(path, &["country", "lon", "lat"])?;
    let mut out: BTreeMap<String, Vec<Cell>> = BTreeMap::new();
    while let Some((row, rec)) = rows.next(3)? {
        let lon = parse_f64(path, row, "lon", &rec[1])?;
        let lat = parse_f64(path, row, "lat", &rec[2])?;
        let cell = spec
            .locate_center(lon, lat)
            .map_err(|e| Error::load(path, row, e))?;
        out.entry(rec[0].to_string()).or_default().push(cell);
    }
    for cells in out.values_mut() {
        cells.sort();
        cells.dedup();
    }
    Ok(out)
}

pub fn write_shorelines(
    shorelines: &BTreeMap<String, Vec<Cell>>,
    spec: &GridSpec,
    path: &Path,
) -> Result<()> {
    write_lines(path, |w| {
        writeln!(w, "country,lon,lat")?;
        for (country, cells) in shorelines {
            for &c in cells {
                let (lon, lat) = spec.center(c);
                writeln!(w, "{country},{lon},{lat}")?;
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
    fn births_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        fs::write(
            &p,
            "id,lon,lat,admin1,country,birth_month,lbw,seafood\n1,0.5,-3.25,A,BR,2018-03,0,2.5\n2,0.75,-3,A,BR,2018-04,1,NA\n",
        )
        .unwrap();
        let b = load_births(&p).unwrap();
        assert_eq!(b.covariates, ["seafood"]);
        assert_eq!(b.records.len(), 2);
        assert_eq!(b.records[1].lbw, 1);
        assert!(b.records[1].covariates[0].is_nan());
        let out = dir.path().join("o.csv");
        write_births(&b, &out).unwrap();
        let again = load_births(&out).unwrap();
        assert_eq!(again.records[0], b.records[0]);
        assert!(again.records[1].covariates[0].is_nan());
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            fs::read_to_string(&out).unwrap()
        );
    }

    #[test]
    fn bad_birth_rows_name_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        fs::write(
            &p,
            "id,lon,lat,admin1,country,birth_month,lbw\n1,0,0,A,B,2018-03,0\n2,0,0,A,B,2018-03,2\n",
        )
        .unwrap();
        let err = load_births(&p).unwrap_err().to_string();
        assert!(err.contains("row 3") && err.contains("lbw"), "{err}");
        fs::write(
            &p,
            "id,lon,lat,admin1,country,birth_month,lbw\n1,0,0,A,B,2018-3,0\n",
        )
        .unwrap();
        assert!(load_births(&p).is_err());
    }

    #[test]
    fn trade_and_shorelines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(
            &p,
            "importer,exporter,month,value\nCA,CL,2018-01,3\nCA,PE,2018-01,1\n",
        )
        .unwrap();
        let t = load_trade(&p).unwrap();
        assert_eq!(t.len(), 2);
        let out = dir.path().join("t2.csv");
        write_trade(&t, &out).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            fs::read_to_string(&out).unwrap()
        );
        let s = dir.path().join("s.csv");
        fs::write(&s, "country,lon,lat\nCL,0.25,0\nCL,0,0\nPE,0.5,0.25\n").unwrap();
        let spec = GridSpec::new(0.0, 0.0, 0.25, 0.25, 4, 4).unwrap();
        let sh = load_shorelines(&s, &spec).unwrap();
        assert_eq!(sh["CL"], vec![spec.cell(0, 0), spec.cell(1, 0)]);
        let s2 = dir.path().join("s2.csv");
        write_shorelines(&sh, &spec, &s2).unwrap();
        assert_eq!(load_shorelines(&s2, &spec).unwrap(), sh);
    }
}
