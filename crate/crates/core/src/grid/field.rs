use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{Cell, GridSpec, Mask};
use crate::error::{Error, Result};
use crate::time::{format_date, parse_date};

/// Daily (u, v) current vectors in m/s over a gapless run of days.
#[derive(Debug, Clone)]
pub struct VectorFieldSeries {
    mask: Mask,
    start: NaiveDate,
    n_days: usize,
    // day-major: day * n_cells + cell; NaN on land
    u: Vec<f64>,
    v: Vec<f64>,
}

impl VectorFieldSeries {
    /// Builds a series by evaluating `f(day_index, lon, lat)` on every ocean cell.
    pub fn from_fn(
        mask: Mask,
        start: NaiveDate,
        n_days: usize,
        mut f: impl FnMut(usize, f64, f64) -> (f64, f64),
    ) -> Result<Self> {
        let spec = *mask.spec();
        let n = spec.n_cells();
        let mut u = vec![f64::NAN; n * n_days];
        let mut v = vec![f64::NAN; n * n_days];
        for d in 0..n_days {
            for cell in spec.cells() {
                if mask.is_ocean(cell) {
                    let (lon, lat) = spec.center(cell);
                    let (cu, cv) = f(d, lon, lat);
                    u[d * n + cell.index()] = cu;
                    v[d * n + cell.index()] = cv;
                }
            }
        }
        Self::from_parts(mask, start, n_days, u, v)
    }

    pub fn from_parts(
        mask: Mask,
        start: NaiveDate,
        n_days: usize,
        u: Vec<f64>,
        v: Vec<f64>,
    ) -> Result<Self> {
        let n = mask.spec().n_cells();
        if n_days == 0 {
            return Err(Error::Grid("vector field has no days".into()));
        }
        if u.len() != n * n_days || v.len() != n * n_days {
            return Err(Error::Grid("vector arrays do not match grid x days".into()));
        }
        for d in 0..n_days {
            for cell in mask.spec().cells() {
                let i = d * n + cell.index();
                if mask.is_ocean(cell) && !(u[i].is_finite() && v[i].is_finite()) {
                    let (lon, lat) = mask.spec().center(cell);
                    return Err(Error::Grid(format!(
                        "non-finite vector at ocean cell ({lon}, {lat}) on day {d}"
                    )));
                }
            }
        }
        Ok(VectorFieldSeries {
            mask,
            start,
            n_days,
            u,
            v,
        })
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn spec(&self) -> &GridSpec {
        self.mask.spec()
    }

    pub fn first_day(&self) -> NaiveDate {
        self.start
    }

    pub fn last_day(&self) -> NaiveDate {
        self.start + chrono::Days::new(self.n_days as u64 - 1)
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.n_days).map(|d| self.start + chrono::Days::new(d as u64))
    }

    pub fn day_index(&self, day: NaiveDate) -> Option<usize> {
        let off = (day - self.start).num_days();
        (off >= 0 && (off as usize) < self.n_days).then_some(off as usize)
    }

    /// Vector at an ocean cell on a day index; `None` on land.
    pub fn vector(&self, day: usize, cell: Cell) -> Option<(f64, f64)> {
        if !self.mask.is_ocean(cell) {
            return None;
        }
        let i = day * self.spec().n_cells() + cell.index();
        Some((self.u[i], self.v[i]))
    }
}

/// Header-checked CSV reader yielding records with their row numbers.
pub(crate) struct CsvRows {
    path: std::path::PathBuf,
    reader: csv::Reader<File>,
}

impl CsvRows {
    fn open(path: &Path, expected_header: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(file);
        let mut header = csv::StringRecord::new();
        let ok = reader
            .read_record(&mut header)
            .map_err(|e| Error::load(path, 1, e.to_string()))?;
        let found: Vec<&str> = header.iter().collect();
        if !ok || found != expected_header {
            return Err(Error::load(
                path,
                1,
                format!(
                    "expected header `{}`, found `{}`",
                    expected_header.join(","),
                    found.join(",")
                ),
            ));
        }
        Ok(CsvRows {
            path: path.to_path_buf(),
            reader,
        })
    }

    /// Next record with its 1-based row number (header is row 1).
    pub(crate) fn next(&mut self, width: usize) -> Result<Option<(usize, csv::StringRecord)>> {
        let mut rec = csv::StringRecord::new();
        match self.reader.read_record(&mut rec) {
            Ok(false) => Ok(None),
            Ok(true) => {
                let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
                if rec.len() != width {
                    return Err(Error::load(
                        &self.path,
                        row,
                        format!("expected {width} fields, found {}", rec.len()),
                    ));
                }
                Ok(Some((row, rec)))
            }
            Err(e) => Err(Error::load(&self.path, 0, e.to_string())),
        }
    }
}

pub(crate) fn open_rows(path: &Path, header: &[&str]) -> Result<CsvRows> {
    CsvRows::open(path, header)
}

pub(crate) fn parse_f64(path: &Path, row: usize, name: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::load(path, row, format!("malformed {name} `{s}`")))
}

/// Loads `lon,lat,ocean` rows. Cells not listed are land.
pub fn load_mask(path: &Path, spec: &GridSpec) -> Result<Mask> {
    let mut rows = open_rows(path, &["lon", "lat", "ocean"])?;
    let mut ocean = vec![false; spec.n_cells()];
    let mut seen = vec![false; spec.n_cells()];
    while let Some((row, rec)) = rows.next(3)? {
        let lon = parse_f64(path, row, "lon", &rec[0])?;
        let lat = parse_f64(path, row, "lat", &rec[1])?;
        let cell = spec
            .locate_center(lon, lat)
            .map_err(|m| Error::load(path, row, m))?;
        let flag = match &rec[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::load(
                    path,
                    row,
                    format!("ocean must be 0 or 1, found `{other}`"),
                ))
            }
        };
        if std::mem::replace(&mut seen[cell.index()], true) {
            return Err(Error::load(
                path,
                row,
                format!("duplicate cell ({lon}, {lat})"),
            ));
        }
        ocean[cell.index()] = flag;
    }
    Mask::new(*spec, ocean)
}

pub fn write_mask(mask: &Mask, path: &Path) -> Result<()> {
    let spec = mask.spec();
    write_lines(path, |w| {
        writeln!(w, "lon,lat,ocean")?;
        for cell in spec.cells() {
            let (lon, lat) = spec.center(cell);
            writeln!(w, "{lon},{lat},{}", u8::from(mask.is_ocean(cell)))?;
        }
        Ok(())
    })
}

/// Loads a `lon,lat,date,u,v` file. Cells without rows are land unless
/// `mask` is given, in which case the mask decides and vectors on its land
/// cells are ignored.
pub fn load_vector_field(
    path: &Path,
    spec: &GridSpec,
    mask: Option<&Mask>,
) -> Result<VectorFieldSeries> {
    let mut rows = open_rows(path, &["lon", "lat", "date", "u", "v"])?;
    let mut vectors: BTreeMap<(NaiveDate, Cell), (f64, f64)> = BTreeMap::new();
    let mut cells_seen: BTreeSet<Cell> = BTreeSet::new();
    let mut last_row = 1;
    while let Some((row, rec)) = rows.next(5)? {
        last_row = row;
        let lon = parse_f64(path, row, "lon", &rec[0])?;
        let lat = parse_f64(path, row, "lat", &rec[1])?;
        let cell = spec
            .locate_center(lon, lat)
            .map_err(|m| Error::load(path, row, m))?;
        let date = parse_date(&rec[2]).map_err(|m| Error::load(path, row, m))?;
        let u = parse_f64(path, row, "u", &rec[3])?;
        let v = parse_f64(path, row, "v", &rec[4])?;
        if !(u.is_finite() && v.is_finite()) {
            return Err(Error::load(path, row, "non-finite vector"));
        }
        if vectors.insert((date, cell), (u, v)).is_some() {
            return Err(Error::load(
                path,
                row,
                format!(
                    "duplicate vector for cell ({lon}, {lat}) on {}",
                    format_date(date)
                ),
            ));
        }
        cells_seen.insert(cell);
    }
    let days: BTreeSet<NaiveDate> = vectors.keys().map(|(d, _)| *d).collect();
    let (Some(&first), Some(&last)) = (days.first(), days.last()) else {
        return Err(Error::load(path, last_row, "no vector rows"));
    };
    let n_days = (last - first).num_days() as usize + 1;
    if days.len() != n_days {
        let missing = (0..n_days)
            .map(|d| first + chrono::Days::new(d as u64))
            .find(|d| !days.contains(d))
            .expect("a gap exists");
        return Err(Error::load(
            path,
            last_row,
            format!(
                "dates are not contiguous: no rows for {}",
                format_date(missing)
            ),
        ));
    }
    let mask = match mask {
        Some(m) => m.clone(),
        None => Mask::from_fn(*spec, |ilon, ilat| {
            cells_seen.contains(&spec.cell(ilon, ilat))
        }),
    };
    let n = spec.n_cells();
    let mut u = vec![f64::NAN; n * n_days];
    let mut v = vec![f64::NAN; n * n_days];
    for ((date, cell), (cu, cv)) in &vectors {
        if mask.is_ocean(*cell) {
            let d = (*date - first).num_days() as usize;
            u[d * n + cell.index()] = *cu;
            v[d * n + cell.index()] = *cv;
        }
    }
    for d in 0..n_days {
        for cell in mask.ocean_cells() {
            if u[d * n + cell.index()].is_nan() {
                let (lon, lat) = spec.center(cell);
                return Err(Error::load(
                    path,
                    last_row,
                    format!(
                        "ocean cell ({lon}, {lat}) has no vector on {}",
                        format_date(first + chrono::Days::new(d as u64))
                    ),
                ));
            }
        }
    }
    VectorFieldSeries::from_parts(mask, first, n_days, u, v)
}

/// Writes the canonical form: rows ordered by date, then cell.
pub fn write_vector_field(series: &VectorFieldSeries, path: &Path) -> Result<()> {
    let spec = *series.spec();
    let ocean = series.mask().ocean_cells();
    write_lines(path, |w| {
        writeln!(w, "lon,lat,date,u,v")?;
        for (d, date) in series.days().enumerate() {
            let date = format_date(date);
            for &cell in &ocean {
                let (lon, lat) = spec.center(cell);
                let (u, v) = series.vector(d, cell).expect("ocean cell");
                writeln!(w, "{lon},{lat},{date},{u},{v}")?;
            }
        }
        Ok(())
    })
}

pub(crate) fn write_lines(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
