//! A small column store for analysis panels.
//!
//! CSV files written here start with a `# columns:` comment giving every
//! column's name and kind, so numeric-looking labels (admin codes, ids) keep
//! their kind on reload. Missing numbers are written as `NA`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::field::write_lines;

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Num(Vec<f64>),
    Label(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Num(v) => v.len(),
            Column::Label(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind(&self) -> &'static str {
        match self {
            Column::Num(_) => "num",
            Column::Label(_) => "label",
        }
    }

    /// Row value as a grouping key.
    pub fn key(&self, i: usize) -> String {
        match self {
            Column::Num(v) => format!("{}", v[i]),
            Column::Label(v) => v[i].clone(),
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Num(v) => Column::Num(rows.iter().map(|&i| v[i]).collect()),
            Column::Label(v) => Column::Label(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    names: Vec<String>,
    cols: Vec<Column>,
}

impl Table {
    pub fn new() -> Self {
        Table::default()
    }

    pub fn n_rows(&self) -> usize {
        self.cols.first().map_or(0, Column::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// Adds or replaces a column.
    pub fn push(&mut self, name: impl Into<String>, col: Column) -> Result<()> {
        let name = name.into();
        if !self.cols.is_empty() && col.len() != self.n_rows() {
            return Err(Error::Param(format!(
                "column `{name}` has {} rows, table has {}",
                col.len(),
                self.n_rows()
            )));
        }
        if name.contains(',') || name.contains(':') {
            return Err(Error::Param(format!(
                "column name `{name}` contains a separator"
            )));
        }
        match self.names.iter().position(|n| *n == name) {
            Some(i) => self.cols[i] = col,
            None => {
                self.names.push(name);
                self.cols.push(col);
            }
        }
        Ok(())
    }

    pub fn push_num(&mut self, name: impl Into<String>, v: Vec<f64>) -> Result<()> {
        self.push(name, Column::Num(v))
    }

    pub fn push_label(&mut self, name: impl Into<String>, v: Vec<String>) -> Result<()> {
        self.push(name, Column::Label(v))
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.cols[i])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn num(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            Column::Num(v) => Ok(v),
            Column::Label(_) => Err(Error::Param(format!(
                "column `{name}` is a label column, not numeric"
            ))),
        }
    }

    pub fn label(&self, name: &str) -> Result<&[String]> {
        match self.column(name)? {
            Column::Label(v) => Ok(v),
            Column::Num(_) => Err(Error::Param(format!(
                "column `{name}` is numeric, not a label column"
            ))),
        }
    }

    /// Rows at the given indices, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Table {
        Table {
            names: self.names.clone(),
            cols: self.cols.iter().map(|c| c.select(rows)).collect(),
        }
    }

    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Table {
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&i| keep(i)).collect();
        self.select_rows(&rows)
    }

    pub fn schema(&self) -> String {
        self.names
            .iter()
            .zip(&self.cols)
            .map(|(n, c)| format!("{n}:{}", c.kind()))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_lines(path, |w| {
            writeln!(w, "# columns: {}", self.schema())?;
            writeln!(w, "{}", self.names.join(","))?;
            for i in 0..self.n_rows() {
                for (j, c) in self.cols.iter().enumerate() {
                    if j > 0 {
                        w.write_all(b",")?;
                    }
                    match c {
                        Column::Num(v) if v[i].is_nan() => w.write_all(b"NA")?,
                        Column::Num(v) => write!(w, "{}", v[i])?,
                        Column::Label(v) => w.write_all(v[i].as_bytes())?,
                    }
                }
                writeln!(w)?;
            }
            Ok(())
        })
    }

    /// Reads a table written by [`Table::write_csv`]. Without a schema
    /// comment, a column is numeric when every value parses as a number or `NA`.
    pub fn read_csv(path: &Path) -> Result<Table> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let mut next = || {
            lines
                .next()
                .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(|e| Error::io(path, e)))
        };
        let (mut row, mut line) = next().ok_or_else(|| Error::load(path, 1, "empty file"))??;
        let mut kinds: Option<Vec<(String, String)>> = None;
        if let Some(rest) = line.strip_prefix("# columns:") {
            kinds = Some(
                rest.trim()
                    .split(',')
                    .map(|s| {
                        let (n, k) = s.split_once(':').unwrap_or((s, "num"));
                        (n.to_string(), k.to_string())
                    })
                    .collect(),
            );
            (row, line) = next().ok_or_else(|| Error::load(path, 2, "missing header"))??;
        }
        let names: Vec<String> = line.split(',').map(str::to_string).collect();
        if let Some(k) = &kinds {
            if k.iter().map(|x| &x.0).ne(names.iter()) {
                return Err(Error::load(
                    path,
                    row,
                    "header does not match the schema comment",
                ));
            }
        }
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); names.len()];
        while let Some(r) = next() {
            let (row, line) = r?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() {
                return Err(Error::load(
                    path,
                    row,
                    format!("expected {} fields, found {}", names.len(), fields.len()),
                ));
            }
            for (c, f) in raw.iter_mut().zip(fields) {
                c.push(f.to_string());
            }
        }
        let mut t = Table::new();
        for (j, (name, vals)) in names.into_iter().zip(raw).enumerate() {
            let is_num = match &kinds {
                Some(k) => k[j].1 == "num",
                None => vals.iter().all(|v| v == "NA" || v.parse::<f64>().is_ok()),
            };
            let col = if is_num {
                let mut out = Vec::with_capacity(vals.len());
                for (i, v) in vals.iter().enumerate() {
                    out.push(if v == "NA" {
                        f64::NAN
                    } else {
                        v.parse::<f64>().map_err(|_| {
                            Error::load(
                                path,
                                i + 2,
                                format!("column `{name}`: not a number: `{v}`"),
                            )
                        })?
                    });
                }
                Column::Num(out)
            } else {
                Column::Label(vals)
            };
            t.push(name, col)?;
        }
        Ok(t)
    }
}
