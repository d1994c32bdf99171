//! Brute-force reference implementations used to check the library.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};

use drift_attrib::grid::{Cell, GridSpec, VectorFieldSeries};
use drift_attrib::synth::SynthRng;
use drift_attrib::table::Table;

const R_KM: f64 = 6371.0;

fn km_per_degree() -> f64 {
    2.0 * std::f64::consts::PI * R_KM / 360.0
}

fn great_circle_deg(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let a = ((p2 - p1) / 2.0).sin().powi(2)
        + p1.cos() * p2.cos() * ((lon2 - lon1).to_radians() / 2.0).sin().powi(2);
    2.0 * R_KM * a.sqrt().min(1.0).asin() / km_per_degree()
}

/// Bilinear current at a point of an all-ocean grid, `None` outside the
/// rectangle spanned by the cell centers.
fn bilinear(
    field: &VectorFieldSeries,
    day: usize,
    spec: &GridSpec,
    lon: f64,
    lat: f64,
) -> Option<(f64, f64)> {
    let fx = (lon - spec.lon0) / spec.dlon;
    let fy = (lat - spec.lat0) / spec.dlat;
    let (mx, my) = ((spec.nlon - 1) as f64, (spec.nlat - 1) as f64);
    if !(fx >= 0.0 && fx <= mx && fy >= 0.0 && fy <= my) {
        return None;
    }
    let i = (fx.floor() as usize).min(spec.nlon - 2);
    let j = (fy.floor() as usize).min(spec.nlat - 2);
    let (tx, ty) = (fx - i as f64, fy - j as f64);
    let at = |a: usize, b: usize| field.vector(day, spec.cell(a, b)).unwrap();
    let (c00, c10, c01, c11) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
    let mix = |a: f64, b: f64, c: f64, d: f64| {
        a * (1.0 - tx) * (1.0 - ty) + b * tx * (1.0 - ty) + c * (1.0 - tx) * ty + d * tx * ty
    };
    Some((
        mix(c00.0, c10.0, c01.0, c11.0),
        mix(c00.1, c10.1, c01.1, c11.1),
    ))
}

/// Daily scores keyed by (sender, receiver, arrival day) from tracing every
/// sender on every day from `start` for `n_start_days` days, scoring every
/// grid cell at every step. The grid must be all ocean and the field must
/// start at `start`.
pub fn transport_daily(
    field: &VectorFieldSeries,
    senders: &[Cell],
    start: NaiveDate,
    n_start_days: usize,
) -> BTreeMap<(Cell, Cell, NaiveDate), f64> {
    let spec = *field.spec();
    let (alpha, beta, gamma, rad0, rad_step, steps, cutoff) =
        (0.8, 0.49, 0.23, 1.0, 0.05, 90usize, 0.4);
    let mut out = BTreeMap::new();
    for &s in senders {
        for d0 in 0..n_start_days {
            let (mut lon, mut lat) = spec.center(s);
            for t in 0..steps {
                let day = d0 + t;
                if day >= field.n_days() {
                    break;
                }
                let Some((u, v)) = bilinear(field, day, &spec, lon, lat) else {
                    break;
                };
                let rad = rad0 + rad_step * t as f64;
                let speed = (u * u + v * v).sqrt();
                for r in spec.cells() {
                    let (rlon, rlat) = spec.center(r);
                    let dist = great_circle_deg(lon, lat, rlon, rlat);
                    if dist > rad {
                        continue;
                    }
                    let (lx, ly) = (rlon - lon, rlat - lat);
                    let norm = (lx * lx + ly * ly).sqrt();
                    let angle = if norm == 0.0 {
                        0.0
                    } else {
                        ((u * lx + v * ly) / (speed * norm)).clamp(-1.0, 1.0).acos()
                    };
                    if angle > cutoff {
                        continue;
                    }
                    let perp = ((v * lx - u * ly) / speed).abs();
                    let score = (-alpha * rad - beta * perp - gamma * dist).exp();
                    let arrival = start + chrono::Days::new(day as u64);
                    *out.entry((s, r, arrival)).or_insert(0.0) += score;
                }
                if t + 1 == steps {
                    break;
                }
                let m_per_deg = km_per_degree() * 1000.0 * lat.to_radians().cos();
                let (nlon, nlat) = (
                    lon + 86_400.0 * u / m_per_deg,
                    lat + 86_400.0 * v / m_per_deg,
                );
                if bilinear(field, day, &spec, nlon, nlat).is_none() {
                    break;
                }
                lon = nlon;
                lat = nlat;
            }
        }
    }
    out
}

fn days_in_month(y: i32, m: u32) -> u32 {
    let next = if m == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(y, m + 1, 1)
    };
    (next.unwrap() - NaiveDate::from_ymd_opt(y, m, 1).unwrap()).num_days() as u32
}

/// Months lying inside `[start, end]` whose first day is at least
/// `lead_days` after `start`, as (year, month).
pub fn complete_months(start: NaiveDate, end: NaiveDate, lead_days: i64) -> Vec<(i32, u32)> {
    let mut out = Vec::new();
    let (mut y, mut m) = (start.year(), start.month());
    loop {
        let first = NaiveDate::from_ymd_opt(y, m, 1).unwrap();
        if first > end {
            break;
        }
        let last = NaiveDate::from_ymd_opt(y, m, days_in_month(y, m)).unwrap();
        if (first - start).num_days() >= lead_days && last <= end {
            out.push((y, m));
        }
        (y, m) = if m == 12 { (y + 1, 1) } else { (y, m + 1) };
    }
    out
}

/// Monthly averages over calendar days for every pair with any positive
/// daily score, zero where nothing arrived.
pub fn transport_monthly(
    daily: &BTreeMap<(Cell, Cell, NaiveDate), f64>,
    months: &[(i32, u32)],
) -> BTreeMap<(Cell, Cell), Vec<f64>> {
    let mut out: BTreeMap<(Cell, Cell), Vec<f64>> = BTreeMap::new();
    for (&(s, r, day), &v) in daily {
        if v <= 0.0 {
            continue;
        }
        let row = out.entry((s, r)).or_insert_with(|| vec![0.0; months.len()]);
        if let Some(k) = months
            .iter()
            .position(|&(y, m)| y == day.year() && m == day.month())
        {
            row[k] += v / days_in_month(months[k].0, months[k].1) as f64;
        }
    }
    out
}

/// A random panel with two fixed effects, three cluster dimensions and
/// heteroskedastic noise.
pub fn random_panel(n: usize, seed: u64) -> Table {
    let mut rng = SynthRng::new(seed, 99);
    let fe1: Vec<usize> = (0..n).map(|i| i % 12).collect();
    let fe2: Vec<usize> = (0..n).map(|_| rng.below(8)).collect();
    let a: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
    let b: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
    let x1: Vec<f64> = (0..n).map(|i| rng.normal() + 0.3 * a[fe1[i]]).collect();
    let x2: Vec<f64> = (0..n)
        .map(|i| rng.normal() * 2.0 + 0.5 * b[fe2[i]])
        .collect();
    let c1: Vec<usize> = (0..n).map(|_| rng.below(10)).collect();
    let c2: Vec<usize> = (0..n).map(|_| rng.below(7)).collect();
    let c3: Vec<usize> = (0..n).map(|_| rng.below(5)).collect();
    let shock1: Vec<f64> = (0..10).map(|_| rng.normal()).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            0.5 * x1[i] - 0.3 * x2[i]
                + a[fe1[i]]
                + b[fe2[i]]
                + 0.5 * shock1[c1[i]]
                + rng.normal() * (1.0 + 0.5 * x1[i].abs())
        })
        .collect();
    let label = |p: &str, v: &[usize]| v.iter().map(|k| format!("{p}{k}")).collect::<Vec<_>>();
    let mut t = Table::new();
    t.push_num("y", y).unwrap();
    t.push_num("x1", x1).unwrap();
    t.push_num("x2", x2).unwrap();
    t.push_label("fe1", label("a", &fe1)).unwrap();
    t.push_label("fe2", label("b", &fe2)).unwrap();
    t.push_label("c1", label("g", &c1)).unwrap();
    t.push_label("c2", label("h", &c2)).unwrap();
    t.push_label("c3", label("k", &c3)).unwrap();
    t
}

/// Group index per row, in first-seen order.
pub fn groups(keys: &[String]) -> (Vec<usize>, usize) {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let codes = keys
        .iter()
        .map(|k| {
            let n = seen.len();
            *seen.entry(k.as_str()).or_insert(n)
        })
        .collect();
    (codes, seen.len())
}

/// Slope estimates, the slope block of (X'X)^-1 and the residuals.
pub struct DummyFit {
    pub beta: Vec<f64>,
    pub bread: DMatrix<f64>,
    pub resid: Vec<f64>,
}

/// OLS of `y` on `regressors` plus explicit dummies for every level of
/// each fixed effect (the first level of every effect after the first is
/// dropped).
pub fn dummy_ols(t: &Table, y: &str, regressors: &[&str], fes: &[&str]) -> DummyFit {
    let n = t.n_rows();
    let mut cols: Vec<Vec<f64>> = regressors
        .iter()
        .map(|r| t.num(r).unwrap().to_vec())
        .collect();
    for (k, fe) in fes.iter().enumerate() {
        let (codes, g) = groups(t.label(fe).unwrap());
        for level in usize::from(k > 0)..g {
            cols.push(
                codes
                    .iter()
                    .map(|&c| f64::from(u8::from(c == level)))
                    .collect(),
            );
        }
    }
    let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let yv = DVector::from_column_slice(t.num(y).unwrap());
    let xtx = x.transpose() * &x;
    let inv = xtx.clone().cholesky().expect("full rank").inverse();
    let beta = &inv * x.transpose() * &yv;
    let resid = &yv - &x * &beta;
    let k = regressors.len();
    DummyFit {
        beta: beta.rows(0, k).iter().copied().collect(),
        bread: inv.view((0, 0), (k, k)).into_owned(),
        resid: resid.iter().copied().collect(),
    }
}

/// CR1 covariance of the slopes of the explicit-dummy fit for one set of
/// cluster keys, with c = G/(G-1)·(N-1)/(N-K) and K the slope count.
/// The slope scores use the full explicit design, so this is the textbook
/// sandwich restricted to the slope block.
pub fn cr1_dummy(t: &Table, regressors: &[&str], fes: &[&str], keys: &[String]) -> DMatrix<f64> {
    let n = t.n_rows();
    let mut cols: Vec<Vec<f64>> = regressors
        .iter()
        .map(|r| t.num(r).unwrap().to_vec())
        .collect();
    for (k, fe) in fes.iter().enumerate() {
        let (codes, g) = groups(t.label(fe).unwrap());
        for level in usize::from(k > 0)..g {
            cols.push(
                codes
                    .iter()
                    .map(|&c| f64::from(u8::from(c == level)))
                    .collect(),
            );
        }
    }
    let p = cols.len();
    let x = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
    let fit = dummy_ols(t, "y", regressors, fes);
    let inv = (x.transpose() * &x).cholesky().unwrap().inverse();
    let (codes, g) = groups(keys);
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for level in 0..g {
        let mut s = DVector::<f64>::zeros(p);
        for i in (0..n).filter(|&i| codes[i] == level) {
            for j in 0..p {
                s[j] += x[(i, j)] * fit.resid[i];
            }
        }
        meat += &s * s.transpose();
    }
    let k = regressors.len();
    let c = g as f64 / (g as f64 - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    let full = &inv * meat * &inv * c;
    full.view((0, 0), (k, k)).into_owned()
}

/// Three-way cluster covariance by the signed sum over the seven non-empty
/// subsets of {c1, c2, c3}, each subset clustered on the joint key.
pub fn cgm3_dummy(t: &Table, regressors: &[&str], fes: &[&str], dims: [&str; 3]) -> DMatrix<f64> {
    let n = t.n_rows();
    let labels: Vec<&[String]> = dims.iter().map(|d| t.label(d).unwrap()).collect();
    let k = regressors.len();
    let mut v = DMatrix::<f64>::zeros(k, k);
    for subset in 1u32..8 {
        let members: Vec<usize> = (0..3).filter(|b| subset & (1 << b) != 0).collect();
        let keys: Vec<String> = (0..n)
            .map(|i| {
                members
                    .iter()
                    .map(|&m| labels[m][i].as_str())
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .collect();
        let sign = if members.len() % 2 == 1 { 1.0 } else { -1.0 };
        v += cr1_dummy(t, regressors, fes, &keys) * sign;
    }
    v
}
