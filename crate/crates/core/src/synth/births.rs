use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rng::{stream, SynthRng};
use crate::error::{Error, Result};
use crate::exposure::{
    window_exposure, BirthRecord, Births, MonthlySeries, Provenance, TradeFlow, Window,
};
use crate::grid::field::write_lines;
use crate::grid::{Cell, CellLocator, Mask};
use crate::time::YearMonth;

/// Linear-probability birth outcomes:
/// P(lbw) = base + Σ_w beta_w/1000 · (x_w − mean x_w) + admin1 + country-month + noise,
/// clamped to [0, 1], where x_w is the logged window exposure at the
/// birth's nearest ocean cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirthConfig {
    pub n: usize,
    pub base: f64,
    /// Per-1,000 slope for each named window.
    pub betas: BTreeMap<String, f64>,
    pub n_admin1: usize,
    pub n_countries: usize,
    pub admin1_sd: f64,
    pub country_month_sd: f64,
    pub noise_sd: f64,
    /// Log-scale mean and sd of the per-region covariates.
    pub fishing_hours: [f64; 2],
    pub seafood_spending: [f64; 2],
}

impl Default for BirthConfig {
    fn default() -> Self {
        BirthConfig {
            n: 50_000,
            base: 0.0276,
            betas: [("in_utero".to_string(), 0.37)].into_iter().collect(),
            n_admin1: 60,
            n_countries: 6,
            admin1_sd: 0.003,
            country_month_sd: 0.002,
            noise_sd: 0.0,
            fishing_hours: [3.0, 1.0],
            seafood_spending: [4.0, 0.5],
        }
    }
}

impl BirthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Param(format!("births: {m}")));
        if self.n == 0 {
            return bad("n must be positive");
        }
        if !(0.0..=1.0).contains(&self.base) {
            return bad("base must be a probability");
        }
        if self.n_admin1 == 0 || self.n_countries == 0 || self.n_countries > self.n_admin1 {
            return bad("need 1 <= n_countries <= n_admin1");
        }
        if [self.admin1_sd, self.country_month_sd, self.noise_sd]
            .iter()
            .any(|s| !(*s >= 0.0))
        {
            return bad("standard deviations must be nonnegative");
        }
        for w in self.betas.keys() {
            if Window::by_name(w).is_none() {
                return bad(&format!("unknown window `{w}`"));
            }
        }
        Ok(())
    }

    pub fn windows(&self) -> Vec<(Window, f64)> {
        self.betas
            .iter()
            .map(|(w, b)| (Window::by_name(w).expect("validated"), *b))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Truth {
    pub terms: Vec<(String, f64)>,
}

impl Truth {
    pub fn get(&self, term: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.0 == term).map(|t| t.1)
    }

    pub fn push(&mut self, term: impl Into<String>, value: f64) {
        self.terms.push((term.into(), value));
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_lines(path, |w| {
            writeln!(w, "term,true_value")?;
            for (t, v) in &self.terms {
                writeln!(w, "{t},{v}")?;
            }
            Ok(())
        })
    }

    pub fn read_csv(path: &Path) -> Result<Truth> {
        let mut rows = crate::grid::field::open_rows(path, &["term", "true_value"])?;
        let mut t = Truth::default();
        while let Some((row, rec)) = rows.next(2)? {
            t.push(
                &rec[0],
                crate::grid::field::parse_f64(path, row, "true_value", &rec[1])?,
            );
        }
        Ok(t)
    }
}

#[derive(Debug, Clone)]
pub struct BirthPanel {
    pub births: Births,
    pub truth: Truth,
    /// Draws whose probability fell outside [0, 1] before clamping.
    pub clamped: usize,
}

pub fn admin1_name(k: usize) -> String {
    format!("R{:03}", k + 1)
}

pub fn country_name(k: usize) -> String {
    format!("C{:02}", k + 1)
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Births on the land strip west of the ocean, with birth months drawn so
/// every named window lies inside `[first, last]`.
pub fn gen_birth_panel(
    mask: &Mask,
    exposure: (Provenance, &BTreeMap<Cell, MonthlySeries>),
    cfg: &BirthConfig,
    months: (YearMonth, YearMonth),
    seed: u64,
) -> Result<BirthPanel> {
    cfg.validate()?;
    let spec = *mask.spec();
    let coast = (0..spec.nlon)
        .find(|&i| (0..spec.nlat).any(|j| mask.is_ocean_at(i, j)))
        .unwrap_or(spec.nlon);
    if coast == 0 || coast == spec.nlon {
        return Err(Error::Param(
            "births need a land strip west of the ocean".into(),
        ));
    }
    let (first, last) = (months.0.offset(12), months.1.offset(-2));
    let span = last.months_since(first);
    if span < 0 {
        return Err(Error::Param(
            "birth months need at least 15 months of exposure coverage".into(),
        ));
    }
    let mut rng = SynthRng::new(seed, stream::BIRTHS);
    let admin_fx: Vec<f64> = (0..cfg.n_admin1)
        .map(|_| cfg.admin1_sd * rng.normal())
        .collect();
    let cm_fx: Vec<f64> = (0..cfg.n_countries * (span as usize + 1))
        .map(|_| cfg.country_month_sd * rng.normal())
        .collect();
    let region_cov: Vec<[f64; 2]> = (0..cfg.n_admin1)
        .map(|_| {
            let f = (cfg.fishing_hours[0] + cfg.fishing_hours[1] * rng.normal()).exp();
            let s = (cfg.seafood_spending[0] + cfg.seafood_spending[1] * rng.normal()).exp();
            [round4(f), round4(s)]
        })
        .collect();

    let lon_lo = spec.lon0 - spec.dlon / 2.0;
    let lon_hi = spec.lon_of(coast) - spec.dlon / 2.0;
    let lat_lo = spec.lat0 - spec.dlat / 2.0;
    let lat_hi = spec.lat_of(spec.nlat - 1) + spec.dlat / 2.0;
    let locator = CellLocator::new(spec, &mask.ocean_cells());
    let windows = cfg.windows();

    struct Draft {
        lon: f64,
        lat: f64,
        admin: usize,
        month: YearMonth,
        x: Vec<Option<f64>>,
        shock: f64,
    }
    let mut drafts = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let lon = round4(rng.range(lon_lo, lon_hi)).min(lon_hi - 1e-4);
        let lat = round4(rng.range(lat_lo, lat_hi)).min(lat_hi - 1e-4);
        let month = first.offset(rng.below(span as usize + 1) as i32);
        let admin = (((lat - lat_lo) / (lat_hi - lat_lo) * cfg.n_admin1 as f64) as usize)
            .min(cfg.n_admin1 - 1);
        let cell = locator.nearest(lon, lat).expect("ocean cells").0;
        let series = exposure.1.get(&cell);
        let x = windows
            .iter()
            .map(|(w, _)| series.and_then(|s| window_exposure(s, month, *w).ok()))
            .collect();
        drafts.push(Draft {
            lon,
            lat,
            admin,
            month,
            x,
            shock: cfg.noise_sd * rng.normal(),
        });
    }
    let means: Vec<f64> = (0..windows.len())
        .map(|k| {
            let (s, n) = drafts
                .iter()
                .filter_map(|d| d.x[k])
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n > 0 {
                s / n as f64
            } else {
                0.0
            }
        })
        .collect();

    let mut clamped = 0;
    let mut records = Vec::with_capacity(cfg.n);
    for (i, d) in drafts.into_iter().enumerate() {
        let country = d.admin * cfg.n_countries / cfg.n_admin1;
        let mi = d.month.months_since(first) as usize;
        let mut p =
            cfg.base + admin_fx[d.admin] + cm_fx[country * (span as usize + 1) + mi] + d.shock;
        for (k, (_, beta)) in windows.iter().enumerate() {
            if let Some(x) = d.x[k] {
                p += beta / 1000.0 * (x - means[k]);
            }
        }
        if !(0.0..=1.0).contains(&p) {
            clamped += 1;
        }
        let p = p.clamp(0.0, 1.0);
        let lbw = u8::from(rng.bernoulli(p));
        records.push(BirthRecord {
            id: (i + 1).to_string(),
            lon: d.lon,
            lat: d.lat,
            admin1: admin1_name(d.admin),
            country: country_name(country),
            birth_month: d.month,
            lbw,
            covariates: region_cov[d.admin].to_vec(),
        });
    }
    if clamped > 0 {
        log::warn!(
            "synth: {clamped} of {} birth probabilities clamped to [0, 1]",
            cfg.n
        );
    }
    let mut truth = Truth::default();
    truth.push("base", cfg.base);
    for (w, b) in &windows {
        truth.push(format!("log_mp_{}_{}", exposure.0, w.name), *b);
    }
    Ok(BirthPanel {
        births: Births {
            covariates: vec!["fishing_hours".into(), "seafood_spending".into()],
            records,
        },
        truth,
        clamped,
    })
}

/// Exporter countries `X1..Xn`, each owning a stretch of the westernmost
/// land column next to the ocean, and monthly trade from every region.
/// Shoreline cells of each exporter country.
pub type ExporterShores = BTreeMap<String, Vec<Cell>>;

pub fn gen_trade(
    mask: &Mask,
    n_admin1: usize,
    n_exporters: usize,
    months: (YearMonth, YearMonth),
    seed: u64,
) -> Result<(Vec<TradeFlow>, ExporterShores)> {
    let spec = *mask.spec();
    let coast = (0..spec.nlon)
        .find(|&i| (0..spec.nlat).any(|j| mask.is_ocean_at(i, j)))
        .unwrap_or(spec.nlon);
    if coast == 0 || coast == spec.nlon || n_exporters == 0 || n_exporters > spec.nlat {
        return Err(Error::Param(
            "trade needs a land strip and 1..=nlat exporters".into(),
        ));
    }
    let shore_col = coast - 1;
    let mut shorelines = BTreeMap::new();
    for k in 0..n_exporters {
        let rows = (k * spec.nlat / n_exporters)..((k + 1) * spec.nlat / n_exporters);
        shorelines.insert(
            format!("X{}", k + 1),
            rows.map(|j| spec.cell(shore_col, j)).collect(),
        );
    }
    let mut rng = SynthRng::new(seed, stream::TRADE);
    let mut flows = Vec::new();
    for a in 0..n_admin1 {
        for k in 0..n_exporters {
            for m in YearMonth::range_inclusive(months.0, months.1) {
                flows.push(TradeFlow {
                    importer: admin1_name(a),
                    exporter: format!("X{}", k + 1),
                    month: m,
                    value: round4(rng.normal().exp() * 100.0),
                });
            }
        }
    }
    Ok((flows, shorelines))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::synth::fields::gen_mask;

    fn setup() -> (Mask, BTreeMap<Cell, MonthlySeries>, YearMonth) {
        let spec = GridSpec::new(0.0, 0.0, 0.25, 0.25, 8, 20).unwrap();
        let mask = gen_mask(spec, 2);
        let first = YearMonth::new(2016, 1).unwrap();
        let series = mask
            .ocean_cells()
            .into_iter()
            .map(|c| {
                (
                    c,
                    MonthlySeries::new(
                        first,
                        (0..36)
                            .map(|k| Some(1.0 + ((c.0 + k) % 5) as f64))
                            .collect(),
                    ),
                )
            })
            .collect();
        (mask, series, first)
    }

    #[test]
    fn calibrated_base_rate() {
        let (mask, series, first) = setup();
        let cfg = BirthConfig {
            n: 200_000,
            betas: BTreeMap::new(),
            admin1_sd: 0.0,
            country_month_sd: 0.0,
            ..Default::default()
        };
        let p = gen_birth_panel(
            &mask,
            (Provenance::Local, &series),
            &cfg,
            (first, first.offset(35)),
            1,
        )
        .unwrap();
        let rate =
            p.births.records.iter().map(|b| b.lbw as f64).sum::<f64>() / cfg.n as f64 * 1000.0;
        assert!((rate - 27.6).abs() < 1.0, "{rate}");
        assert_eq!(p.clamped, 0);
        assert_eq!(p.truth.get("base"), Some(0.0276));
    }

    #[test]
    fn births_sit_on_land_with_covered_windows() {
        let (mask, series, first) = setup();
        let cfg = BirthConfig {
            n: 500,
            ..Default::default()
        };
        let p = gen_birth_panel(
            &mask,
            (Provenance::Local, &series),
            &cfg,
            (first, first.offset(35)),
            2,
        )
        .unwrap();
        let spec = mask.spec();
        for b in &p.births.records {
            assert!(b.lon < spec.lon_of(2) - spec.dlon / 2.0);
            assert!(
                b.birth_month.months_since(first) >= 12 && b.birth_month.months_since(first) <= 33
            );
        }
        assert_eq!(p.truth.get("log_mp_local_in_utero"), Some(0.37));
        let again = gen_birth_panel(
            &mask,
            (Provenance::Local, &series),
            &cfg,
            (first, first.offset(35)),
            2,
        )
        .unwrap();
        assert_eq!(p.births, again.births);
    }

    #[test]
    fn truth_round_trip() {
        let mut t = Truth::default();
        t.push("a", 0.37);
        t.push("b", -1e-3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("truth.csv");
        t.write_csv(&p).unwrap();
        assert_eq!(Truth::read_csv(&p).unwrap(), t);
    }

    #[test]
    fn trade_covers_every_region_and_month() {
        let (mask, _, first) = setup();
        let (flows, shore) = gen_trade(&mask, 4, 3, (first, first.offset(2)), 0).unwrap();
        assert_eq!(flows.len(), 4 * 3 * 3);
        assert_eq!(shore.len(), 3);
        assert!(shore.values().flatten().all(|&c| !mask.is_ocean(c)));
    }
}
