//! End-to-end commands driven by one TOML run configuration.
//!
//! Every command reads its inputs from `[paths]`, falling back to the files
//! `synth` writes under `<out>/synth/`, and writes CSV artifacts under
//! `<out>/<command>/`. Relative paths in the configuration resolve against
//! the configuration file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::econometrics::{
    run_spec, write_diagnostics, write_result, PanelKind, Preset, RegressionResult, RegressionSpec,
};
use crate::error::{Error, Result};
use crate::exposure::{
    assemble_panel, birth_cells, exporter_series, grid_month_panel, load_births, load_shorelines,
    load_trade, local_series, passthrough_panel, transported_series, write_births,
    write_shorelines, write_trade, Births, MonthlySeries, PanelInputs, Provenance, Window,
};
use crate::grid::field::write_lines;
use crate::grid::{
    load_concentration, load_mask, load_vector_field, select_senders, shoreline_buffer_mean,
    write_concentration, write_mask, write_vector_field, Cell, ConcentrationSeries, GridSpec, Mask,
    SenderConfig, VectorFieldSeries,
};
use crate::synth::{gen_bundle, gen_field_and_mask, DgpConfig};
use crate::table::Table;
use crate::time::{parse_date, YearMonth};
use crate::transport::{
    read_score_matrix, run_starts, run_traces, write_heatmap, write_score_matrix, write_trace_path,
    AdvectMetric, ReceiverIndex, RunPeriod, ScoreMatrix, TraceStats, TransportParams,
};

/// Input files. Unset entries default to `<out>/synth/<name>.csv`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub mask: Option<PathBuf>,
    pub currents: Option<PathBuf>,
    pub mp: Option<PathBuf>,
    pub births: Option<PathBuf>,
    pub trade: Option<PathBuf>,
    pub shorelines: Option<PathBuf>,
    pub aod: Option<PathBuf>,
    pub evaporation: Option<PathBuf>,
    /// Gridded covariates entered as `log_<name>` of their in-utero mean.
    pub controls: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExposureConfig {
    pub windows: Vec<String>,
    pub provenances: Vec<String>,
    /// Radius around exporter shorelines for their mean concentration.
    pub exporter_buffer_km: f64,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        ExposureConfig {
            windows: Window::NAMED.iter().map(|w| w.name.to_string()).collect(),
            provenances: Provenance::ALL
                .iter()
                .map(|p| p.name().to_string())
                .collect(),
            exporter_buffer_km: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressConfig {
    pub presets: Vec<String>,
    pub provenances: Vec<String>,
    /// Extra model files, run on the birth panel.
    pub specs: Vec<PathBuf>,
}

impl Default for RegressConfig {
    fn default() -> Self {
        RegressConfig {
            presets: Preset::ALL.iter().map(|p| p.name().to_string()).collect(),
            provenances: Provenance::ALL
                .iter()
                .map(|p| p.name().to_string())
                .collect(),
            specs: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceStart {
    pub lon: f64,
    pub lat: f64,
    pub date: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Explicit starts; when empty, the first two senders on the first day.
    pub starts: Vec<TraceStart>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub period: RunPeriod,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub transport: TransportParams,
    #[serde(default)]
    pub senders: SenderConfig,
    #[serde(default)]
    pub exposure: ExposureConfig,
    #[serde(default)]
    pub regress: RegressConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub synth: DgpConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub advect_metric: Option<AdvectMetric>,
}

impl RunConfig {
    pub fn from_toml(s: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::from_toml(&s, &base)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            // command-line paths are relative to the working directory
            self.out = std::env::current_dir()
                .map(|d| d.join(out))
                .unwrap_or_else(|_| out.clone());
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(s) = o.seed {
            self.synth.seed = s;
        }
        if let Some(m) = o.advect_metric {
            self.transport.advect_metric = m;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.transport.validate()?;
        self.senders.validate()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.windows()?;
        self.provenances(&self.exposure.provenances)?;
        self.provenances(&self.regress.provenances)?;
        for p in &self.regress.presets {
            Preset::by_name(p)?;
        }
        if !(self.exposure.exporter_buffer_km >= 0.0) {
            return Err(Error::Config(
                "exporter_buffer_km must be nonnegative".into(),
            ));
        }
        self.synth.validate(&self.grid)?;
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }

    pub fn sub_dir(&self, cmd: &str) -> PathBuf {
        self.out_dir().join(cmd)
    }

    /// Configured input, or the synthetic bundle's file of that name.
    fn input(&self, configured: &Option<PathBuf>, name: &str) -> PathBuf {
        configured.as_ref().map_or_else(
            || self.sub_dir("synth").join(format!("{name}.csv")),
            |p| self.resolve(p),
        )
    }

    /// Like [`RunConfig::input`], but an unset path whose default file is
    /// absent means the input is not used.
    fn optional_input(&self, configured: &Option<PathBuf>, name: &str) -> Result<Option<PathBuf>> {
        let p = self.input(configured, name);
        match (configured.is_some(), p.exists()) {
            (_, true) => Ok(Some(p)),
            (true, false) => Err(Error::Config(format!(
                "input file {} does not exist",
                p.display()
            ))),
            (false, false) => Ok(None),
        }
    }

    fn windows(&self) -> Result<Vec<Window>> {
        self.exposure
            .windows
            .iter()
            .map(|w| {
                Window::by_name(w)
                    .ok_or_else(|| Error::Config(format!("unknown exposure window `{w}`")))
            })
            .collect()
    }

    fn provenances(&self, names: &[String]) -> Result<Vec<Provenance>> {
        names
            .iter()
            .map(|p| p.parse::<Provenance>().map_err(Error::Config))
            .collect()
    }

    /// Senders for transported exposure from all grids (no shoreline buffer).
    fn all_senders(&self, mask: &Mask) -> Result<Vec<Cell>> {
        select_senders(
            mask,
            &SenderConfig {
                buffer_km: 0.0,
                ..self.senders
            },
        )
    }
}

fn require(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Config(format!(
            "input file {} does not exist",
            path.display()
        )))
    }
}

fn make_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_kv(path: &Path, rows: &[(String, String)]) -> Result<()> {
    write_lines(path, |w| {
        writeln!(w, "key,value")?;
        for (k, v) in rows {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    })
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Check(what()))
    }
}

/// What a command would read and write.
pub fn plan(cfg: &RunConfig, cmd: &str) -> Result<Vec<String>> {
    let mut lines = vec![
        format!("command: {cmd}"),
        format!("output: {}", cfg.sub_dir(cmd).display()),
    ];
    let input = |c: &Option<PathBuf>, n: &str| format!("input {n}: {}", cfg.input(c, n).display());
    let p = &cfg.paths;
    match cmd {
        "synth" => {
            lines.push(format!("seed: {}", cfg.synth.seed));
            lines.push(format!(
                "field: {} at {} m/s",
                cfg.synth.field.kind, cfg.synth.field.magnitude
            ));
            lines.push(format!("births: {}", cfg.synth.births.n));
        }
        "score" | "trace" => {
            lines.push(input(&p.mask, "mask"));
            lines.push(input(&p.currents, "currents"));
            lines.push(format!(
                "period: {} to {}",
                cfg.period.start, cfg.period.end
            ));
            lines.push(format!("advect metric: {}", cfg.transport.advect_metric));
        }
        "exposure" => {
            for (c, n) in [(&p.mask, "mask"), (&p.mp, "mp"), (&p.births, "births")] {
                lines.push(input(c, n));
            }
            lines.push(format!(
                "input score matrix: {}",
                cfg.sub_dir("score").join("score_matrix.csv").display()
            ));
            lines.push(format!("windows: {}", cfg.exposure.windows.join(" ")));
        }
        "regress" => {
            lines.push(format!("presets: {}", cfg.regress.presets.join(" ")));
            lines.push(format!(
                "provenances: {}",
                cfg.regress.provenances.join(" ")
            ));
        }
        "validate" => {}
        other => return Err(Error::Config(format!("unknown command `{other}`"))),
    }
    lines.push(format!("workers: {}", cfg.workers));
    Ok(lines)
}

fn load_grid(cfg: &RunConfig) -> Result<(Mask, VectorFieldSeries)> {
    let mask = load_mask(require(&cfg.input(&cfg.paths.mask, "mask"))?, &cfg.grid)?;
    let field = load_vector_field(
        require(&cfg.input(&cfg.paths.currents, "currents"))?,
        &cfg.grid,
        Some(&mask),
    )?;
    Ok((mask, field))
}

fn load_monthly(path: &Path, spec: &GridSpec, mask: &Mask) -> Result<ConcentrationSeries> {
    load_concentration(require(path)?, spec, Some(mask))?.to_monthly()
}

fn score_with(
    cfg: &RunConfig,
    mask: &Mask,
    field: &VectorFieldSeries,
) -> Result<(ScoreMatrix, TraceStats, Vec<Cell>, Vec<Cell>)> {
    let all = cfg.all_senders(mask)?;
    let far = select_senders(mask, &cfg.senders)?;
    let receivers = ReceiverIndex::new(cfg.grid, &mask.coastal_cells());
    let (m, stats) = run_traces(
        field,
        &all,
        &receivers,
        &cfg.period,
        &cfg.transport,
        cfg.workers,
    )?;
    Ok((m, stats, all, far))
}

pub fn cmd_synth(cfg: &RunConfig, checks: bool) -> Result<Vec<String>> {
    cfg.synth.validate(&cfg.grid)?;
    let (mask, field) = gen_field_and_mask(cfg.grid, &cfg.synth, &cfg.period)?;
    let matrix = if cfg.synth.passthrough.kappa > 0.0 {
        Some(score_with(cfg, &mask, &field)?.0)
    } else {
        None
    };
    let b = gen_bundle(mask, field, &cfg.synth, &cfg.period, matrix.as_ref())?;
    let dir = cfg.sub_dir("synth");
    make_dir(&dir)?;
    write_mask(&b.mask, &dir.join("mask.csv"))?;
    write_vector_field(&b.field, &dir.join("currents.csv"))?;
    write_concentration(&b.mp, &dir.join("mp.csv"))?;
    write_concentration(&b.evaporation, &dir.join("evaporation.csv"))?;
    write_concentration(&b.aod, &dir.join("aod.csv"))?;
    write_births(&b.births, &dir.join("births.csv"))?;
    b.truth.write_csv(&dir.join("truth.csv"))?;
    write_trade(&b.trade, &dir.join("trade.csv"))?;
    write_shorelines(&b.shorelines, &cfg.grid, &dir.join("shorelines.csv"))?;
    let n = b.births.records.len();
    write_kv(
        &dir.join("summary.csv"),
        &[
            ("seed".into(), cfg.synth.seed.to_string()),
            ("births".into(), n.to_string()),
            ("clamped".into(), b.clamped.to_string()),
            ("ocean_cells".into(), b.mask.n_ocean().to_string()),
        ],
    )?;
    if checks {
        check(b.clamped * 1000 < n, || {
            format!("{} of {n} birth probabilities clamped", b.clamped)
        })?;
        // the bundle must load back
        let (m2, f2) = load_grid(cfg)?;
        check(m2 == b.mask && f2.n_days() == b.field.n_days(), || {
            "synthetic grid does not reload".into()
        })?;
        check(load_births(&dir.join("births.csv"))? == b.births, || {
            "synthetic births do not reload".into()
        })?;
    }
    Ok(vec![format!(
        "synth: wrote {} births, {} clamped, to {}",
        n,
        b.clamped,
        dir.display()
    )])
}

pub fn cmd_score(cfg: &RunConfig, checks: bool) -> Result<Vec<String>> {
    let (mask, field) = load_grid(cfg)?;
    let (matrix, stats, all, far) = score_with(cfg, &mask, &field)?;
    let dir = cfg.sub_dir("score");
    make_dir(&dir)?;
    write_score_matrix(&matrix, &dir.join("score_matrix.csv"))?;
    write_lines(&dir.join("senders.csv"), |w| {
        writeln!(w, "lon,lat,beyond_buffer")?;
        for s in &all {
            let (lon, lat) = cfg.grid.center(*s);
            writeln!(w, "{lon},{lat},{}", u8::from(far.binary_search(s).is_ok()))?;
        }
        Ok(())
    })?;
    let mut kv: Vec<(String, String)> = vec![
        ("traces".into(), stats.traces.to_string()),
        ("steps".into(), stats.steps.to_string()),
        ("step_scores".into(), stats.scores.to_string()),
        ("pairs".into(), matrix.n_pairs().to_string()),
        ("months".into(), matrix.months().len().to_string()),
    ];
    kv.extend(
        stats
            .stops
            .iter()
            .map(|(k, v)| (format!("stop_{k}"), v.to_string())),
    );
    write_kv(&dir.join("trace_stats.csv"), &kv)?;
    if checks {
        let nm = matrix.months().len();
        check(matrix.n_entries() == matrix.n_pairs() * nm, || {
            "score matrix is not zero-filled".into()
        })?;
        check(
            matrix
                .pairs()
                .all(|(_, v)| v.iter().all(|x| x.is_finite() && *x >= 0.0)),
            || "negative or non-finite score".into(),
        )?;
        let back = read_score_matrix(&dir.join("score_matrix.csv"), &cfg.grid)?;
        check(back.pairs().eq(matrix.pairs()), || {
            "score matrix does not reload".into()
        })?;
    }
    Ok(vec![format!(
        "score: {} senders, {} pairs x {} months",
        all.len(),
        matrix.n_pairs(),
        matrix.months().len()
    )])
}

fn series_map<'a>(
    cells: impl IntoIterator<Item = &'a Cell>,
    f: impl Fn(Cell) -> MonthlySeries,
) -> BTreeMap<Cell, MonthlySeries> {
    cells.into_iter().map(|&c| (c, f(c))).collect()
}

/// Monthly series from a concentration per-period vector.
fn monthly_from(series: &ConcentrationSeries, vals: Vec<Option<f64>>) -> MonthlySeries {
    let months: Vec<YearMonth> = series.periods().iter().map(|p| p.month()).collect();
    let Some(&first) = months.first() else {
        return MonthlySeries::new(YearMonth::new(2000, 1).expect("valid"), vec![]);
    };
    let n = months.last().expect("nonempty").months_since(first) as usize + 1;
    let mut out = vec![None; n];
    for (m, v) in months.iter().zip(vals) {
        out[m.months_since(first) as usize] = v;
    }
    MonthlySeries::new(first, out)
}

/// Exposure series by provenance for the given cells.
fn exposure_maps(
    provs: &[Provenance],
    cells: &[Cell],
    mp: &ConcentrationSeries,
    matrix: &ScoreMatrix,
    far: &[Cell],
) -> Vec<(Provenance, BTreeMap<Cell, MonthlySeries>)> {
    provs
        .iter()
        .map(|&p| {
            let map = match p {
                Provenance::Local => series_map(cells, |c| local_series(mp, c)),
                Provenance::TransportedAll => transported_series(matrix, mp, cells).series,
                Provenance::Transported200km => {
                    transported_series(&matrix.restrict_senders(far), mp, cells).series
                }
            };
            (p, map)
        })
        .collect()
}

fn mode_country(births: &Births, cells: &[Cell]) -> BTreeMap<Cell, String> {
    let mut counts: BTreeMap<Cell, BTreeMap<&str, usize>> = BTreeMap::new();
    for (b, c) in births.records.iter().zip(cells) {
        *counts.entry(*c).or_default().entry(&b.country).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(c, m)| {
            let best = m
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .expect("nonempty");
            (c, best.0.to_string())
        })
        .collect()
}

pub fn cmd_exposure(cfg: &RunConfig, checks: bool) -> Result<Vec<String>> {
    let p = &cfg.paths;
    let spec = cfg.grid;
    let mask = load_mask(require(&cfg.input(&p.mask, "mask"))?, &spec)?;
    let mp = load_monthly(&cfg.input(&p.mp, "mp"), &spec, &mask)?;
    let births = load_births(require(&cfg.input(&p.births, "births"))?)?;
    let matrix = read_score_matrix(
        require(&cfg.sub_dir("score").join("score_matrix.csv"))?,
        &spec,
    )?;
    let far = select_senders(&mask, &cfg.senders)?;
    let provs = cfg.provenances(&cfg.exposure.provenances)?;

    let cells = birth_cells(&births, &mask)?;
    let mut unique = cells.clone();
    unique.sort();
    unique.dedup();
    let exposures = exposure_maps(&provs, &unique, &mp, &matrix, &far);

    let controls: Vec<(String, ConcentrationSeries)> = p
        .controls
        .iter()
        .map(|(n, path)| Ok((n.clone(), load_monthly(&cfg.resolve(path), &spec, &mask)?)))
        .collect::<Result<_>>()?;

    let exporters = match (
        cfg.optional_input(&p.trade, "trade")?,
        cfg.optional_input(&p.shorelines, "shorelines")?,
    ) {
        (Some(t), Some(s)) => {
            let flows = load_trade(&t)?;
            let shores = load_shorelines(&s, &spec)?;
            let mut country_mp = BTreeMap::new();
            for (country, cells) in &shores {
                let vals = shoreline_buffer_mean(&mp, cells, cfg.exposure.exporter_buffer_km)?;
                country_mp.insert(country.clone(), monthly_from(&mp, vals));
            }
            Some(exporter_series(&flows, &country_mp))
        }
        _ => None,
    };

    let inputs = PanelInputs {
        mask: &mask,
        exposures: exposures.iter().map(|(p, m)| (*p, m)).collect(),
        windows: cfg.windows()?,
        controls: controls.iter().map(|(n, s)| (n.clone(), s)).collect(),
        exporters: exporters.as_ref(),
    };
    let (panel, report) = assemble_panel(&births, &inputs)?;
    let dir = cfg.sub_dir("exposure");
    make_dir(&dir)?;
    panel.write_csv(&dir.join("births_panel.csv"))?;
    report.write_csv(&dir.join("exclusion_report.csv"))?;
    let pass = passthrough_panel(&matrix, &mp)?;
    pass.write_csv(&dir.join("passthrough_panel.csv"))?;
    let mut out = vec![format!(
        "exposure: {} of {} births retained; {} passthrough rows",
        report.retained,
        report.input,
        pass.n_rows()
    )];

    if let (Some(a), Some(e)) = (
        cfg.optional_input(&p.aod, "aod")?,
        cfg.optional_input(&p.evaporation, "evaporation")?,
    ) {
        let aod = load_monthly(&a, &spec, &mask)?;
        let evap = load_monthly(&e, &spec, &mask)?;
        let receivers = mask.coastal_cells();
        let maps = exposure_maps(&provs, &receivers, &mp, &matrix, &far);
        let t = grid_month_panel(
            &receivers,
            &spec,
            &mode_country(&births, &cells),
            &maps.iter().map(|(p, m)| (*p, m)).collect::<Vec<_>>(),
            &aod,
            &evap,
            matrix.months(),
        )?;
        t.write_csv(&dir.join("grid_month_panel.csv"))?;
        out.push(format!("exposure: {} grid-month rows", t.n_rows()));
    }
    if checks {
        check(report.retained + report.excluded() == report.input, || {
            "exclusion report does not add up to the input births".into()
        })?;
        for prov in &provs {
            for w in &inputs.windows {
                let name = format!("log_mp_{prov}_{}", w.name);
                check(panel.has(&name), || format!("panel lacks column {name}"))?;
            }
        }
    }
    Ok(out)
}

fn load_panel(cfg: &RunConfig, kind: PanelKind) -> Result<Table> {
    let name = match kind {
        PanelKind::Births => "births_panel.csv",
        PanelKind::Passthrough => "passthrough_panel.csv",
        PanelKind::GridMonth => "grid_month_panel.csv",
    };
    Table::read_csv(require(&cfg.sub_dir("exposure").join(name))?)
}

fn check_result(r: &RegressionResult) -> Result<()> {
    let v = &r.vcov;
    let scale = v.abs().max().max(f64::MIN_POSITIVE);
    check((v - v.transpose()).abs().max() <= 1e-12 * scale, || {
        format!("{}: covariance not symmetric", r.name)
    })?;
    check(r.terms.iter().all(|t| t.se >= 0.0), || {
        format!("{}: negative standard error", r.name)
    })?;
    let min_eig = v.clone().symmetric_eigen().eigenvalues.min();
    check(min_eig >= -1e-10 * scale, || {
        format!("{}: covariance not positive semidefinite", r.name)
    })
}

pub fn cmd_regress(cfg: &RunConfig, checks: bool) -> Result<Vec<String>> {
    let presets: Vec<Preset> = cfg
        .regress
        .presets
        .iter()
        .map(|p| Preset::by_name(p))
        .collect::<Result<_>>()?;
    let provs = cfg.provenances(&cfg.regress.provenances)?;
    let extra: Vec<RegressionSpec> = cfg
        .regress
        .specs
        .iter()
        .map(|p| RegressionSpec::load(&cfg.resolve(p)))
        .collect::<Result<_>>()?;
    let mut panels: BTreeMap<&str, Table> = BTreeMap::new();
    let mut jobs: Vec<(String, PanelKind, RegressionSpec)> = Vec::new();
    for p in &presets {
        if p.uses_provenance() {
            for prov in &provs {
                jobs.push((format!("{p}_{prov}"), p.panel(), p.spec(*prov)));
            }
        } else {
            jobs.push((p.name().to_string(), p.panel(), p.spec(Provenance::Local)));
        }
    }
    for s in extra {
        jobs.push((s.name.clone(), PanelKind::Births, s));
    }
    let dir = cfg.sub_dir("regress");
    make_dir(&dir)?;
    let mut summary = Vec::new();
    let mut out = Vec::new();
    for (label, kind, spec) in jobs {
        let key = match kind {
            PanelKind::Births => "births",
            PanelKind::Passthrough => "passthrough",
            PanelKind::GridMonth => "grid_month",
        };
        if !panels.contains_key(key) {
            panels.insert(key, load_panel(cfg, kind)?);
        }
        let r = run_spec(&panels[key], &spec)
            .map_err(|e| Error::Config(format!("regression {label}: {e}")))?;
        write_result(&r, &dir.join(format!("{label}.csv")))?;
        write_diagnostics(&r, &dir.join(format!("{label}_diagnostics.csv")))?;
        if checks {
            check_result(&r)?;
        }
        for t in &r.terms {
            summary.push(format!(
                "{label},{},{},{},{},{},{}",
                t.term, t.estimate, t.se, t.t, t.p, r.n
            ));
        }
        out.push(format!(
            "regress: {label}: {} terms, n = {}",
            r.terms.len(),
            r.n
        ));
    }
    write_lines(&dir.join("summary.csv"), |w| {
        writeln!(w, "model,term,estimate,se,t,p,n")?;
        for l in &summary {
            writeln!(w, "{}", l.replace("NaN", "NA"))?;
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn cmd_trace(cfg: &RunConfig, checks: bool) -> Result<Vec<String>> {
    let (mask, field) = load_grid(cfg)?;
    let starts: Vec<(Cell, NaiveDate)> = if cfg.trace.starts.is_empty() {
        cfg.all_senders(&mask)?
            .into_iter()
            .take(2)
            .map(|c| (c, cfg.period.start))
            .collect()
    } else {
        cfg.trace
            .starts
            .iter()
            .map(|s| {
                let cell = cfg
                    .grid
                    .locate_center(s.lon, s.lat)
                    .map_err(Error::Config)?;
                let day = parse_date(&s.date).map_err(Error::Config)?;
                Ok((cell, day))
            })
            .collect::<Result<_>>()?
    };
    let receivers = ReceiverIndex::new(cfg.grid, &mask.ocean_cells());
    let traces = run_starts(&field, &starts, &receivers, &cfg.transport, cfg.workers)?;
    let dir = cfg.sub_dir("trace");
    make_dir(&dir)?;
    for (k, t) in traces.iter().enumerate() {
        write_trace_path(t, &dir.join(format!("trace_{}.csv", k + 1)))?;
        write_heatmap(t, &receivers, &dir.join(format!("heatmap_{}.csv", k + 1)))?;
    }
    write_lines(&dir.join("starts.csv"), |w| {
        writeln!(w, "trace,lon,lat,date,steps,stop")?;
        for (k, t) in traces.iter().enumerate() {
            let (lon, lat) = cfg.grid.center(t.sender);
            writeln!(
                w,
                "{},{lon},{lat},{},{},{}",
                k + 1,
                t.start_day,
                t.states.len(),
                t.stop
            )?;
        }
        Ok(())
    })?;
    if checks {
        for t in &traces {
            check(t.states.len() <= cfg.transport.max_steps, || {
                "trace longer than max_steps".into()
            })?;
            check(
                t.scores.iter().all(|s| s.value > 0.0 && s.value <= 1.0),
                || "step score outside (0, 1]".into(),
            )?;
        }
    }
    Ok(vec![format!(
        "trace: {} traces written to {}",
        traces.len(),
        dir.display()
    )])
}

/// Checks the configuration and every input that is present.
pub fn cmd_validate(cfg: &RunConfig) -> Result<Vec<String>> {
    cfg.validate()?;
    let mut out = vec!["validate: configuration ok".to_string()];
    let p = &cfg.paths;
    if let Some(m) = cfg.optional_input(&p.mask, "mask")? {
        let mask = load_mask(&m, &cfg.grid)?;
        out.push(format!("validate: mask has {} ocean cells", mask.n_ocean()));
        if let Some(c) = cfg.optional_input(&p.currents, "currents")? {
            let field = load_vector_field(&c, &cfg.grid, Some(&mask))?;
            if let Some(missing) = crate::transport::missing_coverage(&field, &cfg.period) {
                return Err(Error::MissingCoverage(missing));
            }
            out.push(format!("validate: currents cover {} days", field.n_days()));
        }
        if let Some(c) = cfg.optional_input(&p.mp, "mp")? {
            let mp = load_monthly(&c, &cfg.grid, &mask)?;
            out.push(format!("validate: mp covers {} months", mp.periods().len()));
        }
    }
    if let Some(b) = cfg.optional_input(&p.births, "births")? {
        out.push(format!(
            "validate: {} births",
            load_births(&b)?.records.len()
        ));
    }
    for (n, path) in &p.controls {
        require(&cfg.resolve(path)).map_err(|e| Error::Config(format!("control {n}: {e}")))?;
    }
    Ok(out)
}

/// Runs `synth`, `score`, `exposure` and `regress` in order.
pub fn run_all(cfg: &RunConfig, checks: bool) -> Result<Vec<String>> {
    let mut out = cmd_synth(cfg, checks)?;
    out.extend(cmd_score(cfg, checks)?);
    out.extend(cmd_exposure(cfg, checks)?);
    out.extend(cmd_regress(cfg, checks)?);
    Ok(out)
}
