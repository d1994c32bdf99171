#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;
use std::path::PathBuf;

use drift_attrib::econometrics::{run_spec, Preset, RegressionResult, RegressionSpec};
use drift_attrib::exposure::{
    assemble_panel, local_series, passthrough_panel, MonthlySeries, PanelInputs, Provenance, Window,
};
use drift_attrib::grid::{select_senders, Cell, Mask};
use drift_attrib::pipeline::RunConfig;
use drift_attrib::synth::{
    gen_birth_panel, gen_current_field, gen_mask, gen_mp, gen_passthrough, period_months,
};
use drift_attrib::transport::{run_traces, ReceiverIndex, ScoreMatrix};

/// A configuration shipped in the repository's `configs/` directory.
pub fn shipped_config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Synthetic births with local exposure for one seed of `cfg`, regressed
/// with `model`. Also returns the number of clamped birth probabilities.
pub fn birth_run(cfg: &RunConfig, seed: u64, model: &RegressionSpec) -> (RegressionResult, usize) {
    let mask = gen_mask(cfg.grid, cfg.synth.coast_width);
    let (first, last) = period_months(&cfg.period);
    let n_months = last.months_since(first) as usize + 1;
    let mp = gen_mp(&mask, &cfg.synth.mp, first, n_months, seed).unwrap();
    let local: BTreeMap<Cell, MonthlySeries> = mask
        .ocean_cells()
        .into_iter()
        .map(|c| (c, local_series(&mp, c)))
        .collect();
    let panel = gen_birth_panel(
        &mask,
        (Provenance::Local, &local),
        &cfg.synth.births,
        (first, last),
        seed,
    )
    .unwrap();
    let inputs = PanelInputs {
        mask: &mask,
        exposures: vec![(Provenance::Local, &local)],
        windows: Window::NAMED.to_vec(),
        controls: vec![],
        exporters: None,
    };
    let (table, _) = assemble_panel(&panel.births, &inputs).unwrap();
    (run_spec(&table, model).unwrap(), panel.clamped)
}

pub fn preset_run(cfg: &RunConfig, seed: u64, preset: Preset) -> (RegressionResult, usize) {
    birth_run(cfg, seed, &preset.spec(Provenance::Local))
}

pub struct PassthroughWorld {
    pub mask: Mask,
    pub matrix: ScoreMatrix,
}

/// Score matrix of the configured field from lattice senders to coastal cells.
pub fn passthrough_world(cfg: &RunConfig) -> PassthroughWorld {
    let mask = gen_mask(cfg.grid, cfg.synth.coast_width);
    let field = gen_current_field(
        &mask,
        &cfg.synth.field,
        cfg.period.start,
        cfg.period.n_days(),
        cfg.synth.seed,
    )
    .unwrap();
    let senders = select_senders(&mask, &cfg.senders).unwrap();
    let receivers = ReceiverIndex::new(cfg.grid, &mask.coastal_cells());
    let (matrix, _) = run_traces(
        &field,
        &senders,
        &receivers,
        &cfg.period,
        &cfg.transport,
        cfg.workers,
    )
    .unwrap();
    PassthroughWorld { mask, matrix }
}

/// Mixed concentrations for one seed, regressed with the eq5 preset.
pub fn passthrough_run(w: &PassthroughWorld, cfg: &RunConfig, seed: u64) -> RegressionResult {
    let (first, last) = period_months(&cfg.period);
    let n_months = last.months_since(first) as usize + 1;
    let mp = gen_mp(&w.mask, &cfg.synth.mp, first, n_months, seed).unwrap();
    let mixed = gen_passthrough(&mp, &w.matrix, &cfg.synth.passthrough, seed).unwrap();
    let panel = passthrough_panel(&w.matrix, &mixed).unwrap();
    run_spec(&panel, &Preset::Eq5.spec(Provenance::Local)).unwrap()
}

/// Interaction coefficients for current bins 1 (strongest) through 10, the
/// reference bin entering as 0.
pub fn passthrough_profile(r: &RegressionResult) -> Vec<f64> {
    let mut coef: Vec<f64> = (1..=9)
        .map(|j| {
            r.term(&format!("current_bin{j}_x_log_mp_sender"))
                .map_or(f64::NAN, |t| t.estimate)
        })
        .collect();
    coef.push(0.0);
    coef
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Spearman correlation between bin rank (1 = strongest) and coefficient.
pub fn profile_spearman(profile: &[f64]) -> f64 {
    let ranks: Vec<f64> = (1..=profile.len()).map(|k| k as f64).collect();
    spearman(&ranks, profile)
}

/// Every file under `dir`, relative path to contents.
pub fn read_tree(dir: &std::path::Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
