use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::bins::{quantile_bins, BinSet};
use super::fe::{absorb_fixed_effects, factorize, Factor, DEFAULT_MAX_ITER, DEFAULT_TOL};
use super::ols::ols;
use super::spec::RegressionSpec;
use super::vcov::cluster_vcov;
use crate::error::{Error, Result};
use crate::grid::field::write_lines;
use crate::table::Table;

pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Clone, PartialEq)]
pub struct TermEstimate {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub name: String,
    pub terms: Vec<TermEstimate>,
    /// Covariance of the reported (scaled) estimates.
    pub vcov: DMatrix<f64>,
    /// Terms dropped as collinear.
    pub dropped: Vec<String>,
    pub n: usize,
    /// Rows removed by filters or missing values.
    pub excluded_rows: usize,
    pub clusters: Vec<usize>,
    pub fe_iterations: usize,
    pub fe_singletons: usize,
    pub r2_within: f64,
    pub psd_repaired: bool,
    /// Every standard error is zero.
    pub degenerate: bool,
    pub bins: Vec<BinSet>,
}

impl RegressionResult {
    pub fn term(&self, name: &str) -> Option<&TermEstimate> {
        self.terms.iter().find(|t| t.term == name)
    }
}

pub fn run_spec(panel: &Table, spec: &RegressionSpec) -> Result<RegressionResult> {
    spec.validate()?;
    let numeric = spec.numeric_columns();
    let cols: Vec<&[f64]> = numeric
        .iter()
        .map(|c| panel.num(c))
        .collect::<Result<_>>()?;
    for c in spec.fixed_effects.iter().chain(&spec.clusters) {
        panel.column(c)?;
    }
    let weight = spec.weight.as_deref().map(|w| panel.num(w)).transpose()?;
    let rows: Vec<usize> = (0..panel.n_rows())
        .filter(|&i| cols.iter().all(|c| c[i].is_finite()))
        .filter(|&i| weight.is_none_or(|w| w[i] > 0.0))
        .collect();
    let data = panel.select_rows(&rows);
    let mut keep: Vec<usize> = (0..data.n_rows()).collect();
    for f in &spec.filters {
        let c = data.num(&f.column)?;
        keep.retain(|&i| f.keeps(c[i]));
    }
    let data = data.select_rows(&keep);
    let n = data.n_rows();
    let excluded_rows = panel.n_rows() - n;
    if n == 0 {
        return Err(Error::EmptyPanel(format!(
            "regression `{}` has no rows after filtering",
            spec.name
        )));
    }
    if excluded_rows > 0 {
        log::info!(
            "regress: {}: {excluded_rows} of {} rows excluded",
            spec.name,
            panel.n_rows()
        );
    }

    let mut names: Vec<String> = Vec::new();
    let mut design: Vec<Vec<f64>> = Vec::new();
    for r in &spec.regressors {
        names.push(r.clone());
        design.push(data.num(r)?.to_vec());
    }
    for it in &spec.interactions {
        let (a, b) = (data.num(&it.left)?, data.num(&it.right)?);
        names.push(it.term());
        design.push(a.iter().zip(b).map(|(x, y)| x * y).collect());
    }
    let mut bin_sets = Vec::new();
    for bs in &spec.bins {
        let (set, assign) = quantile_bins(
            &bs.column,
            data.num(&bs.column)?,
            bs.k,
            bs.reference,
            bs.descending,
        )?;
        let ind = set.indicator_bins();
        for &b in &ind {
            names.push(format!("{}_bin{b}", bs.column));
            design.push(
                assign
                    .iter()
                    .map(|&a| if a == b { 1.0 } else { 0.0 })
                    .collect(),
            );
        }
        if let Some(v) = &bs.interact {
            let x = data.num(v)?;
            for &b in &ind {
                names.push(format!("{}_bin{b}_x_{v}", bs.column));
                design.push(
                    assign
                        .iter()
                        .zip(x)
                        .map(|(&a, &xi)| if a == b { xi } else { 0.0 })
                        .collect(),
                );
            }
        }
        bin_sets.push(set);
    }
    if spec.fixed_effects.is_empty() {
        names.insert(0, INTERCEPT.into());
        design.insert(0, vec![1.0; n]);
    }

    let factors: Vec<Factor> = spec
        .fixed_effects
        .iter()
        .map(|c| Ok(factorize(c, data.column(c)?)))
        .collect::<Result<_>>()?;
    let fe_singletons = factors.iter().map(Factor::singletons).sum();
    let w: Option<Vec<f64>> = spec
        .weight
        .as_deref()
        .map(|c| data.num(c).map(<[f64]>::to_vec))
        .transpose()?;
    let ref_norms: Vec<f64> = design
        .iter()
        .map(|c| {
            c.iter()
                .enumerate()
                .map(|(i, x)| w.as_ref().map_or(1.0, |w| w[i]) * x * x)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut all = design;
    all.insert(0, data.num(&spec.outcome)?.to_vec());
    let absorbed =
        absorb_fixed_effects(all, &factors, w.as_deref(), DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let mut cols = absorbed.columns;
    if let Some(w) = &w {
        for c in &mut cols {
            for (x, wi) in c.iter_mut().zip(w) {
                *x *= wi.sqrt();
            }
        }
    }
    let y = cols.remove(0);
    let fit = ols(&cols, &y, Some(&ref_norms))?;
    let dropped: Vec<String> = fit.dropped.iter().map(|&j| names[j].clone()).collect();
    for d in &dropped {
        log::warn!("regress: {}: dropped collinear term `{d}`", spec.name);
    }

    let cl: Vec<Factor> = spec
        .clusters
        .iter()
        .map(|c| Ok(factorize(c, data.column(c)?)))
        .collect::<Result<_>>()?;
    let xk: Vec<&[f64]> = fit.kept.iter().map(|&j| cols[j].as_slice()).collect();
    let v = cluster_vcov(&xk, &fit.residuals, &fit.bread, &cl)?;
    let df = cl.iter().map(|f| f.n_levels).min().expect("clusters") as f64 - 1.0;
    let tdist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Param(e.to_string()))?;
    let s = spec.scale;
    let terms: Vec<TermEstimate> = fit
        .kept
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let se = v.matrix[(k, k)].max(0.0).sqrt();
            let t = if se > 0.0 { fit.beta[k] / se } else { f64::NAN };
            let p = if t.is_finite() {
                2.0 * tdist.sf(t.abs())
            } else {
                f64::NAN
            };
            TermEstimate {
                term: names[j].clone(),
                estimate: fit.beta[k] * s,
                se: se * s.abs(),
                t,
                p,
            }
        })
        .collect();
    let degenerate = terms.iter().all(|t| t.se == 0.0);
    if degenerate {
        log::warn!("regress: {}: all standard errors are zero", spec.name);
    }
    let ssr: f64 = fit.residuals.iter().map(|e| e * e).sum();
    let sst: f64 = y.iter().map(|v| v * v).sum();
    Ok(RegressionResult {
        name: spec.name.clone(),
        terms,
        vcov: v.matrix * (s * s),
        dropped,
        n,
        excluded_rows,
        clusters: v.clusters,
        fe_iterations: absorbed.iterations,
        fe_singletons,
        r2_within: if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN },
        psd_repaired: v.psd_repaired,
        degenerate,
        bins: bin_sets,
    })
}

pub const RESULT_HEADER: &str = "term,estimate,se,t,p,n,clusters_dim1,clusters_dim2,clusters_dim3";

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "NA".into()
    }
}

pub fn write_result(r: &RegressionResult, path: &Path) -> Result<()> {
    let dims: Vec<String> = (0..3)
        .map(|d| r.clusters.get(d).map_or("NA".into(), |g| g.to_string()))
        .collect();
    write_lines(path, |w| {
        writeln!(w, "{RESULT_HEADER}")?;
        for t in &r.terms {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                t.term,
                num(t.estimate),
                num(t.se),
                num(t.t),
                num(t.p),
                r.n,
                dims.join(",")
            )?;
        }
        Ok(())
    })
}

/// `key,value` lines describing the fit.
pub fn write_diagnostics(r: &RegressionResult, path: &Path) -> Result<()> {
    write_lines(path, |w| {
        writeln!(w, "key,value")?;
        writeln!(w, "n,{}", r.n)?;
        writeln!(w, "excluded_rows,{}", r.excluded_rows)?;
        writeln!(w, "fe_iterations,{}", r.fe_iterations)?;
        writeln!(w, "fe_singletons,{}", r.fe_singletons)?;
        writeln!(w, "r2_within,{}", num(r.r2_within))?;
        writeln!(w, "psd_repaired,{}", r.psd_repaired)?;
        writeln!(w, "degenerate,{}", r.degenerate)?;
        writeln!(w, "dropped_terms,{}", r.dropped.join(" "))?;
        for b in &r.bins {
            let e: Vec<String> = b.edges.iter().map(|x| x.to_string()).collect();
            writeln!(w, "bin_edges_{},{}", b.column, e.join(" "))?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::spec::{BinSpec, Interaction};
    use rand_core::{RngCore, SeedableRng};
    use rand_pcg::Pcg64;

    fn unif(rng: &mut Pcg64) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    fn spec(regressors: &[&str], fe: &[&str], clusters: &[&str]) -> RegressionSpec {
        RegressionSpec {
            name: "t".into(),
            outcome: "y".into(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            interactions: vec![],
            bins: vec![],
            fixed_effects: fe.iter().map(|s| s.to_string()).collect(),
            clusters: clusters.iter().map(|s| s.to_string()).collect(),
            filters: vec![],
            scale: 1.0,
            weight: None,
        }
    }

    fn panel(n: usize, seed: u64) -> Table {
        let mut rng = Pcg64::seed_from_u64(seed);
        let a: Vec<u64> = (0..n).map(|_| rng.next_u64() % 12).collect();
        let b: Vec<u64> = (0..n).map(|_| rng.next_u64() % 8).collect();
        let x1: Vec<f64> = (0..n).map(|i| unif(&mut rng) + 0.1 * a[i] as f64).collect();
        let x2: Vec<f64> = (0..n).map(|_| unif(&mut rng)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                0.5 * x1[i] - 0.2 * x2[i] + 0.3 * a[i] as f64 - 0.1 * b[i] as f64 + unif(&mut rng)
            })
            .collect();
        let mut t = Table::new();
        t.push_label("a", a.iter().map(|v| format!("a{v}")).collect())
            .unwrap();
        t.push_label("b", b.iter().map(|v| format!("b{v}")).collect())
            .unwrap();
        t.push_num("x1", x1).unwrap();
        t.push_num("x2", x2).unwrap();
        t.push_num("y", y).unwrap();
        t
    }

    #[test]
    fn constant_outcome_is_degenerate() {
        let mut t = panel(100, 1);
        t.push_num("y", vec![3.0; 100]).unwrap();
        let r = run_spec(&t, &spec(&["x1", "x2"], &["a"], &["a"])).unwrap();
        assert!(r.degenerate);
        assert!(r
            .terms
            .iter()
            .all(|t| t.estimate.abs() < 1e-12 && t.se == 0.0));
    }

    #[test]
    fn missing_values_and_filters_drop_rows() {
        let mut t = panel(100, 2);
        let mut x = t.num("x2").unwrap().to_vec();
        x[0] = f64::NAN;
        t.push_num("x2", x).unwrap();
        let mut s = spec(&["x1", "x2"], &["a"], &["a"]);
        let r = run_spec(&t, &s).unwrap();
        assert_eq!((r.n, r.excluded_rows), (99, 1));
        s.filters.push(crate::econometrics::Filter {
            column: "x1".into(),
            op: crate::econometrics::FilterOp::Gt,
            value: 1e9,
        });
        assert!(matches!(run_spec(&t, &s), Err(Error::EmptyPanel(_))));
    }

    #[test]
    fn intercept_without_fixed_effects() {
        let t = panel(200, 3);
        let r = run_spec(&t, &spec(&["x2"], &[], &["a"])).unwrap();
        assert_eq!(r.terms[0].term, INTERCEPT);
    }

    #[test]
    fn interactions_and_bins_are_named() {
        let t = panel(300, 4);
        let mut s = spec(&["x1"], &["a"], &["a", "b"]);
        s.interactions.push(Interaction::new("x1", "x2"));
        s.bins.push(BinSpec {
            column: "x2".into(),
            k: 4,
            reference: 4,
            descending: true,
            interact: Some("x1".into()),
        });
        let r = run_spec(&t, &s).unwrap();
        let names: Vec<&str> = r.terms.iter().map(|t| t.term.as_str()).collect();
        assert_eq!(
            names,
            [
                "x1",
                "x1_x_x2",
                "x2_bin1",
                "x2_bin2",
                "x2_bin3",
                "x2_bin1_x_x1",
                "x2_bin2_x_x1",
                "x2_bin3_x_x1"
            ]
        );
        assert_eq!(r.clusters, [12, 8]);
    }

    #[test]
    fn weights_match_replicated_rows() {
        let t = panel(120, 5);
        let w: Vec<f64> = (0..120).map(|i| (1 + i % 3) as f64).collect();
        let mut tw = t.clone();
        tw.push_num("w", w.clone()).unwrap();
        let mut s = spec(&["x1", "x2"], &["a", "b"], &["a"]);
        s.weight = Some("w".into());
        let rw = run_spec(&tw, &s).unwrap();
        let rows: Vec<usize> = (0..120)
            .flat_map(|i| std::iter::repeat_n(i, w[i] as usize))
            .collect();
        let rep = run_spec(
            &t.select_rows(&rows),
            &spec(&["x1", "x2"], &["a", "b"], &["a"]),
        )
        .unwrap();
        for (a, b) in rw.terms.iter().zip(&rep.terms) {
            assert!((a.estimate - b.estimate).abs() < 1e-8);
        }
    }

    #[test]
    fn result_csv_layout() {
        let t = panel(100, 6);
        let r = run_spec(&t, &spec(&["x1"], &["a"], &["a"])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_result(&r, &p).unwrap();
        let s = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], RESULT_HEADER);
        assert!(lines[1].starts_with("x1,") && lines[1].ends_with(",100,12,NA,NA"));
        write_diagnostics(&r, &dir.path().join("d.csv")).unwrap();
    }
}
