use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::table::Column;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Integer codes of a grouping column, numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub name: String,
    pub codes: Vec<u32>,
    pub n_levels: usize,
}

impl Factor {
    pub fn from_codes(name: impl Into<String>, codes: Vec<u32>) -> Factor {
        let n_levels = codes.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        Factor {
            name: name.into(),
            codes,
            n_levels,
        }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_levels];
        for &g in &self.codes {
            c[g as usize] += 1;
        }
        c
    }

    /// Groups with a single observation.
    pub fn singletons(&self) -> usize {
        self.counts().iter().filter(|&&c| c == 1).count()
    }

    /// Cross-classification of several factors.
    pub fn intersect(factors: &[&Factor]) -> Factor {
        let name = factors
            .iter()
            .map(|f| f.name.as_str())
            .collect::<Vec<_>>()
            .join("&");
        let Some((first, rest)) = factors.split_first() else {
            return Factor::from_codes(name, vec![]);
        };
        let mut codes = first.codes.clone();
        for f in rest {
            let mut seen: HashMap<(u32, u32), u32> = HashMap::new();
            for (c, &g) in codes.iter_mut().zip(&f.codes) {
                let next = seen.len() as u32;
                *c = *seen.entry((*c, g)).or_insert(next);
            }
        }
        Factor::from_codes(name, codes)
    }
}

pub fn factorize(name: &str, col: &Column) -> Factor {
    let mut seen: HashMap<String, u32> = HashMap::new();
    let codes = (0..col.len())
        .map(|i| {
            let next = seen.len() as u32;
            *seen.entry(col.key(i)).or_insert(next)
        })
        .collect();
    Factor {
        name: name.to_string(),
        codes,
        n_levels: seen.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Absorption {
    pub columns: Vec<Vec<f64>>,
    /// Sweeps over all FE dimensions, maximized over columns.
    pub iterations: usize,
}

struct Groups<'a> {
    codes: &'a [u32],
    wsum: Vec<f64>,
}

/// Residualizes each column on the fixed effects by alternating weighted
/// group demeaning. Stops when a full sweep moves no value by `tol` or more.
/// Columns are divided by their largest absolute value while sweeping, so
/// the stopping rule does not depend on the units of a column.
pub fn absorb_fixed_effects(
    columns: Vec<Vec<f64>>,
    factors: &[Factor],
    weights: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Absorption> {
    if factors.is_empty() {
        return Ok(Absorption {
            columns,
            iterations: 0,
        });
    }
    let n = factors[0].len();
    if factors.iter().any(|f| f.len() != n) || columns.iter().any(|c| c.len() != n) {
        return Err(Error::Param(
            "fixed-effect and data columns differ in length".into(),
        ));
    }
    let groups: Vec<Groups> = factors
        .iter()
        .map(|f| {
            let mut wsum = vec![0.0; f.n_levels];
            for (i, &g) in f.codes.iter().enumerate() {
                wsum[g as usize] += weights.map_or(1.0, |w| w[i]);
            }
            Groups {
                codes: &f.codes,
                wsum,
            }
        })
        .collect();

    let sweep = |x: &mut [f64]| -> f64 {
        let mut change = 0.0f64;
        for g in &groups {
            let mut sums = vec![0.0; g.wsum.len()];
            for (i, &c) in g.codes.iter().enumerate() {
                sums[c as usize] += weights.map_or(x[i], |w| w[i] * x[i]);
            }
            for (s, &w) in sums.iter_mut().zip(&g.wsum) {
                *s = if w > 0.0 { *s / w } else { 0.0 };
                change = change.max(s.abs());
            }
            for (xi, &c) in x.iter_mut().zip(g.codes) {
                *xi -= sums[c as usize];
            }
        }
        change
    };

    let results: Vec<Result<(Vec<f64>, usize)>> = columns
        .into_par_iter()
        .map(|mut x| {
            if groups.len() == 1 {
                sweep(&mut x);
                return Ok((x, 1));
            }
            let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let unit = if peak > 0.0 && peak.is_finite() {
                peak
            } else {
                1.0
            };
            x.iter_mut().for_each(|v| *v /= unit);
            let mut change = f64::INFINITY;
            for it in 1..=max_iter {
                change = sweep(&mut x);
                if change < tol {
                    x.iter_mut().for_each(|v| *v *= unit);
                    return Ok((x, it));
                }
            }
            Err(Error::NoConvergence {
                iterations: max_iter,
                max_change: change,
            })
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    let mut iterations = 0;
    for r in results {
        let (x, it) = r?;
        iterations = iterations.max(it);
        out.push(x);
    }
    Ok(Absorption {
        columns: out,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::{RngCore, SeedableRng};
    use rand_pcg::Pcg64;

    fn unif(rng: &mut Pcg64) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn factorize_numbers_by_first_appearance() {
        let f = factorize(
            "g",
            &Column::Label(vec!["b".into(), "a".into(), "b".into()]),
        );
        assert_eq!(f.codes, [0, 1, 0]);
        assert_eq!(f.n_levels, 2);
        assert_eq!(f.singletons(), 1);
        let g = Factor::from_codes("h", vec![0, 0, 1]);
        let x = Factor::intersect(&[&f, &g]);
        assert_eq!(x.codes, [0, 1, 2]);
    }

    #[test]
    fn one_dimension_is_one_exact_pass() {
        let f = Factor::from_codes("g", vec![0, 1, 0, 2, 1, 0]);
        let x = vec![1.0, 5.0, 2.0, 7.0, 3.0, 6.0];
        let a = absorb_fixed_effects(
            vec![x],
            std::slice::from_ref(&f),
            None,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert_eq!(a.iterations, 1);
        let r = &a.columns[0];
        for g in 0..3u32 {
            let m: f64 = f
                .codes
                .iter()
                .zip(r)
                .filter(|(&c, _)| c == g)
                .map(|(_, v)| v)
                .sum();
            assert!(m.abs() < 1e-14);
        }
        assert!((r[0] - (1.0 - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn nested_dimensions_match_the_finer_one() {
        let mut rng = Pcg64::seed_from_u64(3);
        let fine: Vec<u32> = (0..300).map(|_| (rng.next_u64() % 12) as u32).collect();
        let coarse: Vec<u32> = fine.iter().map(|g| g / 4).collect();
        let x: Vec<f64> = (0..300).map(|_| unif(&mut rng)).collect();
        let both = absorb_fixed_effects(
            vec![x.clone()],
            &[
                Factor::from_codes("c", coarse),
                Factor::from_codes("f", fine.clone()),
            ],
            None,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        let one = absorb_fixed_effects(
            vec![x],
            &[Factor::from_codes("f", fine)],
            None,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        for (a, b) in both.columns[0].iter().zip(&one.columns[0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn absorbing_twice_is_idempotent() {
        let mut rng = Pcg64::seed_from_u64(5);
        let a: Vec<u32> = (0..400).map(|_| (rng.next_u64() % 15) as u32).collect();
        let b: Vec<u32> = (0..400).map(|_| (rng.next_u64() % 9) as u32).collect();
        let fs = [Factor::from_codes("a", a), Factor::from_codes("b", b)];
        let x: Vec<f64> = (0..400).map(|_| unif(&mut rng) * 10.0).collect();
        let once = absorb_fixed_effects(vec![x], &fs, None, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let twice = absorb_fixed_effects(
            once.columns.clone(),
            &fs,
            None,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        let d = once.columns[0]
            .iter()
            .zip(&twice.columns[0])
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(d < DEFAULT_TOL);
    }

    #[test]
    fn non_convergence_reports_diagnostics() {
        let mut rng = Pcg64::seed_from_u64(9);
        let a: Vec<u32> = (0..200).map(|_| (rng.next_u64() % 20) as u32).collect();
        let b: Vec<u32> = (0..200).map(|_| (rng.next_u64() % 20) as u32).collect();
        let x: Vec<f64> = (0..200).map(|_| unif(&mut rng)).collect();
        let err = absorb_fixed_effects(
            vec![x],
            &[Factor::from_codes("a", a), Factor::from_codes("b", b)],
            None,
            1e-300,
            3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 3, .. }));
    }
}
