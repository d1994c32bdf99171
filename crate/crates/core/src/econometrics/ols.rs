use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A column is dropped as collinear when its component orthogonal to the
/// columns kept before it is below this fraction of its reference norm.
pub const COLLINEAR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Indices of the columns used, in input order.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    /// Coefficients of the kept columns.
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    /// (X'X)^{-1} over the kept columns.
    pub bread: DMatrix<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least squares by modified Gram-Schmidt with one reorthogonalization pass.
///
/// `ref_norms` gives the scale against which each column's residual norm is
/// judged; columns that were residualized beforehand should pass their norms
/// from before that step. Defaults to the columns' own norms.
pub fn ols(x: &[Vec<f64>], y: &[f64], ref_norms: Option<&[f64]>) -> Result<OlsFit> {
    let n = y.len();
    if x.iter().any(|c| c.len() != n) {
        return Err(Error::Param("regressor and outcome lengths differ".into()));
    }
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    for (j, col) in x.iter().enumerate() {
        let reference = ref_norms.map_or_else(|| dot(col, col).sqrt(), |r| r[j]);
        let mut v = col.clone();
        let mut r = vec![0.0; q.len() + 1];
        for _ in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let c = dot(qk, &v);
                r[k] += c;
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if !(reference > 0.0) || !(norm > COLLINEAR_TOL * reference) {
            dropped.push(j);
            continue;
        }
        r[q.len()] = norm;
        v.iter_mut().for_each(|vi| *vi /= norm);
        q.push(v);
        r_cols.push(r);
        kept.push(j);
    }
    if kept.is_empty() {
        return Err(Error::NoRegressors);
    }
    let k = kept.len();
    let r = DMatrix::from_fn(k, k, |i, j| if i <= j { r_cols[j][i] } else { 0.0 });
    let qty = DMatrix::from_fn(k, 1, |i, _| dot(&q[i], y));
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Param("singular triangular factor".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Param("singular triangular factor".into()))?;
    let bread = &r_inv * r_inv.transpose();
    let mut residuals = y.to_vec();
    for (b, &j) in beta.iter().zip(&kept) {
        for (e, xi) in residuals.iter_mut().zip(&x[j]) {
            *e -= b * xi;
        }
    }
    Ok(OlsFit {
        kept,
        dropped,
        beta: beta.iter().copied().collect(),
        residuals,
        bread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::{RngCore, SeedableRng};
    use rand_pcg::Pcg64;

    fn unif(rng: &mut Pcg64) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    #[test]
    fn exact_fit() {
        let x = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let fit = ols(&x, &[2.0, 4.0, 6.0, 8.0], None).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-14);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-13));
    }

    #[test]
    fn duplicate_column_is_dropped() {
        let a = vec![1.0, 2.0, 3.0, 5.0];
        let fit = ols(&[a.clone(), vec![1.0; 4], a], &[1.0, 0.0, 2.0, 3.0], None).unwrap();
        assert_eq!(fit.kept, [0, 1]);
        assert_eq!(fit.dropped, [2]);
        assert!(matches!(
            ols(&[vec![0.0; 4]], &[1.0; 4], None),
            Err(Error::NoRegressors)
        ));
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = Pcg64::seed_from_u64(11);
        let x: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..100).map(|_| unif(&mut rng)).collect())
            .collect();
        let y: Vec<f64> = (0..100)
            .map(|i| x[0][i] - 2.0 * x[1][i] + 0.5 * x[2][i] + 0.1 * unif(&mut rng))
            .collect();
        let fit = ols(&x, &y, None).unwrap();
        let xm = DMatrix::from_fn(100, 3, |i, j| x[j][i]);
        let ym = DMatrix::from_fn(100, 1, |i, _| y[i]);
        let xtx = xm.transpose() * &xm;
        let b = xtx.clone().lu().solve(&(xm.transpose() * ym)).unwrap();
        for j in 0..3 {
            assert!((fit.beta[j] - b[j]).abs() <= 1e-9 * b[j].abs());
        }
        let inv = xtx.try_inverse().unwrap();
        assert!((&fit.bread - inv).abs().max() < 1e-9);
    }
}
