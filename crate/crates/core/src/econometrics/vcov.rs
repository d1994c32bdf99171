use nalgebra::DMatrix;

use super::fe::Factor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterVcov {
    /// Symmetric and positive semidefinite.
    pub matrix: DMatrix<f64>,
    /// The estimate before eigenvalue truncation.
    pub raw: DMatrix<f64>,
    pub clusters: Vec<usize>,
    /// Whether negative eigenvalues were truncated.
    pub psd_repaired: bool,
}

/// CR1 sandwich for one grouping: c · B (Σ_g s_g s_g') B with
/// c = G/(G-1) · (N-1)/(N-K).
pub fn sandwich(x: &[&[f64]], resid: &[f64], bread: &DMatrix<f64>, group: &Factor) -> DMatrix<f64> {
    let (n, k) = (resid.len(), x.len());
    let g = group.n_levels;
    let mut scores = DMatrix::<f64>::zeros(g, k);
    for (j, col) in x.iter().enumerate() {
        for i in 0..n {
            scores[(group.codes[i] as usize, j)] += col[i] * resid[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let c = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k as f64));
    (bread * meat * bread) * c
}

/// Cluster-robust covariance over one to three dimensions. Several
/// dimensions combine by inclusion-exclusion over their intersections,
/// each term carrying its own small-sample factor.
pub fn cluster_vcov(
    x: &[&[f64]],
    resid: &[f64],
    bread: &DMatrix<f64>,
    dims: &[Factor],
) -> Result<ClusterVcov> {
    if dims.is_empty() || dims.len() > 3 {
        return Err(Error::Param(format!(
            "expected 1 to 3 cluster dimensions, got {}",
            dims.len()
        )));
    }
    for d in dims {
        if d.n_levels < 2 {
            return Err(Error::SingleCluster(d.name.clone()));
        }
    }
    let k = x.len();
    let mut raw = DMatrix::<f64>::zeros(k, k);
    for mask in 1u32..(1 << dims.len()) {
        let members: Vec<&Factor> = (0..dims.len())
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| &dims[b])
            .collect();
        let sign = if members.len() % 2 == 1 { 1.0 } else { -1.0 };
        let group = if members.len() == 1 {
            members[0].clone()
        } else {
            Factor::intersect(&members)
        };
        raw += sandwich(x, resid, bread, &group) * sign;
    }
    let raw = (&raw + raw.transpose()) * 0.5;
    let mut matrix = raw.clone();
    let mut psd_repaired = false;
    if dims.len() > 1 {
        let eig = raw.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l < 0.0) {
            psd_repaired = true;
            let vals = eig.eigenvalues.map(|l| l.max(0.0));
            matrix =
                &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
            matrix = (&matrix + matrix.transpose()) * 0.5;
            log::warn!("regress: multi-way covariance was not positive semidefinite; negative eigenvalues set to zero");
        }
    }
    Ok(ClusterVcov {
        matrix,
        raw,
        clusters: dims.iter().map(|d| d.n_levels).collect(),
        psd_repaired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::ols::ols;
    use rand_core::{RngCore, SeedableRng};
    use rand_pcg::Pcg64;

    fn unif(rng: &mut Pcg64) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    fn problem(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Pcg64) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = vec![vec![1.0; n], (0..n).map(|_| unif(&mut rng)).collect()];
        let y = (0..n)
            .map(|i| 0.3 + x[1][i] + unif(&mut rng) * (1.0 + x[1][i].abs()))
            .collect();
        (x, y, rng)
    }

    #[test]
    fn singleton_clusters_give_hc1() {
        let (x, y, _) = problem(60, 1);
        let fit = ols(&x, &y, None).unwrap();
        let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
        let own = Factor::from_codes("i", (0..60).collect());
        let v = cluster_vcov(&cols, &fit.residuals, &fit.bread, &[own]).unwrap();
        let mut meat = DMatrix::<f64>::zeros(2, 2);
        for (i, e) in fit.residuals.iter().enumerate() {
            let xi = DMatrix::from_column_slice(2, 1, &[x[0][i], x[1][i]]);
            meat += &xi * xi.transpose() * e.powi(2);
        }
        let hc1 = &fit.bread * meat * &fit.bread * (60.0 / 58.0);
        assert!((&v.matrix - hc1).abs().max() < 1e-12);
    }

    #[test]
    fn identical_dimensions_collapse_to_one_way() {
        let (x, y, mut rng) = problem(80, 2);
        let fit = ols(&x, &y, None).unwrap();
        let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
        let g = Factor::from_codes("g", (0..80).map(|_| (rng.next_u64() % 7) as u32).collect());
        let one =
            cluster_vcov(&cols, &fit.residuals, &fit.bread, std::slice::from_ref(&g)).unwrap();
        let two = cluster_vcov(&cols, &fit.residuals, &fit.bread, &[g.clone(), g]).unwrap();
        assert!((&one.raw - &two.raw).abs().max() < 1e-12);
    }

    #[test]
    fn one_cluster_is_an_error() {
        let (x, y, _) = problem(10, 3);
        let fit = ols(&x, &y, None).unwrap();
        let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
        let g = Factor::from_codes("country", vec![0; 10]);
        assert!(matches!(
            cluster_vcov(&cols, &fit.residuals, &fit.bread, &[g]),
            Err(Error::SingleCluster(_))
        ));
    }
}
