use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quantile bins of one column. `edges[j-1]` closes bin `j`; the last bin is
/// open. Ascending bins hold values `≤` their edge, descending bins values
/// `≥` their edge, so bin 1 holds the smallest (or largest) values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSet {
    pub column: String,
    pub k: usize,
    pub edges: Vec<f64>,
    /// 1-based bin left out of the indicators.
    pub reference: usize,
    pub descending: bool,
}

impl BinSet {
    /// 1-based bin of a value. Ties at an edge go to the lower bin.
    pub fn bin_of(&self, x: f64) -> usize {
        1 + if self.descending {
            self.edges.iter().filter(|&&e| x < e).count()
        } else {
            self.edges.iter().filter(|&&e| x > e).count()
        }
    }

    /// Bins that get an indicator column, in order.
    pub fn indicator_bins(&self) -> Vec<usize> {
        (1..=self.k).filter(|&b| b != self.reference).collect()
    }
}

/// `k` bins at the inverse-ECDF sample quantiles of `values`.
pub fn quantile_bins(
    column: &str,
    values: &[f64],
    k: usize,
    reference: usize,
    descending: bool,
) -> Result<(BinSet, Vec<usize>)> {
    if k < 2 || reference == 0 || reference > k {
        return Err(Error::Param(format!(
            "bins on `{column}`: need k ≥ 2 and reference in 1..={k}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Param(format!(
            "bins on `{column}`: non-finite value"
        )));
    }
    let mut sorted = values.to_vec();
    if descending {
        sorted.sort_by(|a, b| b.total_cmp(a));
    } else {
        sorted.sort_by(f64::total_cmp);
    }
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::TooFewDistinct {
            column: column.to_string(),
            distinct: distinct.len(),
            k,
        });
    }
    let n = sorted.len();
    let edges = (1..k).map(|j| sorted[(j * n).div_ceil(k) - 1]).collect();
    let set = BinSet {
        column: column.to_string(),
        k,
        edges,
        reference,
        descending,
    };
    let assign = values.iter().map(|&v| set.bin_of(v)).collect();
    Ok((set, assign))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deciles_of_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let (set, bins) = quantile_bins("x", &v, 10, 10, false).unwrap();
        assert_eq!(
            set.edges,
            (1..10).map(|j| 10.0 * j as f64).collect::<Vec<_>>()
        );
        assert_eq!(bins[9], 1);
        assert_eq!(bins[10], 2);
        assert_eq!(bins[99], 10);
        assert_eq!(set.indicator_bins(), (1..10).collect::<Vec<_>>());
    }

    #[test]
    fn descending_puts_largest_first() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let (_, bins) = quantile_bins("x", &v, 10, 10, true).unwrap();
        assert_eq!(bins[99], 1);
        assert_eq!(bins[90], 1);
        assert_eq!(bins[89], 2);
        assert_eq!(bins[0], 10);
    }

    #[test]
    fn constant_column_is_rejected() {
        let err = quantile_bins("x", &[2.0; 50], 10, 10, false).unwrap_err();
        assert!(err.to_string().contains("smaller k"));
    }

    proptest! {
        #[test]
        fn counts_are_balanced(seed in any::<u64>(), n in 20usize..500, k in 2usize..12) {
            // distinct values in a seeded order
            let mut v: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1_000_003) as f64 + i as f64 * 1e-7).collect();
            v.dedup();
            prop_assume!(v.len() >= k);
            let (_, bins) = quantile_bins("x", &v, k, 1, false).unwrap();
            let mut counts = vec![0usize; k];
            for b in &bins { counts[b - 1] += 1; }
            let m = v.len() as f64 / k as f64;
            prop_assert!(counts.iter().all(|&c| (c as f64 - m).abs() <= 1.0));
            // sort-based oracle: rank r (0-based) falls in bin floor(r*k/n)+1 boundaries
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            for (r, &i) in idx.iter().enumerate() {
                let want = (1..=k).find(|&j| r < (j * v.len()).div_ceil(k)).unwrap();
                prop_assert_eq!(bins[i], want);
            }
        }
    }
}
