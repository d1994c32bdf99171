//! Linear models with absorbed fixed effects and cluster-robust inference.
//!
//! Fixed effects are swept out by alternating weighted group demeaning,
//! coefficients come from a Gram-Schmidt least-squares solve that drops
//! collinear columns, and covariances use the CR1 sandwich, combined across
//! cluster dimensions by inclusion-exclusion.

mod bins;
mod fe;
mod ols;
mod run;
mod spec;
mod vcov;

pub use bins::{quantile_bins, BinSet};
pub use fe::{absorb_fixed_effects, factorize, Absorption, Factor, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use ols::{ols, OlsFit, COLLINEAR_TOL};
pub use run::{
    run_spec, write_diagnostics, write_result, RegressionResult, TermEstimate, INTERCEPT,
    RESULT_HEADER,
};
pub use spec::{BinSpec, Filter, FilterOp, Interaction, PanelKind, Preset, RegressionSpec};
pub use vcov::{cluster_vcov, sandwich, ClusterVcov};
