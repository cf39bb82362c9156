//! Two-way fixed-effects (TWFE) estimation for balanced panels.
//!
//! The crate computes the TWFE coefficient in closed form, decomposes it
//! exactly into weighted averages of k-period first-difference estimates and
//! of two-period TWFE estimates, and provides the generalized estimators built
//! from those pieces: gap-restricted aggregation and per-pair covariate
//! adjustment. Causal-weight diagnostics, a synthetic data generator with
//! known treatment effects, and clustered standard errors round it out.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and the parallel Monte Carlo harness live in the `twfe` crate.

#![allow(clippy::needless_range_loop)]
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod decomposition;
pub mod diagnostics;
mod error;
pub mod estimators;
pub mod generalized;
pub mod inference;
mod matrix;
pub mod numerics;
pub mod panel;

pub use decomposition::{
    count_pairs, fd_decomposition, pairwise_decomposition, verify_equivalence, weighted_summary, EquivalenceReport,
    FdComponent, FdDecomposition, PairComponent, PairwiseDecomposition, WeightedSummary,
};
pub use diagnostics::{
    causal_weights, simulate, simulate_replication, theorem2_audit, AuditReport, CausalWeight, CausalWeightReport,
    DgpConfig, GroundTruth, Scenario, SimulatedPanel,
};
pub use error::{Error, Result};
pub use estimators::{fd, twfe, twfe_iv, twfe_multivariate, twfe_two_period, Estimate, PeriodsUsed, VectorEstimate};
pub use generalized::{
    gap_restricted, generalized_twfe, pretrend_covariate, CovariateSpec, GapRange, GeneralizedComponent,
    GeneralizedEstimate, PretrendConfig, WeightScheme,
};
pub use inference::{cluster_robust_se, StackedRegression, StackedRow};
pub use matrix::Matrix;
pub use numerics::{fwl_residualize, ols, pairwise_cross_moment, LeastSquaresFit};
pub use panel::{demean, k_difference, BalanceMode, BalancedPanel, DemeanedSeries, DifferencedSeries, PanelBuilder};

/// Relative threshold below which an identifying sum of squares is treated
/// as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub(crate) fn is_degenerate(denominator: f64, scale: f64) -> bool {
    !(denominator > DEGENERACY_TOL * scale) || denominator <= 0.0
}
