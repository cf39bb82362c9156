//! Cluster-robust standard errors.
//!
//! Every scalar estimator is recast as one pooled, possibly weighted,
//! no-intercept regression on stacked residualized differences (one row per
//! unit and pair or gap). A single CR0 sandwich with a `G/(G−1)` factor and
//! clustering on the unit's cluster label is applied to that regression.
//! First-stage uncertainty from per-pair residualization is not propagated.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::twfe_residuals;
use crate::generalized::{pair_fits, CovariateSpec, GapRange, WeightScheme};
use crate::is_degenerate;
use crate::numerics;
use crate::panel::{demean_columns, BalancedPanel};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StackedRow {
    pub response: f64,
    pub regressor: f64,
    pub weight: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StackedRegression {
    pub rows: Vec<StackedRow>,
}

impl StackedRegression {
    /// Pooled weighted slope `Σ w x y / Σ w x²`.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn slope(&self) -> Result<f64> {
        let (num, den) = self.moments();
        if !(den > 0.0) {
            return Err(Error::NoIdentifyingVariation("stacked regressor is zero".into()));
        }
        Ok(num / den)
    }

    fn moments(&self) -> (f64, f64) {
        self.rows.iter().fold((0.0, 0.0), |(n, d), r| {
            (n + r.weight * r.regressor * r.response, d + r.weight * r.regressor * r.regressor)
        })
    }

    /// One row per unit and pair `s > t` of FWL-residualized levels.
    pub fn twfe(panel: &BalancedPanel, y: &str, x: &str, covariates: &[&str]) -> Result<Self> {
        let (ry, rx) = twfe_residuals(panel, y, x, covariates)?;
        let mut rows = Vec::with_capacity(panel.n_units() * panel.n_periods() * panel.n_periods() / 2);
        for i in 0..panel.n_units() {
            let cluster = panel.clusters()[i];
            let (a, b) = (ry.row(i), rx.row(i));
            for t in 0..a.len() {
                for s in t + 1..a.len() {
                    rows.push(StackedRow { response: a[s] - a[t], regressor: b[s] - b[t], weight: 1.0, cluster });
                }
            }
        }
        Ok(Self { rows })
    }

    /// Demeaned gap-`k` differences for every `k` in `range`.
    pub fn gap_range(panel: &BalancedPanel, y: &str, x: &str, range: GapRange) -> Result<Self> {
        let _ = GapRange::new(range.k_min, range.k_max, panel.n_periods())?;
        let ys = panel.series(y)?;
        let xs = panel.series(x)?;
        let mut rows = Vec::new();
        for k in range.k_min..=range.k_max {
            let dy = demean_columns(&crate::panel::difference(ys, k)?);
            let dx = demean_columns(&crate::panel::difference(xs, k)?);
            for i in 0..panel.n_units() {
                let cluster = panel.clusters()[i];
                for t in 0..dx.cols() {
                    rows.push(StackedRow { response: dy.get(i, t), regressor: dx.get(i, t), weight: 1.0, cluster });
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn fd(panel: &BalancedPanel, y: &str, x: &str, k: usize) -> Result<Self> {
        if k == 0 || k >= panel.n_periods() {
            return Err(Error::GapOutOfRange { gap: k, periods: panel.n_periods() });
        }
        Self::gap_range(panel, y, x, GapRange { k_min: k, k_max: k })
    }

    /// Per-pair residuals of the generalized estimator. Under the raw scheme
    /// each pair is reweighted by `raw / ssr` so the pooled slope reproduces
    /// the raw-weighted average.
    pub fn generalized(
        panel: &BalancedPanel,
        y: &str,
        x: &str,
        spec: &CovariateSpec,
        range: GapRange,
        scheme: WeightScheme,
    ) -> Result<Self> {
        let mut rows = Vec::new();
        for f in pair_fits(panel, y, x, spec, range)? {
            if is_degenerate(f.ssr_x, f.scale) {
                continue;
            }
            let weight = match scheme {
                WeightScheme::Ssr => 1.0,
                WeightScheme::Raw => f.raw_ss / f.ssr_x,
            };
            for i in 0..panel.n_units() {
                rows.push(StackedRow { response: f.ry[i], regressor: f.rx[i], weight, cluster: panel.clusters()[i] });
            }
        }
        Ok(Self { rows })
    }
}

/// Clustered sandwich standard error of the pooled slope.
pub fn cluster_robust_se(stacked: &StackedRegression) -> Result<f64> {
    let n_clusters = stacked.rows.iter().map(|r| r.cluster + 1).max().unwrap_or(0);
    let mut seen = vec![false; n_clusters];
    for r in &stacked.rows {
        seen[r.cluster] = true;
    }
    let g = seen.iter().filter(|&&s| s).count();
    if g < 2 {
        return Err(Error::SingleCluster);
    }
    let beta = stacked.slope()?;
    let (_, den) = stacked.moments();
    let mut scores = vec![0.0; n_clusters];
    for r in &stacked.rows {
        scores[r.cluster] += r.weight * r.regressor * (r.response - beta * r.regressor);
    }
    let meat: f64 = scores.iter().map(|s| s * s).sum();
    let g = g as f64;
    let var = g / (g - 1.0) * meat / (den * den);
    Ok(numerics::sqrt(var))
}

/// Two-sided 95% normal critical value.
pub const Z_975: f64 = 1.959_963_984_540_054;
