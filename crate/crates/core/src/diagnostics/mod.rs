//! Causal-interpretation diagnostics: sample weights on each unit-level
//! difference, and an audit that splits a simulated TWFE estimate into the
//! effect-weighted sum, the covariate-heterogeneity term and the remaining
//! untreated-trend term.

mod dgp;

pub use dgp::{simulate, simulate_replication, DgpConfig, GroundTruth, Scenario, SimulatedPanel};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::{self, stack, twfe_residuals, within_design};
use crate::is_degenerate;
use crate::matrix::Matrix;
use crate::numerics::ols;
use crate::panel::{demean_columns, difference, within_transform, BalancedPanel};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CausalWeight {
    /// Unit index.
    pub unit: usize,
    pub k: usize,
    /// Start period label.
    pub t: i64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CausalWeightReport {
    pub weights: Vec<CausalWeight>,
    pub negative_mass: f64,
    pub positive_mass: f64,
    pub total_mass: f64,
    /// Number of weights below zero.
    pub n_negative: usize,
    /// `Σ Δ_k x Δ_k r`.
    pub denominator: f64,
}

/// `(Δ_k x, Δ_k r)` for every gap, with `r` the FWL residual of `x`.
fn differenced_pairs(
    panel: &BalancedPanel,
    y: &str,
    x: &str,
    covariates: &[&str],
) -> Result<(Vec<Matrix>, Vec<Matrix>, f64)> {
    let (_, r) = twfe_residuals(panel, y, x, covariates)?;
    let xs = panel.series(x)?;
    let mut dxs = Vec::new();
    let mut drs = Vec::new();
    let mut den = 0.0;
    for k in 1..panel.n_periods() {
        let dx = difference(xs, k)?;
        let dr = difference(&r, k)?;
        den += crate::numerics::dot(dx.as_slice(), dr.as_slice());
        dxs.push(dx);
        drs.push(dr);
    }
    let scale = panel.n_periods() as f64 * estimators::sum_sq(xs);
    if is_degenerate(den, scale) {
        return Err(Error::NoIdentifyingVariation("Σ Δx Δr is zero".into()));
    }
    Ok((dxs, drs, den))
}

/// Sample weights `Δ_k x_it Δ_k r_it / Σ Δx Δr` for every unit, gap and
/// start period. They sum to one but need not be nonnegative.
pub fn causal_weights(panel: &BalancedPanel, y: &str, x: &str, covariates: &[&str]) -> Result<CausalWeightReport> {
    let (dxs, drs, den) = differenced_pairs(panel, y, x, covariates)?;
    let mut weights = Vec::new();
    let (mut neg, mut pos, mut n_negative) = (0.0, 0.0, 0);
    for (j, (dx, dr)) in dxs.iter().zip(&drs).enumerate() {
        for t in 0..dx.cols() {
            for i in 0..dx.rows() {
                let omega = dx.get(i, t) * dr.get(i, t) / den;
                if omega < 0.0 {
                    neg += omega;
                    n_negative += 1;
                } else {
                    pos += omega;
                }
                weights.push(CausalWeight { unit: i, k: j + 1, t: panel.periods()[t], omega });
            }
        }
    }
    Ok(CausalWeightReport {
        weights,
        negative_mass: neg,
        positive_mass: pos,
        total_mass: neg + pos,
        n_negative,
        denominator: den,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AuditReport {
    /// TWFE estimate with the audited covariates.
    pub estimate: f64,
    /// `Σ τ_ikt ω̂_ikt`.
    pub tau_weighted_sum: f64,
    /// Untreated trends times `Δ_k w̃'(δ̂_kt − δ̂^FE)`, over `Σ Δx Δr`.
    pub bias_term: f64,
    /// Untreated trends times the part of `Δ_k x̃` not linearly predicted by
    /// `Δ_k w̃`, over `Σ Δx Δr`; sampling noise under parallel trends.
    pub trend_term: f64,
    /// `|estimate − (tau_weighted_sum + bias_term + trend_term)|`.
    pub identity_gap: f64,
    pub negative_mass: f64,
    pub denominator: f64,
}

/// Decompose a TWFE estimate on simulated data using its ground truth.
pub fn theorem2_audit(
    panel: &BalancedPanel,
    truth: Option<&GroundTruth>,
    y: &str,
    x: &str,
    covariates: &[&str],
) -> Result<AuditReport> {
    let truth = truth.ok_or(Error::NoGroundTruth)?;
    let (n, t) = (panel.n_units(), panel.n_periods());
    if truth.effect.rows() != n || truth.effect.cols() != t {
        return Err(Error::ShapeMismatch { expected: n * t, found: truth.effect.as_slice().len() });
    }
    let estimate = estimators::twfe(panel, y, x, covariates)?.beta;
    let (dxs, drs, den) = differenced_pairs(panel, y, x, covariates)?;
    let xs = panel.series(x)?;

    // δ̂^FE: TWFE slope of x on the covariates
    let q = covariates.len();
    let delta_fe: Vec<f64> = if q == 0 {
        Vec::new()
    } else {
        let fit = ols(&within_design(panel, covariates)?, &stack(&within_transform(xs)))?;
        fit.coefficients.iter().map(|c| c.unwrap_or(0.0)).collect()
    };
    let wtil = covariates.iter().map(|c| Ok(demean_columns(panel.series(c)?))).collect::<Result<Vec<_>>>()?;
    let xtil = demean_columns(xs);

    let (mut tau_sum, mut bias, mut trend_total, mut neg) = (0.0, 0.0, 0.0, 0.0);
    for (j, (dx, dr)) in dxs.iter().zip(&drs).enumerate() {
        let k = j + 1;
        for s in 0..t - k {
            // δ̂_kt: cross-sectional slope of Δ_k x̃ on Δ_k w̃
            let dw: Vec<Vec<f64>> =
                wtil.iter().map(|m| (0..n).map(|i| m.get(i, s + k) - m.get(i, s)).collect()).collect();
            let delta_kt: Vec<f64> = if q == 0 {
                Vec::new()
            } else {
                let dxt: Vec<f64> = (0..n).map(|i| xtil.get(i, s + k) - xtil.get(i, s)).collect();
                match ols(&Matrix::from_columns(n, &dw)?, &dxt) {
                    Ok(fit) => fit.coefficients.iter().map(|c| c.unwrap_or(0.0)).collect(),
                    Err(Error::NoIdentifyingVariation(_)) => vec![0.0; q],
                    Err(e) => return Err(e),
                }
            };
            for i in 0..n {
                let prod = dx.get(i, s) * dr.get(i, s);
                let tau = truth.effect.get(i, s + k);
                tau_sum += tau * prod;
                if prod < 0.0 {
                    neg += prod;
                }
                let trend = truth.untreated.get(i, s + k) - truth.untreated.get(i, s)
                    + (truth.effect.get(i, s + k) - truth.effect.get(i, s)) * xs.get(i, s);
                trend_total += trend * dr.get(i, s);
                let shift: f64 = (0..q).map(|c| dw[c][i] * (delta_kt[c] - delta_fe[c])).sum();
                bias += trend * shift;
            }
        }
    }
    let tau_weighted_sum = tau_sum / den;
    let bias_term = bias / den;
    let trend_term = (trend_total - bias) / den;
    Ok(AuditReport {
        estimate,
        tau_weighted_sum,
        bias_term,
        trend_term,
        identity_gap: (estimate - (tau_weighted_sum + bias_term + trend_term)).abs(),
        negative_mass: neg / den,
        denominator: den,
    })
}
