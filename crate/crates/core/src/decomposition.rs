//! Exact decompositions of the TWFE coefficient into first-difference
//! estimates by gap and into two-period estimates by pair, plus weighted
//! distribution summaries of the constituents.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::{self, gap_scale, gap_sums};
use crate::is_degenerate;
use crate::matrix::Matrix;
use crate::numerics;
use crate::panel::{demean_columns, BalancedPanel};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FdComponent {
    pub k: usize,
    /// `None` when the gap has no identifying variation.
    pub beta: Option<f64>,
    pub omega: f64,
    /// Number of unit-level differences, `N·(T−k)`.
    pub n_obs: usize,
    pub denominator: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FdDecomposition {
    pub components: Vec<FdComponent>,
    pub aggregate: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PairComponent {
    /// First period label.
    pub t: i64,
    /// Second period label, `s > t`.
    pub s: i64,
    pub beta: Option<f64>,
    pub omega: f64,
    pub n_obs: usize,
    pub denominator: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PairwiseDecomposition {
    /// In `(t, s)` lexicographic order.
    pub components: Vec<PairComponent>,
    pub aggregate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct WeightedSummary {
    pub mean: f64,
    pub sd: f64,
    pub p5: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p95: f64,
    /// Components with a defined estimate and positive weight.
    pub n_components: usize,
}

/// Anything that is a weighted collection of constituent estimates.
pub trait WeightedComponents {
    /// `(beta, omega)` for every component, `None` for undefined estimates.
    fn weighted_betas(&self) -> Vec<(Option<f64>, f64)>;
}

impl WeightedComponents for FdDecomposition {
    fn weighted_betas(&self) -> Vec<(Option<f64>, f64)> {
        self.components.iter().map(|c| (c.beta, c.omega)).collect()
    }
}

impl WeightedComponents for PairwiseDecomposition {
    fn weighted_betas(&self) -> Vec<(Option<f64>, f64)> {
        self.components.iter().map(|c| (c.beta, c.omega)).collect()
    }
}

/// `(beta, omega)` per component.
pub(crate) type Weighted = Vec<(Option<f64>, f64)>;

/// Turn `(numerator, denominator, scale)` triples into `(beta, omega)` with
/// degenerate entries zero-weighted; returns the aggregate as well.
pub(crate) fn normalize(parts: &[(f64, f64, f64)]) -> Result<(Weighted, f64)> {
    let live: Vec<bool> = parts.iter().map(|&(_, d, sc)| !is_degenerate(d, sc)).collect();
    let total: f64 = parts.iter().zip(&live).filter(|(_, &l)| l).map(|(p, _)| p.1).sum();
    if !live.iter().any(|&l| l) {
        return Err(Error::NoIdentifyingVariation("every component is degenerate".into()));
    }
    let mut aggregate = 0.0;
    let out = parts
        .iter()
        .zip(&live)
        .map(|(&(num, den, _), &l)| {
            if l {
                let beta = num / den;
                let omega = den / total;
                aggregate += omega * beta;
                (Some(beta), omega)
            } else {
                (None, 0.0)
            }
        })
        .collect();
    Ok((out, aggregate))
}

/// Weights and estimates of the k-period FD estimators, k = 1..T−1.
pub fn fd_decomposition(panel: &BalancedPanel, y: &str, x: &str) -> Result<FdDecomposition> {
    let xs = panel.series(x)?;
    let ytil = demean_columns(panel.series(y)?);
    let xtil = demean_columns(xs);
    let t = panel.n_periods();
    let parts: Vec<(f64, f64, f64)> = (1..t)
        .map(|k| {
            let (num, den) = gap_sums(&ytil, &xtil, k);
            (num, den, gap_scale(xs, k))
        })
        .collect();
    let (weighted, aggregate) = normalize(&parts)?;
    let components = weighted
        .into_iter()
        .zip(&parts)
        .enumerate()
        .map(|(j, ((beta, omega), p))| FdComponent {
            k: j + 1,
            beta,
            omega,
            n_obs: panel.n_units() * (t - j - 1),
            denominator: p.1,
        })
        .collect();
    Ok(FdDecomposition { components, aggregate })
}

/// `(Σ_i Δỹ Δx̃, Σ_i (Δx̃)², Σ_i x_is² + x_it²)` for columns `ti < si`.
pub(crate) fn pair_sums(ytil: &Matrix, xtil: &Matrix, xs: &Matrix, ti: usize, si: usize) -> (f64, f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut scale = 0.0;
    for i in 0..xtil.rows() {
        let dx = xtil.get(i, si) - xtil.get(i, ti);
        num += (ytil.get(i, si) - ytil.get(i, ti)) * dx;
        den += dx * dx;
        scale += xs.get(i, si) * xs.get(i, si) + xs.get(i, ti) * xs.get(i, ti);
    }
    (num, den, scale)
}

/// Weights and estimates of every two-period TWFE estimator `s > t`.
pub fn pairwise_decomposition(panel: &BalancedPanel, y: &str, x: &str) -> Result<PairwiseDecomposition> {
    let xs = panel.series(x)?;
    let ytil = demean_columns(panel.series(y)?);
    let xtil = demean_columns(xs);
    let t = panel.n_periods();
    let mut index = Vec::with_capacity(estimators::n_all_pairs(t));
    let mut parts = Vec::with_capacity(index.capacity());
    for ti in 0..t {
        for si in ti + 1..t {
            index.push((ti, si));
            parts.push(pair_sums(&ytil, &xtil, xs, ti, si));
        }
    }
    let (weighted, aggregate) = normalize(&parts)?;
    let periods = panel.periods();
    let components = weighted
        .into_iter()
        .zip(index.into_iter().zip(&parts))
        .map(|((beta, omega), ((ti, si), p))| PairComponent {
            t: periods[ti],
            s: periods[si],
            beta,
            omega,
            n_obs: panel.n_units(),
            denominator: p.1,
        })
        .collect();
    Ok(PairwiseDecomposition { components, aggregate })
}

/// Number of `(s, t)` pairs with `k_min <= s − t <= k_max` among `periods`.
pub fn count_pairs(periods: usize, k_min: usize, k_max: usize) -> Result<usize> {
    if k_min < 1 || k_min > k_max || k_max + 1 > periods {
        return Err(Error::InvalidGapRange { k_min, k_max, periods });
    }
    Ok((k_min..=k_max).map(|k| periods - k).sum())
}

/// Weighted mean, standard deviation and percentiles of the constituents.
///
/// Percentiles use the left-continuous inverse CDF: the smallest estimate
/// whose cumulative weight reaches the level.
pub fn weighted_summary<D: WeightedComponents + ?Sized>(decomp: &D) -> Result<WeightedSummary> {
    let mut items: Vec<(f64, f64)> =
        decomp.weighted_betas().into_iter().filter_map(|(b, w)| b.filter(|_| w > 0.0).map(|b| (b, w))).collect();
    if items.is_empty() {
        return Err(Error::EmptyWeights);
    }
    let total: f64 = items.iter().map(|p| p.1).sum();
    let mean = items.iter().map(|(b, w)| b * w).sum::<f64>() / total;
    let var = items.iter().map(|(b, w)| w * (b - mean) * (b - mean)).sum::<f64>() / total;
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let quantile = |q: f64| {
        let target = q * total;
        let slack = 1e-12 * total;
        let mut cum = 0.0;
        for (b, w) in &items {
            cum += w;
            if cum >= target - slack {
                return *b;
            }
        }
        items[items.len() - 1].0
    };
    Ok(WeightedSummary {
        mean,
        sd: numerics::sqrt(var),
        p5: quantile(0.05),
        p25: quantile(0.25),
        median: quantile(0.5),
        p75: quantile(0.75),
        p95: quantile(0.95),
        n_components: items.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EquivalenceReport {
    pub twfe: f64,
    pub fd_aggregate: f64,
    pub pairwise_aggregate: f64,
    /// Largest pairwise relative difference among the three numbers.
    pub max_relative_gap: f64,
}

pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compute the TWFE estimate three ways and report how far apart they are.
pub fn verify_equivalence(panel: &BalancedPanel, y: &str, x: &str) -> Result<EquivalenceReport> {
    let twfe = estimators::twfe(panel, y, x, &[])?.beta;
    let fd_aggregate = fd_decomposition(panel, y, x)?.aggregate;
    let pairwise_aggregate = pairwise_decomposition(panel, y, x)?.aggregate;
    let max_relative_gap = relative_gap(twfe, fd_aggregate)
        .max(relative_gap(twfe, pairwise_aggregate))
        .max(relative_gap(fd_aggregate, pairwise_aggregate));
    if !max_relative_gap.is_finite() {
        return Err(Error::NoIdentifyingVariation(format!("non-finite estimate for `{x}`")));
    }
    Ok(EquivalenceReport { twfe, fd_aggregate, pairwise_aggregate, max_relative_gap })
}
