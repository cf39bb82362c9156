//! Primitive estimators: multiperiod TWFE, k-period first differences,
//! two-period TWFE, and the multivariate and IV variants in pairwise form.
//!
//! Everything is computed from demeaned sums. Dummy-variable regressions
//! are only used as test oracles.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::is_degenerate;
use crate::matrix::Matrix;
use crate::numerics::{self, ols};
use crate::panel::{demean_columns, difference, within_transform, BalancedPanel};

/// Which periods entered an estimate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum PeriodsUsed {
    /// Every pair `s > t`.
    AllPairs,
    /// Pairs `s - t = gap`.
    Gap { gap: usize },
    /// Pairs with `k_min <= s - t <= k_max`.
    GapRange { k_min: usize, k_max: usize },
    /// The single pair `(t, s)` (period labels).
    Pair { t: i64, s: i64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Estimate {
    pub beta: f64,
    pub se: Option<f64>,
    pub n_units: usize,
    pub periods_used: PeriodsUsed,
    /// Number of `(s, t)` pairs that entered.
    pub n_pairs: usize,
    /// Identifying variation, `Σ (Δx̃)²` over the pairs used.
    pub denominator: f64,
}

impl Estimate {
    pub fn with_se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VectorEstimate {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Option<Vec<f64>>,
    pub n_units: usize,
    pub n_pairs: usize,
    /// `Σ_i Σ_{s>t} Δx̃ Δx̃'`.
    pub gram: Matrix,
}

pub(crate) fn n_all_pairs(t: usize) -> usize {
    t * (t - 1) / 2
}

pub(crate) fn sum_sq(m: &Matrix) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum()
}

/// `Σ_i Σ_{s>t} (a_is - a_it)(b_is - b_it)`.
pub(crate) fn pairwise_sum(a: &Matrix, b: &Matrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.rows() {
        let (ra, rb) = (a.row(i), b.row(i));
        for s in 1..ra.len() {
            for t in 0..s {
                acc += (ra[s] - ra[t]) * (rb[s] - rb[t]);
            }
        }
    }
    acc
}

/// Stack an N×T matrix into a unit-major vector.
pub(crate) fn stack(m: &Matrix) -> Vec<f64> {
    m.as_slice().to_vec()
}

/// Within-level residuals `(r_y, r_x)` of the TWFE regression of `y` on
/// `x`, unit and period dummies and `covariates` (FWL). Without covariates
/// these are just the two-way demeaned series.
pub(crate) fn twfe_residuals(panel: &BalancedPanel, y: &str, x: &str, covariates: &[&str]) -> Result<(Matrix, Matrix)> {
    let yw = within_transform(panel.series(y)?);
    let xw = within_transform(panel.series(x)?);
    if covariates.is_empty() {
        return Ok((yw, xw));
    }
    let controls = within_design(panel, covariates)?;
    let n = panel.n_units();
    let t = panel.n_periods();
    let ry = numerics::fwl_residualize(&stack(&yw), &controls)?;
    let rx = numerics::fwl_residualize(&stack(&xw), &controls)?;
    Ok((Matrix::from_row_major(n, t, ry)?, Matrix::from_row_major(n, t, rx)?))
}

/// Two-way demeaned covariates as columns of an (N·T)×q design.
pub(crate) fn within_design(panel: &BalancedPanel, names: &[&str]) -> Result<Matrix> {
    let cols = names.iter().map(|n| Ok(stack(&within_transform(panel.series(n)?)))).collect::<Result<Vec<_>>>()?;
    Matrix::from_columns(panel.n_units() * panel.n_periods(), &cols)
}

/// TWFE coefficient on `x`, with optional covariates partialled out.
pub fn twfe(panel: &BalancedPanel, y: &str, x: &str, covariates: &[&str]) -> Result<Estimate> {
    let (ry, rx) = twfe_residuals(panel, y, x, covariates)?;
    let t = panel.n_periods() as f64;
    let ss = sum_sq(&rx);
    if is_degenerate(ss, sum_sq(panel.series(x)?)) {
        return Err(Error::NoIdentifyingVariation(format!(
            "`{x}` has no variation after removing unit and period effects"
        )));
    }
    let cross = numerics::dot(ry.as_slice(), rx.as_slice());
    Ok(Estimate {
        beta: cross / ss,
        se: None,
        n_units: panel.n_units(),
        periods_used: PeriodsUsed::AllPairs,
        n_pairs: n_all_pairs(panel.n_periods()),
        denominator: t * ss,
    })
}

/// Sum of squares of the raw values entering gap-`k` differences; the
/// scale against which degeneracy of `Σ (Δ_k x̃)²` is judged.
pub(crate) fn gap_scale(x: &Matrix, k: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.rows() {
        for t in 0..x.cols() - k {
            acc += x.get(i, t) * x.get(i, t) + x.get(i, t + k) * x.get(i, t + k);
        }
    }
    acc
}

/// `(Σ Δ_k ỹ Δ_k x̃, Σ (Δ_k x̃)²)` for one gap.
pub(crate) fn gap_sums(ytil: &Matrix, xtil: &Matrix, k: usize) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..xtil.rows() {
        let (ry, rx) = (ytil.row(i), xtil.row(i));
        for t in 0..rx.len() - k {
            let dx = rx[t + k] - rx[t];
            num += (ry[t + k] - ry[t]) * dx;
            den += dx * dx;
        }
    }
    (num, den)
}

/// k-period first-difference estimator with start-period intercepts.
pub fn fd(panel: &BalancedPanel, y: &str, x: &str, k: usize) -> Result<Estimate> {
    let xs = panel.series(x)?;
    let dx = demean_columns(&difference(xs, k)?);
    let dy = demean_columns(&difference(panel.series(y)?, k)?);
    let den = sum_sq(&dx);
    if is_degenerate(den, gap_scale(xs, k)) {
        return Err(Error::NoIdentifyingVariation(format!("`{x}` has no {k}-period variation")));
    }
    let num = numerics::dot(dy.as_slice(), dx.as_slice());
    Ok(Estimate {
        beta: num / den,
        se: None,
        n_units: panel.n_units(),
        periods_used: PeriodsUsed::Gap { gap: k },
        n_pairs: panel.n_periods() - k,
        denominator: den,
    })
}

/// TWFE estimate using only periods `t < s` (labels).
pub fn twfe_two_period(panel: &BalancedPanel, y: &str, x: &str, t: i64, s: i64) -> Result<Estimate> {
    if s <= t {
        return Err(Error::InvalidConfig(format!("second period {s} must follow first period {t}")));
    }
    let (ti, si) = (panel.period_index(t)?, panel.period_index(s)?);
    let xs = panel.series(x)?;
    let ys = panel.series(y)?;
    let dx: Vec<f64> = (0..panel.n_units()).map(|i| xs.get(i, si) - xs.get(i, ti)).collect();
    let dy: Vec<f64> = (0..panel.n_units()).map(|i| ys.get(i, si) - ys.get(i, ti)).collect();
    let scale: f64 = (0..panel.n_units()).map(|i| xs.get(i, si) * xs.get(i, si) + xs.get(i, ti) * xs.get(i, ti)).sum();
    let (num, den) = centered_cross(&dy, &dx);
    if is_degenerate(den, scale) {
        return Err(Error::NoIdentifyingVariation(format!(
            "`{x}` changes by the same amount for every unit between {t} and {s}"
        )));
    }
    Ok(Estimate {
        beta: num / den,
        se: None,
        n_units: panel.n_units(),
        periods_used: PeriodsUsed::Pair { t, s },
        n_pairs: 1,
        denominator: den,
    })
}

/// `(Σ (a - ā)(b - b̄), Σ (b - b̄)²)`.
pub(crate) fn centered_cross(a: &[f64], b: &[f64]) -> (f64, f64) {
    let ma = numerics::mean(a);
    let mb = numerics::mean(b);
    let mut num = 0.0;
    let mut den = 0.0;
    for (u, v) in a.iter().zip(b) {
        let cb = v - mb;
        num += (u - ma) * cb;
        den += cb * cb;
    }
    (num, den)
}

/// TWFE with several regressors, solved from the pairwise normal equations
/// `{Σ Δx̃ Δx̃'} β = Σ Δx̃ Δỹ`.
pub fn twfe_multivariate(panel: &BalancedPanel, y: &str, xs: &[&str]) -> Result<VectorEstimate> {
    if xs.is_empty() {
        return Err(Error::InvalidConfig("at least one regressor is required".to_string()));
    }
    let design = within_design(panel, xs)?;
    let rank_check = ols(&design, &stack(&within_transform(panel.series(y)?)))
        .map_err(|_| Error::NoIdentifyingVariation("regressors have no within variation".into()))?;
    if !rank_check.dropped_columns.is_empty() {
        return Err(Error::Collinear(rank_check.dropped_columns.iter().map(|&j| xs[j].to_string()).collect()));
    }

    let ytil = demean_columns(panel.series(y)?);
    let xtil = xs.iter().map(|n| Ok(demean_columns(panel.series(n)?))).collect::<Result<Vec<_>>>()?;
    let p = xs.len();
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = Vec::with_capacity(p);
    for a in 0..p {
        for b in a..p {
            let v = pairwise_sum(&xtil[a], &xtil[b]);
            gram.set(a, b, v);
            gram.set(b, a, v);
        }
        rhs.push(pairwise_sum(&xtil[a], &ytil));
    }
    let solved = ols(&gram, &rhs)?;
    if !solved.dropped_columns.is_empty() {
        return Err(Error::Collinear(solved.dropped_columns.iter().map(|&j| xs[j].to_string()).collect()));
    }
    Ok(VectorEstimate {
        names: xs.iter().map(|s| s.to_string()).collect(),
        beta: solved.coefficients.into_iter().map(|c| c.unwrap_or(0.0)).collect(),
        se: None,
        n_units: panel.n_units(),
        n_pairs: n_all_pairs(panel.n_periods()),
        gram,
    })
}

/// Just-identified IV with unit and period effects, in pairwise form.
pub fn twfe_iv(panel: &BalancedPanel, y: &str, x: &str, z: &str) -> Result<Estimate> {
    let ytil = demean_columns(panel.series(y)?);
    let xtil = demean_columns(panel.series(x)?);
    let ztil = demean_columns(panel.series(z)?);
    let den = pairwise_sum(&xtil, &ztil);
    let zz = pairwise_sum(&ztil, &ztil);
    let xx = pairwise_sum(&xtil, &xtil);
    let t = panel.n_periods() as f64;
    if is_degenerate(zz, t * sum_sq(panel.series(z)?)) || is_degenerate(den.abs(), numerics::sqrt(zz * xx)) {
        return Err(Error::IrrelevantInstrument);
    }
    let num = pairwise_sum(&ytil, &ztil);
    Ok(Estimate {
        beta: num / den,
        se: None,
        n_units: panel.n_units(),
        periods_used: PeriodsUsed::AllPairs,
        n_pairs: n_all_pairs(panel.n_periods()),
        denominator: den,
    })
}
