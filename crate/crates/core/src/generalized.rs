//! Generalized TWFE estimators: aggregation over a restricted range of gap
//! lengths, and per-pair covariate adjustment (pre-trends included) with
//! residual-variance weights.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::decomposition::{self, normalize, PairComponent, PairwiseDecomposition, WeightedComponents};
use crate::error::{Error, Result};
use crate::estimators::{gap_scale, gap_sums, Estimate, PeriodsUsed};
use crate::is_degenerate;
use crate::matrix::Matrix;
use crate::numerics::{self, fwl_residualize};
use crate::panel::{demean_columns, BalancedPanel};

/// Inclusive range of gap lengths `k_min..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapRange {
    pub k_min: usize,
    pub k_max: usize,
}

impl GapRange {
    pub fn new(k_min: usize, k_max: usize, periods: usize) -> Result<Self> {
        decomposition::count_pairs(periods, k_min, k_max)?;
        Ok(Self { k_min, k_max })
    }

    pub fn full(periods: usize) -> Self {
        Self { k_min: 1, k_max: periods.saturating_sub(1) }
    }

    pub fn contains(&self, k: usize) -> bool {
        self.k_min <= k && k <= self.k_max
    }

    fn validate(&self, periods: usize) -> Result<usize> {
        decomposition::count_pairs(periods, self.k_min, self.k_max)
    }

    fn periods_used(&self, periods: usize) -> PeriodsUsed {
        if self.k_min == 1 && self.k_max + 1 == periods {
            PeriodsUsed::AllPairs
        } else {
            PeriodsUsed::GapRange { k_min: self.k_min, k_max: self.k_max }
        }
    }
}

/// Unit-specific slope of `variable` on calendar time over the window
/// `[t + window_start_offset, t + window_end_offset]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PretrendConfig {
    pub variable: String,
    #[cfg_attr(feature = "serde", serde(default = "default_window_start"))]
    pub window_start_offset: i64,
    #[cfg_attr(feature = "serde", serde(default = "default_window_end"))]
    pub window_end_offset: i64,
    /// Minimum number of window points; `None` requires the full window.
    #[cfg_attr(feature = "serde", serde(default))]
    pub min_points: Option<usize>,
}

fn default_window_start() -> i64 {
    -12
}

fn default_window_end() -> i64 {
    -3
}

impl PretrendConfig {
    pub fn new(variable: &str) -> Self {
        Self {
            variable: variable.into(),
            window_start_offset: default_window_start(),
            window_end_offset: default_window_end(),
            min_points: None,
        }
    }

    fn window_len(&self) -> usize {
        (self.window_end_offset - self.window_start_offset + 1) as usize
    }
}

/// Per-pair controls for [`generalized_twfe`]. Every control enters each
/// pair's regression as one column next to an intercept.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CovariateSpec {
    /// Level at the pair's first period `t`.
    pub time_invariant: Vec<String>,
    /// Change `v_is − v_it`.
    pub differenced: Vec<String>,
    /// Pre-trend slope evaluated at the pair's first period `t`.
    pub pre_period: Vec<PretrendConfig>,
}

impl CovariateSpec {
    pub fn is_empty(&self) -> bool {
        self.time_invariant.is_empty() && self.differenced.is_empty() && self.pre_period.is_empty()
    }

    pub fn n_columns(&self) -> usize {
        self.time_invariant.len() + self.differenced.len() + self.pre_period.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum WeightScheme {
    /// Proportional to the residual sum of squares of `x_is − x_it` after
    /// the pair's controls.
    #[default]
    Ssr,
    /// The unadjusted two-period weights, `Σ_i (x̃_is − x̃_it)²`.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GeneralizedComponent {
    pub t: i64,
    pub s: i64,
    pub beta: Option<f64>,
    pub omega: f64,
    pub n_obs: usize,
    /// Columns in the pair's control design, intercept included.
    pub n_controls: usize,
    /// `Σ_i (r^x_ist)²`.
    pub ssr_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GeneralizedEstimate {
    pub estimate: Estimate,
    pub scheme: WeightScheme,
    pub range: GapRange,
    pub components: Vec<GeneralizedComponent>,
}

impl GeneralizedEstimate {
    pub fn as_pairwise(&self) -> PairwiseDecomposition {
        PairwiseDecomposition {
            components: self
                .components
                .iter()
                .map(|c| PairComponent {
                    t: c.t,
                    s: c.s,
                    beta: c.beta,
                    omega: c.omega,
                    n_obs: c.n_obs,
                    denominator: c.ssr_x,
                })
                .collect(),
            aggregate: self.estimate.beta,
        }
    }
}

impl WeightedComponents for GeneralizedEstimate {
    fn weighted_betas(&self) -> Vec<(Option<f64>, f64)> {
        self.components.iter().map(|c| (c.beta, c.omega)).collect()
    }
}

/// FD-weighted average of the k-period FD estimators with `k` in `range`.
pub fn gap_restricted(panel: &BalancedPanel, y: &str, x: &str, range: GapRange) -> Result<Estimate> {
    let t = panel.n_periods();
    let n_pairs = range.validate(t)?;
    let xs = panel.series(x)?;
    let ytil = demean_columns(panel.series(y)?);
    let xtil = demean_columns(xs);
    let (mut num, mut den, mut scale) = (0.0, 0.0, 0.0);
    for k in range.k_min..=range.k_max {
        let (a, b) = gap_sums(&ytil, &xtil, k);
        num += a;
        den += b;
        scale += gap_scale(xs, k);
    }
    if is_degenerate(den, scale) {
        return Err(Error::NoIdentifyingVariation(format!(
            "`{x}` has no variation at gaps {}..={}",
            range.k_min, range.k_max
        )));
    }
    Ok(Estimate {
        beta: num / den,
        se: None,
        n_units: panel.n_units(),
        periods_used: range.periods_used(t),
        n_pairs,
        denominator: den,
    })
}

/// Per-unit pre-trend slope at period `t`.
pub fn pretrend_covariate(panel: &BalancedPanel, config: &PretrendConfig, t: i64) -> Result<Vec<f64>> {
    let (start, end) = (config.window_start_offset, config.window_end_offset);
    if start >= end || end > -1 {
        return Err(Error::InvalidPretrendWindow { start, end });
    }
    let has_var =
        panel.has_variable(&config.variable) || panel.presample().is_some_and(|p| p.has_variable(&config.variable));
    if !has_var {
        return Err(Error::UnknownVariable(config.variable.clone()));
    }
    let required = config.min_points.unwrap_or(config.window_len()).max(2);
    (0..panel.n_units())
        .map(|i| {
            let points: Vec<(f64, f64)> = (t + start..=t + end)
                .filter_map(|p| panel.lookup(&config.variable, i, p).map(|v| (p as f64, v)))
                .collect();
            if points.len() < required {
                return Err(Error::InsufficientPresample {
                    unit: panel.units()[i].clone(),
                    period: t,
                    found: points.len(),
                    required,
                });
            }
            let times: Vec<f64> = points.iter().map(|p| p.0).collect();
            let values: Vec<f64> = points.iter().map(|p| p.1).collect();
            let tbar = numerics::mean(&times);
            let vbar = numerics::mean(&values);
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            for (a, b) in times.iter().zip(&values) {
                sxy += (a - tbar) * (b - vbar);
                sxx += (a - tbar) * (a - tbar);
            }
            Ok(sxy / sxx)
        })
        .collect()
}

/// Residualized differences for one pair.
pub(crate) struct PairFit {
    pub ti: usize,
    pub si: usize,
    pub ry: Vec<f64>,
    pub rx: Vec<f64>,
    pub ssr_x: f64,
    pub raw_ss: f64,
    pub scale: f64,
    pub n_controls: usize,
}

pub(crate) fn pair_fits(
    panel: &BalancedPanel,
    y: &str,
    x: &str,
    spec: &CovariateSpec,
    range: GapRange,
) -> Result<Vec<PairFit>> {
    let t = panel.n_periods();
    range.validate(t)?;
    let xs = panel.series(x)?;
    let ys = panel.series(y)?;
    let levels = spec.time_invariant.iter().map(|n| panel.series(n)).collect::<Result<Vec<_>>>()?;
    let changes = spec.differenced.iter().map(|n| panel.series(n)).collect::<Result<Vec<_>>>()?;

    // pre-trend slopes, one vector per (config, first period)
    let mut slopes: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (c, cfg) in spec.pre_period.iter().enumerate() {
        for ti in 0..t - range.k_min {
            slopes.insert((c, ti), pretrend_covariate(panel, cfg, panel.periods()[ti])?);
        }
    }

    let n = panel.n_units();
    let n_controls = 1 + spec.n_columns();
    let mut fits = Vec::new();
    for ti in 0..t {
        for si in ti + range.k_min..t.min(ti + range.k_max + 1) {
            let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
            cols.extend(levels.iter().map(|m| m.column(ti)));
            cols.extend(changes.iter().map(|m| (0..n).map(|i| m.get(i, si) - m.get(i, ti)).collect()));
            cols.extend((0..spec.pre_period.len()).map(|c| slopes[&(c, ti)].clone()));
            let controls = Matrix::from_columns(n, &cols)?;

            let dy: Vec<f64> = (0..n).map(|i| ys.get(i, si) - ys.get(i, ti)).collect();
            let dx: Vec<f64> = (0..n).map(|i| xs.get(i, si) - xs.get(i, ti)).collect();
            let ry = fwl_residualize(&dy, &controls)?;
            let rx = fwl_residualize(&dx, &controls)?;
            let ssr_x = rx.iter().map(|v| v * v).sum();
            let mean_dx = numerics::mean(&dx);
            let raw_ss = dx.iter().map(|v| (v - mean_dx) * (v - mean_dx)).sum();
            let scale = (0..n).map(|i| xs.get(i, si) * xs.get(i, si) + xs.get(i, ti) * xs.get(i, ti)).sum();
            fits.push(PairFit { ti, si, ry, rx, ssr_x, raw_ss, scale, n_controls });
        }
    }
    Ok(fits)
}

/// Two-step generalized estimator: per-pair residualization on the
/// covariates in `spec`, then a weighted average of the per-pair slopes.
///
/// Pairs whose treatment change is fully explained by the controls get
/// weight zero and an undefined slope. Weights are normalized within
/// `range`.
pub fn generalized_twfe(
    panel: &BalancedPanel,
    y: &str,
    x: &str,
    spec: &CovariateSpec,
    range: GapRange,
    scheme: WeightScheme,
) -> Result<GeneralizedEstimate> {
    let fits = pair_fits(panel, y, x, spec, range)?;
    let parts: Vec<(f64, f64, f64)> = fits
        .iter()
        .map(|f| {
            let cross = numerics::dot(&f.rx, &f.ry);
            // degenerate pairs are detected on the residual variance whatever the scheme
            let live = !is_degenerate(f.ssr_x, f.scale);
            (cross, f.ssr_x, if live { 0.0 } else { f64::INFINITY })
        })
        .collect();
    let (weighted, aggregate) = match scheme {
        WeightScheme::Ssr => normalize(&parts)?,
        WeightScheme::Raw => {
            let (slopes, _) = normalize(&parts)?;
            let raw: Vec<(f64, f64, f64)> = fits
                .iter()
                .zip(&slopes)
                .map(|(f, (b, _))| match b {
                    Some(b) => (b * f.raw_ss, f.raw_ss, 0.0),
                    None => (0.0, 0.0, f64::INFINITY),
                })
                .collect();
            let (w, agg) = normalize(&raw)?;
            let merged = w.into_iter().zip(&slopes).map(|((_, om), (b, _))| (*b, om)).collect();
            (merged, agg)
        }
    };
    let periods = panel.periods();
    let denominator = match scheme {
        WeightScheme::Ssr => fits.iter().zip(&weighted).filter(|(_, w)| w.0.is_some()).map(|(f, _)| f.ssr_x).sum(),
        WeightScheme::Raw => fits.iter().zip(&weighted).filter(|(_, w)| w.0.is_some()).map(|(f, _)| f.raw_ss).sum(),
    };
    let components = fits
        .iter()
        .zip(weighted)
        .map(|(f, (beta, omega))| GeneralizedComponent {
            t: periods[f.ti],
            s: periods[f.si],
            beta,
            omega,
            n_obs: panel.n_units(),
            n_controls: f.n_controls,
            ssr_x: f.ssr_x,
        })
        .collect();
    Ok(GeneralizedEstimate {
        estimate: Estimate {
            beta: aggregate,
            se: None,
            n_units: panel.n_units(),
            periods_used: range.periods_used(panel.n_periods()),
            n_pairs: fits.len(),
            denominator,
        },
        scheme,
        range,
        components,
    })
}
