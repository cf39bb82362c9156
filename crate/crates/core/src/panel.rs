//! Balanced panel container and the two basic transforms used everywhere
//! else: cross-sectional demeaning and k-period differencing.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Rectangular N×T panel. Every series holds one finite value per
/// (unit, period) cell; periods are consecutive integers.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BalancedPanel {
    units: Vec<String>,
    periods: Vec<i64>,
    series: BTreeMap<String, Matrix>,
    cluster_labels: Vec<String>,
    clusters: Vec<usize>,
    presample: Option<Box<BalancedPanel>>,
}

impl BalancedPanel {
    /// Empty panel over the given units and periods. Each unit is its own
    /// cluster until [`BalancedPanel::with_clusters`] says otherwise.
    pub fn new(units: Vec<String>, periods: Vec<i64>) -> Result<Self> {
        if units.len() < 2 {
            return Err(Error::InvalidPanel(format!("need at least 2 units, found {}", units.len())));
        }
        if periods.len() < 2 {
            return Err(Error::InvalidPanel(format!("need at least 2 periods, found {}", periods.len())));
        }
        check_consecutive(&periods)?;
        let mut sorted = units.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidPanel(format!("duplicate unit identifier `{}`", w[0])));
        }
        let clusters = (0..units.len()).collect();
        Ok(Self { cluster_labels: units.clone(), units, periods, series: BTreeMap::new(), clusters, presample: None })
    }

    /// Panel with units labelled `0..n_units` and periods `first..first+n_periods`.
    pub fn with_shape(n_units: usize, first_period: i64, n_periods: usize) -> Result<Self> {
        let units = (0..n_units).map(|i| i.to_string()).collect();
        let periods = (0..n_periods as i64).map(|t| first_period + t).collect();
        Self::new(units, periods)
    }

    pub fn with_series(mut self, name: &str, values: Matrix) -> Result<Self> {
        self.insert_series(name, values)?;
        Ok(self)
    }

    pub fn insert_series(&mut self, name: &str, values: Matrix) -> Result<()> {
        if values.rows() != self.n_units() || values.cols() != self.n_periods() {
            return Err(Error::InvalidPanel(format!(
                "series `{name}` is {}x{}, panel is {}x{}",
                values.rows(),
                values.cols(),
                self.n_units(),
                self.n_periods()
            )));
        }
        for i in 0..values.rows() {
            for t in 0..values.cols() {
                if !values.get(i, t).is_finite() {
                    return Err(Error::InvalidPanel(format!(
                        "series `{name}` has a non-finite value for unit `{}` in period {}",
                        self.units[i], self.periods[t]
                    )));
                }
            }
        }
        self.series.insert(name.to_string(), values);
        Ok(())
    }

    /// Assign a cluster label to every unit (same order as `units()`).
    pub fn with_clusters(mut self, labels: &[String]) -> Result<Self> {
        if labels.len() != self.n_units() {
            return Err(Error::ShapeMismatch { expected: self.n_units(), found: labels.len() });
        }
        let mut distinct: Vec<String> = labels.to_vec();
        distinct.sort();
        distinct.dedup();
        self.clusters = labels.iter().map(|l| distinct.binary_search(l).expect("label present")).collect();
        self.cluster_labels = distinct;
        Ok(self)
    }

    /// Attach earlier observations used only to build pre-period
    /// covariates such as pre-trends. They never enter estimation.
    pub fn with_presample(mut self, presample: BalancedPanel) -> Self {
        self.presample = Some(Box::new(presample));
        self
    }

    pub fn presample(&self) -> Option<&BalancedPanel> {
        self.presample.as_deref()
    }

    /// Value of `var` for unit `unit` at calendar period `period`, looking in
    /// the panel first and then in the pre-sample extension.
    pub fn lookup(&self, var: &str, unit: usize, period: i64) -> Option<f64> {
        if let (Ok(t), Ok(m)) = (self.period_index(period), self.series(var)) {
            return Some(m.get(unit, t));
        }
        let pre = self.presample.as_deref()?;
        let j = pre.unit_index(&self.units[unit])?;
        let t = pre.period_index(period).ok()?;
        pre.series(var).ok().map(|m| m.get(j, t))
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn periods(&self) -> &[i64] {
        &self.periods
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.series.contains_key(name)
    }

    pub fn series(&self, name: &str) -> Result<&Matrix> {
        self.series.get(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Column index of a period label.
    pub fn period_index(&self, period: i64) -> Result<usize> {
        let offset = period - self.periods[0];
        if offset < 0 || offset >= self.periods.len() as i64 {
            return Err(Error::UnknownPeriod(period));
        }
        Ok(offset as usize)
    }

    pub fn unit_index(&self, unit: &str) -> Option<usize> {
        self.units.iter().position(|u| u == unit)
    }

    /// Cluster index of each unit, in `0..n_clusters()`.
    pub fn clusters(&self) -> &[usize] {
        &self.clusters
    }

    pub fn cluster_labels(&self) -> &[String] {
        &self.cluster_labels
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_labels.len()
    }
}

fn check_consecutive(periods: &[i64]) -> Result<()> {
    for w in periods.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(Error::NonConsecutivePeriods { previous: w[0], next: w[1] });
        }
    }
    Ok(())
}

/// What to do with units that miss some period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BalanceMode {
    /// Any hole is an error.
    #[default]
    Strict,
    /// Units with a hole are removed; the count is reported by `build`.
    DropUnits,
}

/// Assembles a [`BalancedPanel`] from long-format rows in any order.
#[derive(Debug, Clone)]
pub struct PanelBuilder {
    variables: Vec<String>,
    cells: BTreeMap<(String, i64), Vec<f64>>,
    unit_clusters: BTreeMap<String, String>,
}

impl PanelBuilder {
    pub fn new(variables: Vec<String>) -> Self {
        Self { variables, cells: BTreeMap::new(), unit_clusters: BTreeMap::new() }
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// Add one observation. `values` follows the order given to `new`.
    pub fn push(&mut self, unit: &str, period: i64, cluster: Option<&str>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.variables.len() {
            return Err(Error::ShapeMismatch { expected: self.variables.len(), found: values.len() });
        }
        if let Some(c) = cluster {
            match self.unit_clusters.get(unit) {
                Some(prev) if prev != c => {
                    return Err(Error::InvalidPanel(format!(
                        "unit `{unit}` is assigned to clusters `{prev}` and `{c}`"
                    )))
                }
                Some(_) => {}
                None => {
                    self.unit_clusters.insert(unit.to_string(), c.to_string());
                }
            }
        }
        let key = (unit.to_string(), period);
        if self.cells.contains_key(&key) {
            return Err(Error::DuplicateObservation { unit: unit.to_string(), period });
        }
        self.cells.insert(key, values);
        Ok(())
    }

    /// Validate and build. Returns the panel and the number of dropped units.
    pub fn build(self, mode: BalanceMode) -> Result<(BalancedPanel, usize)> {
        let mut periods: Vec<i64> = self.cells.keys().map(|(_, p)| *p).collect();
        periods.sort_unstable();
        periods.dedup();
        let mut units: Vec<String> = self.cells.keys().map(|(u, _)| u.clone()).collect();
        units.dedup();

        let mut kept = Vec::with_capacity(units.len());
        let mut dropped = 0;
        for u in units {
            let hole = periods.iter().find(|&&p| !self.cells.contains_key(&(u.clone(), p)));
            match (hole, mode) {
                (None, _) => kept.push(u),
                (Some(&p), BalanceMode::Strict) => return Err(Error::UnbalancedPanel { unit: u, period: p }),
                (Some(_), BalanceMode::DropUnits) => dropped += 1,
            }
        }

        let mut panel = BalancedPanel::new(kept.clone(), periods.clone())?;
        for (j, name) in self.variables.iter().enumerate() {
            let mut m = Matrix::zeros(kept.len(), periods.len());
            for (i, u) in kept.iter().enumerate() {
                for (t, p) in periods.iter().enumerate() {
                    m.set(i, t, self.cells[&(u.clone(), *p)][j]);
                }
            }
            panel.insert_series(name, m)?;
        }
        if !self.unit_clusters.is_empty() {
            let labels: Vec<String> =
                kept.iter().map(|u| self.unit_clusters.get(u).cloned().unwrap_or_else(|| u.clone())).collect();
            panel = panel.with_clusters(&labels)?;
        }
        Ok((panel, dropped))
    }
}

/// A series with its cross-sectional mean removed in every period.
#[derive(Debug, Clone, PartialEq)]
pub struct DemeanedSeries {
    pub values: Matrix,
}

/// `values[i][t] = v[i][t + gap] - v[i][t]`, shape N×(T−gap).
#[derive(Debug, Clone, PartialEq)]
pub struct DifferencedSeries {
    pub gap: usize,
    pub values: Matrix,
}

pub fn demean(panel: &BalancedPanel, var: &str) -> Result<DemeanedSeries> {
    Ok(DemeanedSeries { values: demean_columns(panel.series(var)?) })
}

pub fn k_difference(panel: &BalancedPanel, var: &str, k: usize) -> Result<DifferencedSeries> {
    let values = panel.series(var)?;
    Ok(DifferencedSeries { gap: k, values: difference(values, k)? })
}

/// Two-pass column mean.
pub(crate) fn column_mean(m: &Matrix, c: usize) -> f64 {
    let n = m.rows() as f64;
    let mut sum = 0.0;
    for i in 0..m.rows() {
        sum += m.get(i, c);
    }
    let mean = sum / n;
    let mut correction = 0.0;
    for i in 0..m.rows() {
        correction += m.get(i, c) - mean;
    }
    mean + correction / n
}

pub(crate) fn demean_columns(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for c in 0..m.cols() {
        let mean = column_mean(m, c);
        for i in 0..m.rows() {
            out.set(i, c, m.get(i, c) - mean);
        }
    }
    out
}

/// Removes unit and period means; equals the residual from a regression on
/// unit and period dummies for a balanced panel.
pub(crate) fn within_transform(m: &Matrix) -> Matrix {
    let mut out = demean_columns(m);
    let t = m.cols() as f64;
    for i in 0..m.rows() {
        let row = out.row(i);
        let mean = row.iter().sum::<f64>() / t;
        let mean = mean + row.iter().map(|v| v - mean).sum::<f64>() / t;
        for c in 0..m.cols() {
            let v = out.get(i, c);
            out.set(i, c, v - mean);
        }
    }
    out
}

pub(crate) fn difference(m: &Matrix, k: usize) -> Result<Matrix> {
    if k == 0 || k >= m.cols() {
        return Err(Error::GapOutOfRange { gap: k, periods: m.cols() });
    }
    let width = m.cols() - k;
    let mut data = vec![0.0; m.rows() * width];
    for i in 0..m.rows() {
        for t in 0..width {
            data[i * width + t] = m.get(i, t + k) - m.get(i, t);
        }
    }
    Matrix::from_row_major(m.rows(), width, data)
}
