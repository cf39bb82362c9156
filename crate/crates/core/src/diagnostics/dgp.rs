//! Synthetic panels with known potential outcomes.
//!
//! Outcomes are linear in the current treatment, `y_it = μ_it + τ_it·x_it`,
//! where `μ_it` (the untreated outcome) and `τ_it` are kept as ground truth.
//! The panel always carries `y`, `x` and one covariate `w_it = w_i·(t+1)`.
//!
//! Random numbers come from ChaCha8 seeded with `seed`; replication `r`
//! uses stream `r`, so replications are independent and reproducible.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::panel::BalancedPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Scenario {
    /// Constant effect, treatment unrelated to untreated trends.
    ParallelTrends,
    /// Unit-specific effects `τ_i`.
    HeterogeneousTau,
    /// Treatment loads on the covariate with a time-varying slope while
    /// untreated trends also load on it.
    TimeVaryingDelta,
    /// Treatment growth responds negatively to the last outcome change.
    ReverseCausality,
    /// Lagged treatment also moves the outcome.
    DynamicEffects,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::ParallelTrends,
        Scenario::HeterogeneousTau,
        Scenario::TimeVaryingDelta,
        Scenario::ReverseCausality,
        Scenario::DynamicEffects,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ParallelTrends => "parallel-trends",
            Scenario::HeterogeneousTau => "heterogeneous-tau",
            Scenario::TimeVaryingDelta => "time-varying-delta",
            Scenario::ReverseCausality => "reverse-causality",
            Scenario::DynamicEffects => "dynamic-effects",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DgpConfig {
    pub scenario: Scenario,
    pub n_units: usize,
    pub n_periods: usize,
    /// Mean treatment effect.
    pub tau: f64,
    /// Cross-unit standard deviation of `τ_i`.
    pub tau_sd: f64,
    pub unit_effect_sd: f64,
    pub time_effect_sd: f64,
    /// Idiosyncratic outcome noise.
    pub noise_sd: f64,
    /// Outcome noise accumulates as a random walk instead of being i.i.d.
    pub noise_random_walk: bool,
    /// Innovation scale of the treatment's random-walk component.
    pub treatment_sd: f64,
    /// Loading of the treatment level on the outcome's unit effect.
    pub selection_on_levels: f64,
    /// Treatment loading on `w_i` grows as `delta·(t+1) + delta_curvature·(t+1)²`.
    pub delta: f64,
    pub delta_curvature: f64,
    /// Untreated outcome loads on `w_i` as `trend_loading·(t+1)²`.
    pub trend_loading: f64,
    /// Response of treatment growth to the previous outcome change.
    pub feedback: f64,
    /// Effect of last period's treatment on today's outcome.
    pub lag_effect: f64,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self::preset(Scenario::ParallelTrends, 500, 5, 0)
    }
}

impl DgpConfig {
    pub fn preset(scenario: Scenario, n_units: usize, n_periods: usize, seed: u64) -> Self {
        let base = Self {
            scenario,
            n_units,
            n_periods,
            tau: 2.0,
            tau_sd: 0.0,
            unit_effect_sd: 1.0,
            time_effect_sd: 1.0,
            noise_sd: 1.0,
            noise_random_walk: false,
            treatment_sd: 1.0,
            selection_on_levels: 0.5,
            delta: 0.0,
            delta_curvature: 0.0,
            trend_loading: 0.0,
            feedback: 0.0,
            lag_effect: 0.0,
            seed,
        };
        match scenario {
            Scenario::ParallelTrends => base,
            Scenario::HeterogeneousTau => Self { tau_sd: 1.0, ..base },
            Scenario::TimeVaryingDelta => Self { delta: 0.5, delta_curvature: 0.3, trend_loading: 0.2, ..base },
            Scenario::ReverseCausality => Self { feedback: 0.5, noise_random_walk: true, ..base },
            Scenario::DynamicEffects => Self { lag_effect: 1.0, ..base },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_units < 2 || self.n_periods < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 units and 2 periods, got {}x{}",
                self.n_units, self.n_periods
            )));
        }
        let scales = [
            ("tau_sd", self.tau_sd),
            ("unit_effect_sd", self.unit_effect_sd),
            ("time_effect_sd", self.time_effect_sd),
            ("noise_sd", self.noise_sd),
            ("treatment_sd", self.treatment_sd),
        ];
        for (name, v) in scales {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("`{name}` must be finite and nonnegative")));
            }
        }
        let coefs = [
            self.tau,
            self.selection_on_levels,
            self.delta,
            self.delta_curvature,
            self.trend_loading,
            self.feedback,
            self.lag_effect,
        ];
        if coefs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Potential-outcome ground truth: `y = untreated + effect ∘ x`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GroundTruth {
    pub scenario: Scenario,
    /// `τ_it`, the slope of the period-t potential outcome in treatment.
    pub effect: Matrix,
    /// `y_it(0)`; under dynamic effects it includes the lagged-treatment term.
    pub untreated: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub panel: BalancedPanel,
    pub truth: GroundTruth,
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sd * z
}

pub fn simulate(config: &DgpConfig) -> Result<SimulatedPanel> {
    simulate_replication(config, 0)
}

pub fn simulate_replication(config: &DgpConfig, replication: u64) -> Result<SimulatedPanel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replication);

    let (n, t) = (config.n_units, config.n_periods);
    let gamma: Vec<f64> = (0..t).map(|_| normal(&mut rng, config.time_effect_sd)).collect();
    let g: Vec<f64> = (0..t).map(|_| normal(&mut rng, config.time_effect_sd)).collect();

    let mut x = Matrix::zeros(n, t);
    let mut y = Matrix::zeros(n, t);
    let mut w = Matrix::zeros(n, t);
    let mut effect = Matrix::zeros(n, t);
    let mut untreated = Matrix::zeros(n, t);

    for i in 0..n {
        let alpha = normal(&mut rng, config.unit_effect_sd);
        let wi = normal(&mut rng, 1.0);
        let tau_i = config.tau + normal(&mut rng, config.tau_sd);
        let a_i = config.selection_on_levels * alpha + normal(&mut rng, 1.0);
        let mut walk = 0.0;
        let mut noise = 0.0;
        for s in 0..t {
            let h = (s + 1) as f64;
            let innovation = normal(&mut rng, config.noise_sd);
            noise = if config.noise_random_walk { noise + innovation } else { innovation };
            walk += normal(&mut rng, config.treatment_sd);
            if s >= 2 {
                walk -= config.feedback * (y.get(i, s - 1) - y.get(i, s - 2));
            }
            let loading = config.delta * h + config.delta_curvature * h * h;
            let xv = a_i + g[s] + loading * wi + walk;
            let lag = if s >= 1 { config.lag_effect * x.get(i, s - 1) } else { 0.0 };
            let mu = alpha + gamma[s] + config.trend_loading * h * h * wi + noise + lag;
            x.set(i, s, xv);
            w.set(i, s, wi * h);
            effect.set(i, s, tau_i);
            untreated.set(i, s, mu);
            y.set(i, s, mu + tau_i * xv);
        }
    }

    let panel = BalancedPanel::with_shape(n, 1, t)?.with_series("y", y)?.with_series("x", x)?.with_series("w", w)?;
    Ok(SimulatedPanel { panel, truth: GroundTruth { scenario: config.scenario, effect, untreated } })
}
