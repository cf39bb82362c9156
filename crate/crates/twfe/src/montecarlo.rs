//! Parallel Monte Carlo over simulated panels.
//!
//! Replication `r` draws from generator stream `r` of the configured seed,
//! so results do not depend on thread count or scheduling.

use rayon::prelude::*;
use serde::Serialize;
use twfe_core::inference::Z_975;
use twfe_core::{
    cluster_robust_se, gap_restricted, simulate_replication, theorem2_audit, DgpConfig, GapRange, GroundTruth, Matrix,
    StackedRegression,
};

use crate::report::Table;

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSpec {
    pub dgp: DgpConfig,
    pub replications: u64,
    pub covariates: Vec<String>,
    /// Gap ranges for the short-versus-long directional check.
    pub gaps: Option<(GapRange, GapRange)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub replication: u64,
    /// Average of the true per-observation effects.
    pub tau: f64,
    pub estimate: f64,
    pub se: f64,
    pub covered: bool,
    pub tau_weighted_sum: f64,
    pub bias_term: f64,
    pub trend_term: f64,
    /// `|estimate − (τ-sum + bias + trend)|`.
    pub identity_gap: f64,
    /// `|estimate − τ-sum|` on the same treatment with untreated outcomes
    /// set to zero.
    pub zero_trend_gap: f64,
    pub negative_mass: f64,
    pub short_gap: Option<f64>,
    pub long_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub replications: u64,
    pub mean_tau: f64,
    pub mean_estimate: f64,
    /// Monte Carlo standard error of `mean_estimate`.
    pub mc_se: f64,
    /// `(mean_estimate − mean_tau) / mc_se`.
    pub z_score: f64,
    pub mean_tau_weighted_sum: f64,
    pub mean_bias_term: f64,
    pub mean_trend_term: f64,
    pub max_identity_gap: f64,
    pub max_zero_trend_gap: f64,
    pub coverage: f64,
    /// Share of replications where the short-gap estimate is closer to τ.
    pub short_closer_share: Option<f64>,
    pub mean_short_gap: Option<f64>,
    pub mean_long_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub config: DgpConfig,
    pub covariates: Vec<String>,
    pub summary: MonteCarloSummary,
    pub replications: Vec<Replication>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn zero_trend_twin(sim_y_x: &Matrix, truth: &GroundTruth) -> (Matrix, GroundTruth) {
    let mut y = Matrix::zeros(sim_y_x.rows(), sim_y_x.cols());
    for i in 0..y.rows() {
        for t in 0..y.cols() {
            y.set(i, t, truth.effect.get(i, t) * sim_y_x.get(i, t));
        }
    }
    let twin = GroundTruth { untreated: Matrix::zeros(y.rows(), y.cols()), ..truth.clone() };
    (y, twin)
}

pub fn replicate(spec: &MonteCarloSpec, r: u64) -> twfe_core::Result<Replication> {
    let sim = simulate_replication(&spec.dgp, r)?;
    let covs: Vec<&str> = spec.covariates.iter().map(String::as_str).collect();
    let panel = &sim.panel;
    let audit = theorem2_audit(panel, Some(&sim.truth), "y", "x", &covs)?;
    let se = cluster_robust_se(&StackedRegression::twfe(panel, "y", "x", &covs)?)?;
    let tau = mean(sim.truth.effect.as_slice().iter().copied());

    let (y0, twin) = zero_trend_twin(panel.series("x")?, &sim.truth);
    let twin_panel = panel.clone().with_series("y", y0)?;
    let twin_audit = theorem2_audit(&twin_panel, Some(&twin), "y", "x", &covs)?;

    let (short_gap, long_gap) = match spec.gaps {
        Some((s, l)) => {
            (Some(gap_restricted(panel, "y", "x", s)?.beta), Some(gap_restricted(panel, "y", "x", l)?.beta))
        }
        None => (None, None),
    };
    Ok(Replication {
        replication: r,
        tau,
        estimate: audit.estimate,
        se,
        covered: (audit.estimate - tau).abs() <= Z_975 * se,
        tau_weighted_sum: audit.tau_weighted_sum,
        bias_term: audit.bias_term,
        trend_term: audit.trend_term,
        identity_gap: audit.identity_gap,
        zero_trend_gap: (twin_audit.estimate - twin_audit.tau_weighted_sum).abs(),
        negative_mass: audit.negative_mass,
        short_gap,
        long_gap,
    })
}

pub fn run(spec: &MonteCarloSpec) -> twfe_core::Result<MonteCarloReport> {
    if spec.replications < 2 {
        return Err(twfe_core::Error::InvalidConfig("need at least 2 replications".into()));
    }
    if let Some((s, l)) = spec.gaps {
        GapRange::new(s.k_min, s.k_max, spec.dgp.n_periods)?;
        GapRange::new(l.k_min, l.k_max, spec.dgp.n_periods)?;
    }
    let reps =
        (0..spec.replications).into_par_iter().map(|r| replicate(spec, r)).collect::<twfe_core::Result<Vec<_>>>()?;
    Ok(MonteCarloReport {
        config: spec.dgp.clone(),
        covariates: spec.covariates.clone(),
        summary: summarize(&reps),
        replications: reps,
    })
}

pub fn summarize(reps: &[Replication]) -> MonteCarloSummary {
    let n = reps.len() as f64;
    let mean_estimate = mean(reps.iter().map(|r| r.estimate));
    let var = reps.iter().map(|r| (r.estimate - mean_estimate).powi(2)).sum::<f64>() / (n - 1.0);
    let mc_se = (var / n).sqrt();
    let mean_tau = mean(reps.iter().map(|r| r.tau));
    let directional: Vec<(f64, f64, f64)> =
        reps.iter().filter_map(|r| Some((r.tau, r.short_gap?, r.long_gap?))).collect();
    let (share, ms, ml) = if directional.is_empty() {
        (None, None, None)
    } else {
        let closer = directional.iter().filter(|(tau, s, l)| (s - tau).abs() < (l - tau).abs()).count();
        (
            Some(closer as f64 / directional.len() as f64),
            Some(mean(directional.iter().map(|d| d.1))),
            Some(mean(directional.iter().map(|d| d.2))),
        )
    };
    MonteCarloSummary {
        replications: reps.len() as u64,
        mean_tau,
        mean_estimate,
        mc_se,
        z_score: (mean_estimate - mean_tau) / mc_se,
        mean_tau_weighted_sum: mean(reps.iter().map(|r| r.tau_weighted_sum)),
        mean_bias_term: mean(reps.iter().map(|r| r.bias_term)),
        mean_trend_term: mean(reps.iter().map(|r| r.trend_term)),
        max_identity_gap: reps.iter().map(|r| r.identity_gap).fold(0.0, f64::max),
        max_zero_trend_gap: reps.iter().map(|r| r.zero_trend_gap).fold(0.0, f64::max),
        coverage: reps.iter().filter(|r| r.covered).count() as f64 / n,
        short_closer_share: share,
        mean_short_gap: ms,
        mean_long_gap: ml,
    }
}

/// Per-replication CSV table.
pub fn replication_table(report: &MonteCarloReport) -> Table {
    let mut t = Table::new(&[
        "replication",
        "tau",
        "estimate",
        "se",
        "covered",
        "tau_weighted_sum",
        "bias_term",
        "trend_term",
        "identity_gap",
        "zero_trend_gap",
        "negative_mass",
        "short_gap",
        "long_gap",
    ]);
    for r in &report.replications {
        t.push(vec![
            (r.replication as i64).into(),
            r.tau.into(),
            r.estimate.into(),
            r.se.into(),
            (r.covered as i64).into(),
            r.tau_weighted_sum.into(),
            r.bias_term.into(),
            r.trend_term.into(),
            r.identity_gap.into(),
            r.zero_trend_gap.into(),
            r.negative_mass.into(),
            r.short_gap.into(),
            r.long_gap.into(),
        ]);
    }
    t
}
