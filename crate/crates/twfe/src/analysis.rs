//! Runs configured analyses against a loaded panel.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::{json, Value};
use twfe_core::{
    causal_weights, cluster_robust_se, fd, fd_decomposition, gap_restricted, generalized_twfe, pairwise_decomposition,
    twfe, twfe_iv, twfe_multivariate, twfe_two_period, verify_equivalence, weighted_summary, BalancedPanel, Estimate,
    GapRange, StackedRegression, StackedRow,
};

use crate::config::{Analysis, AnalysisKind};
use crate::report::{AnalysisReport, SummaryRow, Table};
use crate::AppError;

type CoreResult<T> = twfe_core::Result<T>;

/// Run every analysis, in parallel. Results come back in config order; the
/// first failure in that order wins.
pub fn run_all(panel: &BalancedPanel, analyses: &[Analysis]) -> Result<Vec<AnalysisReport>, AppError> {
    for a in analyses {
        a.validate_columns(panel)?;
    }
    analyses.par_iter().map(|a| run_analysis(panel, a)).collect::<Vec<_>>().into_iter().collect()
}

pub fn run_analysis(panel: &BalancedPanel, a: &Analysis) -> Result<AnalysisReport, AppError> {
    a.validate_columns(panel)?;
    compute(panel, a).map_err(|source| AppError::Analysis { name: a.name.clone(), source })
}

fn params(a: &Analysis, range: Option<GapRange>) -> BTreeMap<String, Value> {
    let mut p = BTreeMap::new();
    p.insert("y".into(), json!(a.y));
    if let Some(x) = &a.x {
        p.insert("x".into(), json!(x));
    }
    if !a.xs.is_empty() {
        p.insert("xs".into(), json!(a.xs.join(" ")));
    }
    if let Some(z) = &a.z {
        p.insert("z".into(), json!(z));
    }
    if !a.covariates.is_empty() {
        p.insert("covariates".into(), json!(a.covariates.join(" ")));
    }
    if let Some(k) = a.k {
        p.insert("k".into(), json!(k));
    }
    if let (Some(t), Some(s)) = (a.t, a.s) {
        p.insert("t".into(), json!(t));
        p.insert("s".into(), json!(s));
    }
    if let Some(r) = range {
        p.insert("k_min".into(), json!(r.k_min));
        p.insert("k_max".into(), json!(r.k_max));
    }
    if a.kind == AnalysisKind::Generalized {
        p.insert("weights".into(), json!(a.weights));
        let spec = &a.spec;
        if !spec.time_invariant.is_empty() {
            p.insert("time_invariant".into(), json!(spec.time_invariant.join(" ")));
        }
        if !spec.differenced.is_empty() {
            p.insert("differenced".into(), json!(spec.differenced.join(" ")));
        }
        for (i, pre) in spec.pre_period.iter().enumerate() {
            p.insert(
                format!("pre_period_{i}"),
                json!(format!("{}[{},{}]", pre.variable, pre.window_start_offset, pre.window_end_offset)),
            );
        }
    }
    p.insert("se".into(), json!(a.se));
    p
}

fn row(term: &str, e: &Estimate, range: Option<GapRange>) -> SummaryRow {
    SummaryRow {
        term: term.to_string(),
        estimate: e.beta,
        se: e.se,
        k_min: range.map(|r| r.k_min),
        k_max: range.map(|r| r.k_max),
        n_pairs: e.n_pairs,
    }
}

fn range_of(a: &Analysis, periods: usize) -> CoreResult<GapRange> {
    match a.gap {
        Some([lo, hi]) => GapRange::new(lo, hi, periods),
        None => Ok(GapRange::full(periods)),
    }
}

fn se_if(wanted: bool, stacked: impl FnOnce() -> CoreResult<StackedRegression>) -> CoreResult<Option<f64>> {
    if wanted {
        Ok(Some(cluster_robust_se(&stacked()?)?))
    } else {
        Ok(None)
    }
}

/// Stacked rows of one cross-sectionally demeaned pair `(t, s)`.
fn pair_rows(panel: &BalancedPanel, y: &str, x: &str, t: i64, s: i64) -> CoreResult<StackedRegression> {
    let (ti, si) = (panel.period_index(t)?, panel.period_index(s)?);
    let (ys, xs) = (panel.series(y)?, panel.series(x)?);
    let n = panel.n_units();
    let dy: Vec<f64> = (0..n).map(|i| ys.get(i, si) - ys.get(i, ti)).collect();
    let dx: Vec<f64> = (0..n).map(|i| xs.get(i, si) - xs.get(i, ti)).collect();
    let (my, mx) = (dy.iter().sum::<f64>() / n as f64, dx.iter().sum::<f64>() / n as f64);
    let rows = (0..n)
        .map(|i| StackedRow { response: dy[i] - my, regressor: dx[i] - mx, weight: 1.0, cluster: panel.clusters()[i] })
        .collect();
    Ok(StackedRegression { rows })
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn compute(panel: &BalancedPanel, a: &Analysis) -> CoreResult<AnalysisReport> {
    let t_len = panel.n_periods();
    let x = a.x.as_deref().unwrap_or("");
    let covs: Vec<&str> = a.covariates.iter().map(String::as_str).collect();
    let mut report = AnalysisReport {
        name: a.name.clone(),
        operation: a.kind.operation(),
        params: params(a, None),
        summary: Vec::new(),
        weighted: Vec::new(),
        tables: Vec::new(),
        result: Value::Null,
    };

    match a.kind {
        AnalysisKind::Twfe => {
            let mut e = twfe(panel, &a.y, x, &covs)?;
            e.se = se_if(a.se, || StackedRegression::twfe(panel, &a.y, x, &covs))?;
            report.summary.push(row(x, &e, None));
            report.result = to_json(&e);
        }
        AnalysisKind::Fd => {
            let k = a.k.unwrap_or(0);
            let mut e = fd(panel, &a.y, x, k)?;
            e.se = se_if(a.se, || StackedRegression::fd(panel, &a.y, x, k))?;
            report.summary.push(row(x, &e, Some(GapRange { k_min: k, k_max: k })));
            report.result = to_json(&e);
        }
        AnalysisKind::TwoPeriod => {
            let (t, s) = (a.t.unwrap_or(0), a.s.unwrap_or(0));
            let mut e = twfe_two_period(panel, &a.y, x, t, s)?;
            e.se = se_if(a.se, || pair_rows(panel, &a.y, x, t, s))?;
            let k = (s - t) as usize;
            report.summary.push(row(x, &e, Some(GapRange { k_min: k, k_max: k })));
            report.result = to_json(&e);
        }
        AnalysisKind::Multivariate => {
            let xs: Vec<&str> = a.xs.iter().map(String::as_str).collect();
            let e = twfe_multivariate(panel, &a.y, &xs)?;
            for (name, b) in e.names.iter().zip(&e.beta) {
                report.summary.push(SummaryRow {
                    term: name.clone(),
                    estimate: *b,
                    se: None,
                    k_min: None,
                    k_max: None,
                    n_pairs: e.n_pairs,
                });
            }
            report.result = to_json(&e);
        }
        AnalysisKind::Iv => {
            let e = twfe_iv(panel, &a.y, x, a.z.as_deref().unwrap_or(""))?;
            report.summary.push(row(x, &e, None));
            report.result = to_json(&e);
        }
        AnalysisKind::Decomposition => {
            let eq = verify_equivalence(panel, &a.y, x)?;
            let fdd = fd_decomposition(panel, &a.y, x)?;
            let pw = pairwise_decomposition(panel, &a.y, x)?;
            let mut e = twfe(panel, &a.y, x, &[])?;
            e.se = se_if(a.se, || StackedRegression::twfe(panel, &a.y, x, &[]))?;
            report.summary.push(row(x, &e, Some(GapRange::full(t_len))));

            let mut fd_table = Table::new(&["k", "beta", "omega", "n_obs"]);
            for c in &fdd.components {
                fd_table.push(vec![c.k.into(), c.beta.into(), c.omega.into(), c.n_obs.into()]);
            }
            let mut pair_table = Table::new(&["t", "s", "beta", "omega", "n_obs"]);
            for c in &pw.components {
                pair_table.push(vec![c.t.into(), c.s.into(), c.beta.into(), c.omega.into(), c.n_obs.into()]);
            }
            if a.figure {
                let mut fig = Table::new(&["k", "beta_k", "omega_k"]);
                for c in &fdd.components {
                    fig.push(vec![c.k.into(), c.beta.into(), c.omega.into()]);
                }
                report.tables.push(("figure", fig));
            }
            report.tables.push(("fd_components", fd_table));
            report.tables.push(("pair_components", pair_table));
            report.weighted.push(("fd".into(), weighted_summary(&fdd)?, fdd.aggregate));
            report.weighted.push(("pairwise".into(), weighted_summary(&pw)?, pw.aggregate));
            report.result = json!({ "estimate": to_json(&e), "equivalence": to_json(&eq) });
        }
        AnalysisKind::GapRestricted => {
            let range = range_of(a, t_len)?;
            report.params = params(a, Some(range));
            let mut e = gap_restricted(panel, &a.y, x, range)?;
            e.se = se_if(a.se, || StackedRegression::gap_range(panel, &a.y, x, range))?;
            report.summary.push(row(x, &e, Some(range)));
            report.result = to_json(&e);
        }
        AnalysisKind::Generalized => {
            let range = range_of(a, t_len)?;
            report.params = params(a, Some(range));
            let mut g = generalized_twfe(panel, &a.y, x, &a.spec, range, a.weights)?;
            g.estimate.se = se_if(a.se, || StackedRegression::generalized(panel, &a.y, x, &a.spec, range, a.weights))?;
            report.summary.push(row(x, &g.estimate, Some(range)));
            let mut table = Table::new(&["t", "s", "beta", "omega", "n_obs", "n_controls"]);
            for c in &g.components {
                table.push(vec![
                    c.t.into(),
                    c.s.into(),
                    c.beta.into(),
                    c.omega.into(),
                    c.n_obs.into(),
                    c.n_controls.into(),
                ]);
            }
            report.tables.push(("components", table));
            report.weighted.push(("generalized".into(), weighted_summary(&g)?, g.estimate.beta));
            report.result = json!({
                "estimate": to_json(&g.estimate),
                "scheme": to_json(&g.scheme),
                "range": to_json(&g.range),
            });
        }
        AnalysisKind::CausalWeights => {
            let w = causal_weights(panel, &a.y, x, &covs)?;
            let mut table = Table::new(&["unit", "k", "t", "omega"]);
            for c in &w.weights {
                table.push(vec![panel.units()[c.unit].as_str().into(), c.k.into(), c.t.into(), c.omega.into()]);
            }
            report.tables.push(("weights", table));
            report.result = json!({
                "negative_mass": w.negative_mass,
                "positive_mass": w.positive_mass,
                "total_mass": w.total_mass,
                "n_negative": w.n_negative,
                "n_weights": w.weights.len(),
                "denominator": w.denominator,
            });
        }
    }
    Ok(report)
}
