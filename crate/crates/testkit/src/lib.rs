//! Test support: random panels and brute-force dummy-variable regressions
//! that serve as oracles for the closed-form estimators.

#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use twfe_core::{ols, BalancedPanel, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Draw {
    Gaussian,
    Uniform,
    /// Student-t with 3 degrees of freedom.
    HeavyTailed,
}

impl Draw {
    pub const ALL: [Draw; 3] = [Draw::Gaussian, Draw::Uniform, Draw::HeavyTailed];

    pub fn sample(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Draw::Gaussian => rng.sample(StandardNormal),
            Draw::Uniform => Uniform::new(-1.0, 1.0).unwrap().sample(rng),
            Draw::HeavyTailed => StudentT::new(3.0).unwrap().sample(rng),
        }
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, t: usize, draw: Draw) -> Matrix {
    let data = (0..n * t).map(|_| draw.sample(rng)).collect();
    Matrix::from_row_major(n, t, data).unwrap()
}

/// Panel with series `y`, `x`, `z` (= x + noise), `x2` and `w`, where `y`
/// depends on `x` plus unit and period effects.
pub fn random_panel(rng: &mut ChaCha8Rng, n: usize, t: usize, draw: Draw) -> BalancedPanel {
    let unit: Vec<f64> = (0..n).map(|_| draw.sample(rng)).collect();
    let time: Vec<f64> = (0..t).map(|_| draw.sample(rng)).collect();
    let x = random_matrix(rng, n, t, draw);
    let noise = random_matrix(rng, n, t, draw);
    let x2 = random_matrix(rng, n, t, draw);
    let w = random_matrix(rng, n, t, draw);
    let znoise = random_matrix(rng, n, t, draw);
    let slope = 1.5 * draw.sample(rng);
    let mut y = Matrix::zeros(n, t);
    let mut z = Matrix::zeros(n, t);
    for i in 0..n {
        for s in 0..t {
            y.set(i, s, unit[i] + time[s] + slope * x.get(i, s) + 0.7 * x2.get(i, s) + noise.get(i, s));
            z.set(i, s, x.get(i, s) + znoise.get(i, s));
        }
    }
    BalancedPanel::with_shape(n, 1, t)
        .unwrap()
        .with_series("y", y)
        .unwrap()
        .with_series("x", x)
        .unwrap()
        .with_series("x2", x2)
        .unwrap()
        .with_series("z", z)
        .unwrap()
        .with_series("w", w)
        .unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn column_of(panel: &BalancedPanel, var: &str, periods: &[usize]) -> Vec<f64> {
    let m = panel.series(var).unwrap();
    (0..panel.n_units()).flat_map(|i| periods.iter().map(move |&t| m.get(i, t))).collect()
}

/// Unit dummies for every unit and period dummies for all but the first
/// of `periods`; rows are unit-major.
fn dummies(n: usize, periods: usize) -> Vec<Vec<f64>> {
    let rows = n * periods;
    let mut cols = Vec::new();
    for u in 0..n {
        cols.push((0..rows).map(|r| if r / periods == u { 1.0 } else { 0.0 }).collect());
    }
    for p in 1..periods {
        cols.push((0..rows).map(|r| if r % periods == p { 1.0 } else { 0.0 }).collect());
    }
    cols
}

/// Coefficients on `xs` from OLS of `y` on `xs`, `controls`, N unit dummies
/// and T−1 period dummies, restricted to the period indices in `periods`.
pub fn dummy_ols(panel: &BalancedPanel, y: &str, xs: &[&str], controls: &[&str], periods: &[usize]) -> Vec<f64> {
    let n = panel.n_units();
    let mut cols: Vec<Vec<f64>> = xs.iter().chain(controls).map(|v| column_of(panel, v, periods)).collect();
    cols.extend(dummies(n, periods.len()));
    let design = Matrix::from_columns(n * periods.len(), &cols).unwrap();
    let fit = ols(&design, &column_of(panel, y, periods)).unwrap();
    fit.coefficients[..xs.len()].iter().map(|c| c.expect("regressor dropped")).collect()
}

pub fn dummy_twfe(panel: &BalancedPanel, y: &str, x: &str) -> f64 {
    let all: Vec<usize> = (0..panel.n_periods()).collect();
    dummy_ols(panel, y, &[x], &[], &all)[0]
}

/// OLS of stacked k-period differences on Δx and start-period dummies.
pub fn stacked_fd(panel: &BalancedPanel, y: &str, x: &str, k: usize) -> f64 {
    let (n, t) = (panel.n_units(), panel.n_periods());
    let (ys, xs) = (panel.series(y).unwrap(), panel.series(x).unwrap());
    let starts = t - k;
    let mut dy = Vec::new();
    let mut cols = vec![Vec::new(); 1 + starts];
    for i in 0..n {
        for s in 0..starts {
            dy.push(ys.get(i, s + k) - ys.get(i, s));
            cols[0].push(xs.get(i, s + k) - xs.get(i, s));
            for (p, c) in cols.iter_mut().skip(1).enumerate() {
                c.push(if p == s { 1.0 } else { 0.0 });
            }
        }
    }
    let fit = ols(&Matrix::from_columns(dy.len(), &cols).unwrap(), &dy).unwrap();
    fit.coefficients[0].unwrap()
}

/// Explicit two-stage least squares with unit and period dummies in both
/// stages.
pub fn dummy_2sls(panel: &BalancedPanel, y: &str, x: &str, z: &str) -> f64 {
    let (n, t) = (panel.n_units(), panel.n_periods());
    let all: Vec<usize> = (0..t).collect();
    let d = dummies(n, t);
    let mut first = vec![column_of(panel, z, &all)];
    first.extend(d.iter().cloned());
    let xcol = column_of(panel, x, &all);
    let fit1 = ols(&Matrix::from_columns(n * t, &first).unwrap(), &xcol).unwrap();
    let xhat: Vec<f64> = xcol.iter().zip(&fit1.residuals).map(|(a, e)| a - e).collect();
    let mut second = vec![xhat];
    second.extend(d);
    let fit2 = ols(&Matrix::from_columns(n * t, &second).unwrap(), &column_of(panel, y, &all)).unwrap();
    fit2.coefficients[0].unwrap()
}

/// Brute-force per-pair generalized estimator: the slope comes from a joint
/// OLS of Δy on (Δx, 1, controls), the weight from the SSR of Δx on
/// (1, controls). `controls(ti, si)` returns the pair's control columns.
pub fn per_pair_two_step(
    panel: &BalancedPanel,
    y: &str,
    x: &str,
    gaps: (usize, usize),
    controls: impl Fn(usize, usize) -> Vec<Vec<f64>>,
) -> (f64, Vec<(f64, f64)>) {
    let (n, t) = (panel.n_units(), panel.n_periods());
    let (ys, xs) = (panel.series(y).unwrap(), panel.series(x).unwrap());
    let mut parts = Vec::new();
    for ti in 0..t {
        for si in ti + 1..t {
            let k = si - ti;
            if k < gaps.0 || k > gaps.1 {
                continue;
            }
            let dy: Vec<f64> = (0..n).map(|i| ys.get(i, si) - ys.get(i, ti)).collect();
            let dx: Vec<f64> = (0..n).map(|i| xs.get(i, si) - xs.get(i, ti)).collect();
            let mut ctl = vec![vec![1.0; n]];
            ctl.extend(controls(ti, si));
            let mut joint = vec![dx.clone()];
            joint.extend(ctl.iter().cloned());
            let beta = ols(&Matrix::from_columns(n, &joint).unwrap(), &dy).unwrap().coefficients[0].unwrap();
            let ssr = ols(&Matrix::from_columns(n, &ctl).unwrap(), &dx).unwrap().sum_sq_residuals;
            parts.push((beta, ssr));
        }
    }
    let total: f64 = parts.iter().map(|p| p.1).sum();
    let agg = parts.iter().map(|(b, w)| b * w / total).sum();
    (agg, parts.into_iter().map(|(b, w)| (b, w / total)).collect())
}
