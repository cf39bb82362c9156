//! Built-in equivalence check on random panels: TWFE against its FD and
//! pairwise decompositions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use rayon::prelude::*;
use serde::Serialize;
use twfe_core::{fd_decomposition, verify_equivalence, BalancedPanel, Matrix};

pub const TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Draw {
    Gaussian,
    Uniform,
    HeavyTailed,
}

impl Draw {
    fn sample(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Draw::Gaussian => rng.sample(StandardNormal),
            Draw::Uniform => Uniform::new(-1.0, 1.0).expect("valid bounds").sample(rng),
            Draw::HeavyTailed => StudentT::new(3.0).expect("valid dof").sample(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrawResult {
    pub draw: usize,
    pub distribution: Draw,
    pub n_units: usize,
    pub n_periods: usize,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfcheckReport {
    pub seed: u64,
    pub draws: Vec<DrawResult>,
    pub max_relative_gap: f64,
}

impl SelfcheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_gap < TOLERANCE
    }
}

/// Random panel for draw `index`: N in [2, 50], T in [2, 15],
/// `y = α_i + γ_t + b·x + ε`.
pub fn random_panel(seed: u64, index: usize) -> (Draw, BalancedPanel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let draw = [Draw::Gaussian, Draw::Uniform, Draw::HeavyTailed][index % 3];
    let n = rng.random_range(2..=50);
    let t = rng.random_range(2..=15);
    let slope = 2.0 * draw.sample(&mut rng);
    let unit: Vec<f64> = (0..n).map(|_| draw.sample(&mut rng)).collect();
    let time: Vec<f64> = (0..t).map(|_| draw.sample(&mut rng)).collect();
    let mut x = Matrix::zeros(n, t);
    let mut y = Matrix::zeros(n, t);
    for i in 0..n {
        for s in 0..t {
            let xv = unit[i] * 0.5 + draw.sample(&mut rng);
            x.set(i, s, xv);
            y.set(i, s, unit[i] + time[s] + slope * xv + draw.sample(&mut rng));
        }
    }
    let panel = BalancedPanel::with_shape(n, 1, t)
        .and_then(|p| p.with_series("x", x))
        .and_then(|p| p.with_series("y", y))
        .expect("generated panel is valid");
    (draw, panel)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// FD aggregate that forgets the longest gap, used to prove the check can
/// fail.
fn faulty_aggregate(panel: &BalancedPanel) -> twfe_core::Result<f64> {
    let d = fd_decomposition(panel, "y", "x")?;
    let kept = &d.components[..d.components.len().saturating_sub(1).max(1)];
    let total: f64 = kept.iter().map(|c| c.omega).sum();
    Ok(kept.iter().filter_map(|c| Some(c.beta? * c.omega / total)).sum())
}

pub fn selfcheck(seed: u64, draws: usize, inject_fault: bool) -> twfe_core::Result<SelfcheckReport> {
    let results = (0..draws)
        .into_par_iter()
        .map(|index| {
            let (distribution, panel) = random_panel(seed, index);
            let rep = verify_equivalence(&panel, "y", "x")?;
            let mut gap = rep.max_relative_gap;
            if inject_fault {
                gap = gap.max(relative_gap(rep.twfe, faulty_aggregate(&panel)?));
            }
            Ok(DrawResult {
                draw: index,
                distribution,
                n_units: panel.n_units(),
                n_periods: panel.n_periods(),
                relative_gap: gap,
            })
        })
        .collect::<twfe_core::Result<Vec<_>>>()?;
    let max_relative_gap = results.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
    Ok(SelfcheckReport { seed, draws: results, max_relative_gap })
}
