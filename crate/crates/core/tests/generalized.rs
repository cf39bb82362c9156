use proptest::prelude::*;
use twfe_core::{
    fd, gap_restricted, generalized_twfe, pretrend_covariate, twfe, BalancedPanel, CovariateSpec, GapRange, Matrix,
    PretrendConfig, WeightScheme,
};
use twfe_testkit::{per_pair_two_step, random_matrix, random_panel, rel_diff, rng, Draw};

fn spec_with(levels: &[&str], changes: &[&str]) -> CovariateSpec {
    CovariateSpec {
        time_invariant: levels.iter().map(|s| s.to_string()).collect(),
        differenced: changes.iter().map(|s| s.to_string()).collect(),
        pre_period: Vec::new(),
    }
}

#[test]
fn reduces_to_twfe_and_fd() {
    let mut r = rng(60);
    for _ in 0..20 {
        let p = random_panel(&mut r, 11, 6, Draw::Gaussian);
        let full = GapRange::full(6);
        let g = generalized_twfe(&p, "y", "x", &CovariateSpec::default(), full, WeightScheme::Ssr).unwrap();
        let tw = twfe(&p, "y", "x", &[]).unwrap().beta;
        assert!(rel_diff(g.estimate.beta, tw) < 1e-10);
        assert!(rel_diff(gap_restricted(&p, "y", "x", full).unwrap().beta, tw) < 1e-10);
        for k in 1..6 {
            let range = GapRange::new(k, k, 6).unwrap();
            let f = fd(&p, "y", "x", k).unwrap().beta;
            assert!(rel_diff(gap_restricted(&p, "y", "x", range).unwrap().beta, f) < 1e-10);
            let g = generalized_twfe(&p, "y", "x", &CovariateSpec::default(), range, WeightScheme::Ssr).unwrap();
            assert!(rel_diff(g.estimate.beta, f) < 1e-10);
        }
    }
}

#[test]
fn no_controls_raw_and_ssr_agree() {
    let p = random_panel(&mut rng(61), 10, 5, Draw::Uniform);
    let range = GapRange::new(1, 3, 5).unwrap();
    let a = generalized_twfe(&p, "y", "x", &CovariateSpec::default(), range, WeightScheme::Ssr).unwrap();
    let b = generalized_twfe(&p, "y", "x", &CovariateSpec::default(), range, WeightScheme::Raw).unwrap();
    assert!(rel_diff(a.estimate.beta, b.estimate.beta) < 1e-12);
    for (ca, cb) in a.components.iter().zip(&b.components) {
        assert!((ca.omega - cb.omega).abs() < 1e-12);
    }
}

#[test]
fn restricted_range_weights_renormalize() {
    let p = random_panel(&mut rng(62), 10, 7, Draw::Gaussian);
    let range = GapRange::new(2, 4, 7).unwrap();
    let g = generalized_twfe(&p, "y", "x", &spec_with(&["w"], &[]), range, WeightScheme::Ssr).unwrap();
    assert_eq!(g.components.len(), 5 + 4 + 3);
    assert!(g.components.iter().all(|c| (2..=4).contains(&(c.s - c.t))));
    assert!((g.components.iter().map(|c| c.omega).sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(g.components.iter().all(|c| c.n_controls == 2));
}

fn time_invariant_panel(seed: u64, n: usize, t: usize) -> BalancedPanel {
    let mut r = rng(seed);
    let base = random_panel(&mut r, n, t, Draw::Gaussian);
    let noise = random_matrix(&mut r, n, t, Draw::Gaussian);
    let wi = random_matrix(&mut r, n, 1, Draw::Gaussian);
    let mut x = Matrix::zeros(n, t);
    let mut w = Matrix::zeros(n, t);
    for i in 0..n {
        for s in 0..t {
            x.set(i, s, i as f64 * 0.1 + (s * s) as f64 * 0.2 + 0.8 * wi.get(i, 0) * s as f64 + noise.get(i, s));
            w.set(i, s, wi.get(i, 0));
        }
    }
    base.with_series("x", x).unwrap().with_series("w", w).unwrap()
}

#[test]
fn matches_per_pair_oracle_time_invariant() {
    let p = time_invariant_panel(63, 25, 6);
    let w = p.series("w").unwrap().clone();
    for scheme_range in [(1, 5), (1, 2), (3, 5)] {
        let range = GapRange::new(scheme_range.0, scheme_range.1, 6).unwrap();
        let g = generalized_twfe(&p, "y", "x", &spec_with(&["w"], &[]), range, WeightScheme::Ssr).unwrap();
        let (agg, parts) = per_pair_two_step(&p, "y", "x", scheme_range, |ti, _| vec![w.column(ti)]);
        assert!(rel_diff(g.estimate.beta, agg) < 1e-8);
        for (c, (b, om)) in g.components.iter().zip(&parts) {
            assert!(rel_diff(c.beta.unwrap(), *b) < 1e-8);
            assert!((c.omega - om).abs() < 1e-10);
        }
    }
}

#[test]
fn matches_per_pair_oracle_mixed_controls() {
    let p = random_panel(&mut rng(64), 30, 5, Draw::HeavyTailed);
    let (w, x2) = (p.series("w").unwrap().clone(), p.series("x2").unwrap().clone());
    let g = generalized_twfe(&p, "y", "x", &spec_with(&["w"], &["x2"]), GapRange::full(5), WeightScheme::Ssr).unwrap();
    let (agg, _) = per_pair_two_step(&p, "y", "x", (1, 4), |ti, si| {
        let d: Vec<f64> = (0..30).map(|i| x2.get(i, si) - x2.get(i, ti)).collect();
        vec![w.column(ti), d]
    });
    assert!(rel_diff(g.estimate.beta, agg) < 1e-8);
}

#[test]
fn raw_scheme_weights() {
    let p = time_invariant_panel(65, 20, 5);
    let g = generalized_twfe(&p, "y", "x", &spec_with(&["w"], &[]), GapRange::full(5), WeightScheme::Raw).unwrap();
    let x = p.series("x").unwrap();
    let mut raw = Vec::new();
    for ti in 0..5 {
        for si in ti + 1..5 {
            let dx: Vec<f64> = (0..20).map(|i| x.get(i, si) - x.get(i, ti)).collect();
            let m = dx.iter().sum::<f64>() / 20.0;
            raw.push(dx.iter().map(|v| (v - m) * (v - m)).sum::<f64>());
        }
    }
    let total: f64 = raw.iter().sum();
    let mut agg = 0.0;
    for (c, r) in g.components.iter().zip(&raw) {
        assert!((c.omega - r / total).abs() < 1e-12);
        agg += c.beta.unwrap() * r / total;
    }
    assert!(rel_diff(g.estimate.beta, agg) < 1e-12);
}

#[test]
fn pretrend_control_matches_oracle() {
    let n = 15;
    let mut r = rng(66);
    let p = random_panel(&mut r, n, 4, Draw::Gaussian);
    let p = BalancedPanel::new(p.units().to_vec(), vec![2000, 2001, 2002, 2003])
        .unwrap()
        .with_series("y", p.series("y").unwrap().clone())
        .unwrap()
        .with_series("x", p.series("x").unwrap().clone())
        .unwrap();
    let pre_x = random_matrix(&mut r, n, 16, Draw::Gaussian);
    let pre = BalancedPanel::new(p.units().to_vec(), (1984..2000).collect()).unwrap().with_series("x", pre_x).unwrap();
    let p = p.with_presample(pre);
    let spec = CovariateSpec { pre_period: vec![PretrendConfig::new("x")], ..Default::default() };
    let g = generalized_twfe(&p, "y", "x", &spec, GapRange::full(4), WeightScheme::Ssr).unwrap();
    let cfg = PretrendConfig::new("x");
    let slopes: Vec<Vec<f64>> = (0..4).map(|ti| pretrend_covariate(&p, &cfg, 2000 + ti as i64).unwrap()).collect();
    let (agg, _) = per_pair_two_step(&p, "y", "x", (1, 3), |ti, _| vec![slopes[ti].clone()]);
    assert!(rel_diff(g.estimate.beta, agg) < 1e-8);
    assert!(g.components.iter().all(|c| c.n_controls == 2));
}

#[test]
fn fully_explained_pair_is_dropped() {
    // w reproduces the change in x for the first pair only
    let x = Matrix::from_rows(&[vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 1.0], vec![0.0, 3.0, 7.0], vec![0.0, 4.0, 2.0]])
        .unwrap();
    let w = Matrix::from_rows(&[vec![1.0, 5.0, 0.0], vec![2.0, 6.0, 0.0], vec![3.0, 7.0, 0.0], vec![4.0, 8.0, 0.0]])
        .unwrap();
    let y = Matrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.5, 3.0, 1.0], vec![2.0, 2.0, 0.0], vec![1.0, 4.0, 5.0]])
        .unwrap();
    let p = BalancedPanel::with_shape(4, 1, 3)
        .unwrap()
        .with_series("x", x)
        .unwrap()
        .with_series("w", w)
        .unwrap()
        .with_series("y", y)
        .unwrap();
    let g = generalized_twfe(&p, "y", "x", &spec_with(&["w"], &[]), GapRange::full(3), WeightScheme::Ssr).unwrap();
    assert_eq!(g.components[0].beta, None);
    assert_eq!(g.components[0].omega, 0.0);
    assert!((g.components.iter().map(|c| c.omega).sum::<f64>() - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn affine_controls_leave_estimate_unchanged(seed in any::<u64>(), a in -5.0f64..5.0, b in 0.2f64..4.0) {
        let p = random_panel(&mut rng(seed), 12, 5, Draw::Gaussian);
        let moved = p.series("w").unwrap().map(|v| a + b * v);
        let q = p.clone().with_series("w", moved).unwrap();
        let spec = spec_with(&["w"], &["x2"]);
        let e1 = generalized_twfe(&p, "y", "x", &spec, GapRange::full(5), WeightScheme::Ssr).unwrap();
        let e2 = generalized_twfe(&q, "y", "x", &spec, GapRange::full(5), WeightScheme::Ssr).unwrap();
        prop_assert!(rel_diff(e1.estimate.beta, e2.estimate.beta) < 1e-8);
    }

    #[test]
    fn weights_are_a_distribution(seed in any::<u64>(), k_min in 1usize..4, span in 0usize..3) {
        let p = random_panel(&mut rng(seed), 10, 6, Draw::Uniform);
        let range = GapRange::new(k_min, (k_min + span).min(5), 6).unwrap();
        for scheme in [WeightScheme::Ssr, WeightScheme::Raw] {
            let g = generalized_twfe(&p, "y", "x", &spec_with(&["w"], &[]), range, scheme).unwrap();
            prop_assert!(g.components.iter().all(|c| c.omega >= 0.0));
            prop_assert!((g.components.iter().map(|c| c.omega).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
