use lindblad_extrap::extrapolation::{extrapolate, lebesgue_at_zero, regression_weights, richardson_weights, ExtrapolationMethod};
use lindblad_extrap::grids::{chebyshev_grid, equidistant_grid, quantize_grid, StepGrid};
use lindblad_extrap::integrators::evolve;
use lindblad_extrap::model::expectation;
use lindblad_extrap::reference::exact_evolve;
use lindblad_extrap::zoo::{random_model, random_pure_state};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn monomial_values(grid: &StepGrid, k: i32) -> Vec<f64> {
    grid.nodes().iter().map(|t| t.powi(k)).collect()
}

proptest! {
    #[test]
    fn interpolation_is_exact_on_monomials(n in 1usize..=12, hi in 1e-3f64..2.0, cheb in any::<bool>()) {
        let g = if cheb { chebyshev_grid(hi, n) } else { equidistant_grid(hi, n) }.unwrap();
        let w = richardson_weights(&g).unwrap();
        prop_assert!((w.gammas.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(w.gamma_l1 >= 1.0 - 1e-12);
        for k in 0..=n as i32 {
            let v = extrapolate(&w, &monomial_values(&g, k)).unwrap().value_at_zero;
            let expected = if k == 0 { 1.0 } else { 0.0 };
            let scale = hi.powi(k).max(1e-300);
            prop_assert!((v - expected).abs() <= 1e-9 * w.gamma_l1 * scale.max(expected), "k={} v={}", k, v);
        }
    }

    #[test]
    fn regression_is_exact_on_low_degree_monomials(n in 2usize..=12, hi in 1e-3f64..2.0, frac in 0.0f64..1.0) {
        let g = chebyshev_grid(hi, n).unwrap();
        let degree = ((n - 1) as f64 * frac) as usize;
        let w = regression_weights(&g, degree).unwrap();
        prop_assert!((w.gammas.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for k in 0..=degree as i32 {
            let v = extrapolate(&w, &monomial_values(&g, k)).unwrap().value_at_zero;
            let expected = if k == 0 { 1.0 } else { 0.0 };
            prop_assert!((v - expected).abs() <= 1e-9 * w.gamma_l1 * hi.powi(k).max(expected));
        }
    }

    #[test]
    fn interpolation_weights_are_scale_invariant(n in 1usize..=16, hi in 1e-3f64..1.0, s in 1e-3f64..1e3) {
        let g = chebyshev_grid(hi, n).unwrap();
        let a = richardson_weights(&g).unwrap();
        let b = richardson_weights(&g.scaled(s).unwrap()).unwrap();
        for (x, y) in a.gammas.iter().zip(&b.gammas) {
            prop_assert!((x - y).abs() <= 1e-10 * a.gamma_l1);
        }
    }
}

#[test]
fn equidistant_lebesgue_constant_is_exponential() {
    for n in 1..=10 {
        let g = equidistant_grid(0.01, n).unwrap();
        let l1 = lebesgue_at_zero(&g, ExtrapolationMethod::Interpolation).unwrap();
        let exact = 2f64.powi(n as i32 + 1) - 1.0;
        assert!((l1 - exact).abs() <= 1e-6 * exact, "n={n}: {l1}");
    }
}

#[test]
fn quantized_chebyshev_keeps_small_lebesgue_constant() {
    for n in [4usize, 8, 16, 32] {
        let hi = 1e-3;
        let g = chebyshev_grid(hi, n).unwrap();
        let t = 2.0 * hi * (n * n) as f64 * (n as f64).ln() * 1.01;
        let t = t.max(std::f64::consts::PI.powi(2) * hi * (n * n) as f64 * 1.01);
        let q = quantize_grid(&g, t).unwrap();
        let a = lebesgue_at_zero(&g, ExtrapolationMethod::Interpolation).unwrap();
        let b = lebesgue_at_zero(&q, ExtrapolationMethod::Interpolation).unwrap();
        assert!(b <= 2.0 * a && a <= 2.0 * b, "n={n}: {a} vs {b}");
    }
}

#[test]
fn gevrey_envelope_interpolation_converges_geometrically() {
    // f(tau) = sigma sum_k (nu tau)^k = sigma / (1 - nu tau), the extremal Gevrey-type series.
    let (sigma, nu) = (2.0, 3.0);
    let hi = 1.0 / (2.0 * nu);
    let mut errs = Vec::new();
    for n in [2usize, 4, 6, 8] {
        let g = chebyshev_grid(hi, n).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|t| sigma / (1.0 - nu * t)).collect();
        let w = richardson_weights(&g).unwrap();
        errs.push((extrapolate(&w, &vals).unwrap().value_at_zero - sigma).abs());
    }
    for w in errs.windows(2) {
        assert!(w[1] < 0.2 * w[0], "{errs:?}");
    }
}

#[test]
fn extrapolation_cancels_error_orders() {
    let (m, obs) = random_model(4, 1, 2, 1.0).unwrap();
    let rho = random_pure_state(4, 2).unwrap();
    let t = 1.0;
    let exact = expectation(&exact_evolve(&m, &rho, t, 1e-13).unwrap().state, &obs).unwrap();
    let kind = lindblad_extrap::IntegratorKind::KrausFirstOrder;
    for n in 1..=3usize {
        let mut his = Vec::new();
        let mut errs = Vec::new();
        for p in 0..4 {
            let hi = 0.1 * 0.5f64.powi(p);
            // Nodes hi/k for k = n+1..1 divide T exactly.
            let nodes: Vec<f64> = (1..=n + 1).rev().map(|k| hi / k as f64).collect();
            let g = StepGrid::from_nodes(nodes, hi).unwrap();
            let vals: Vec<f64> = g
                .nodes()
                .iter()
                .map(|&tau| {
                    let traj = evolve(&m, &rho, t, (t / tau).round() as usize, kind).unwrap();
                    obs.expectation_of(traj.final_state()).unwrap()
                })
                .collect();
            let w = richardson_weights(&g).unwrap();
            errs.push((extrapolate(&w, &vals).unwrap().value_at_zero - exact).abs());
            his.push(hi);
        }
        let order = (errs[0] / errs[3]).ln() / (his[0] / his[3]).ln();
        assert!(order >= n as f64 + 0.5, "n={n}: order {order}, errs {errs:?}");
    }
}

#[test]
fn noise_variance_matches_sum_of_squared_weights() {
    let g = chebyshev_grid(0.01, 6).unwrap();
    let w = richardson_weights(&g).unwrap();
    let v: f64 = 1e-6;
    let normal = Normal::new(0.0, v.sqrt()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let trials = 10_000;
    let samples: Vec<f64> = (0..trials)
        .map(|_| {
            let vals: Vec<f64> = (0..g.len()).map(|_| 0.3 + normal.sample(&mut rng)).collect();
            extrapolate(&w, &vals).unwrap().value_at_zero
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let predicted = v * w.sum_of_squares();
    assert!((var / predicted - 1.0).abs() < 0.05, "{var} vs {predicted}");
    assert!(predicted <= v * w.gamma_l1.powi(2));
}
