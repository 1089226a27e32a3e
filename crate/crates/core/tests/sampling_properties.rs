use lindblad_extrap::extrapolation::{extrapolate, richardson_weights};
use lindblad_extrap::grids::{chebyshev_grid, quantize_grid};
use lindblad_extrap::model::expectation;
use lindblad_extrap::sampling::{hoeffding_shots, node_states, noiseless_curve, noisy_curve, sample_states, Measurement, ShotMode};
use lindblad_extrap::zoo::{random_model, random_pure_state};
use lindblad_extrap::{DensityMatrix, IntegratorKind, Observable};

fn shot_variance(rho: &DensityMatrix, obs: &Observable, n_shots: u64) -> f64 {
    let o2 = obs.matrix() * obs.matrix();
    let m2 = obs_expect(&o2, rho);
    let m1 = expectation(rho, obs).unwrap();
    (m2 - m1 * m1) / n_shots as f64
}

fn obs_expect(m: &lindblad_extrap::ComplexMatrix, rho: &DensityMatrix) -> f64 {
    (m * rho.matrix()).trace().re
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn shot_means_are_unbiased_with_bounded_variance() {
    let (_, obs) = random_model(4, 1, 5, 1.0).unwrap();
    let rho = random_pure_state(4, 5).unwrap();
    let truth = expectation(&rho, &obs).unwrap();
    let meas = Measurement::new(&obs);
    let n_shots = 1000;
    let means: Vec<f64> = (0..1000)
        .map(|trial| meas.estimate(&rho, n_shots, 99, 0, trial, ShotMode::Born).unwrap().mean)
        .collect();
    let (grand, var) = mean_var(&means);
    let alpha = obs.bound_alpha();
    assert!((grand - truth).abs() < 4.0 * alpha / 1e3, "{grand} vs {truth}");
    assert!(var <= alpha * alpha / n_shots as f64);
    let predicted = shot_variance(&rho, &obs, n_shots);
    assert!((var / predicted - 1.0).abs() < 0.15, "{var} vs {predicted}");
}

#[test]
fn hoeffding_count_controls_failure_rate() {
    let (_, obs) = random_model(4, 1, 6, 1.0).unwrap();
    let rho = random_pure_state(4, 6).unwrap();
    let truth = expectation(&rho, &obs).unwrap();
    let (eps, delta) = (0.05, 0.1);
    let n_shots = hoeffding_shots(obs.bound_alpha(), 1.0, eps, delta).unwrap();
    let meas = Measurement::new(&obs);
    let failures = (0..1000)
        .filter(|&trial| {
            let e = meas.estimate(&rho, n_shots, 3, 0, trial, ShotMode::Born).unwrap();
            (e.mean - truth).abs() >= eps
        })
        .count();
    assert!(failures as f64 / 1000.0 <= delta);
}

#[test]
fn noisy_curve_converges_to_noiseless_curve() {
    let (m, obs) = random_model(4, 1, 7, 1.0).unwrap();
    let rho = random_pure_state(4, 7).unwrap();
    let q = quantize_grid(&chebyshev_grid(0.02, 4).unwrap(), 1.0).unwrap();
    let kind = IntegratorKind::KrausFirstOrder;
    let clean = noiseless_curve(&m, &rho, &q, &obs, kind).unwrap();
    let n_shots = 10_000_000;
    let noisy = noisy_curve(&m, &rho, &q, &obs, kind, n_shots, 21).unwrap();
    let states = node_states(&m, &rho, &q, kind).unwrap();
    for ((c, e), s) in clean.iter().zip(&noisy).zip(&states) {
        let sd = shot_variance(s, &obs, n_shots).sqrt();
        assert!((c - e.mean).abs() <= 3.0 * sd + 1e-12, "{c} vs {}", e.mean);
    }
}

#[test]
fn sampling_is_independent_of_pool_size() {
    let (m, obs) = random_model(4, 1, 8, 1.0).unwrap();
    let rho = random_pure_state(4, 8).unwrap();
    let q = quantize_grid(&chebyshev_grid(0.02, 6).unwrap(), 1.0).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| noisy_curve(&m, &rho, &q, &obs, IntegratorKind::DilatedHamiltonian, 500, 4).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn extrapolated_noise_is_amplified_by_weights() {
    let (m, obs) = random_model(4, 1, 9, 1.0).unwrap();
    let rho = random_pure_state(4, 9).unwrap();
    let q = quantize_grid(&chebyshev_grid(0.02, 4).unwrap(), 1.0).unwrap();
    let kind = IntegratorKind::KrausFirstOrder;
    let states = node_states(&m, &rho, &q, kind).unwrap();
    let w = richardson_weights(&q).unwrap();
    let n_shots = 2000;
    let max_node_var = states.iter().map(|s| shot_variance(s, &obs, n_shots)).fold(0.0, f64::max);
    let estimates: Vec<f64> = (0..1000)
        .map(|trial| {
            let est = sample_states(&states, &obs, n_shots, 13, trial, ShotMode::Born).unwrap();
            let vals: Vec<f64> = est.iter().map(|e| e.mean).collect();
            extrapolate(&w, &vals).unwrap().value_at_zero
        })
        .collect();
    let (_, var) = mean_var(&estimates);
    assert!(var <= w.sum_of_squares() * max_node_var * 1.1, "{var}");
}
