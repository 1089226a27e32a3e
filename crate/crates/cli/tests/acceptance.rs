//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p lindblad-extrap-cli --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lindblad_extrap::extrapolation::{extrapolate, lebesgue_at_zero, richardson_weights};
use lindblad_extrap::grids::{build_grid, chebyshev_grid, equidistant_grid, quantization_threshold, quantize_grid, GridKind};
use lindblad_extrap::integrators::{evolve, kraus_step};
use lindblad_extrap::model::expectation;
use lindblad_extrap::reference::{exact_evolve, exact_evolve_matrix, PropagatorMethod};
use lindblad_extrap::sampling::{hoeffding_shots, node_states, noiseless_curve, sample_states, ShotMode};
use lindblad_extrap::theory::{
    build_sequence, dilation_expansion, gevrey_envelope_check, m2_bound, verify_bound, BoundConstants, SequenceVariant,
};
use lindblad_extrap::zoo::{build_tfim, random_mixed_state, random_model, random_pure_state, TfimParams};
use lindblad_extrap::{ExtrapolationMethod, ExtrapolationWeights, IntegratorKind};
use lindblad_extrap_cli::experiment::cmd_reproduce;
use lindblad_extrap_cli::{recipe, Experiment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn kraus_order() -> Outcome {
    let (m, _) = random_model(8, 1, 1, 1.0).unwrap();
    let rho = random_pure_state(8, 1).unwrap();
    let exact = exact_evolve(&m, &rho, 1.0, 1e-12).unwrap();
    let steps: Vec<usize> = (4..=10).map(|p| 1usize << p).collect();
    let errs: Vec<f64> = steps
        .iter()
        .map(|&n| {
            let traj = evolve(&m, &rho, 1.0, n, IntegratorKind::KrausFirstOrder).unwrap();
            (traj.final_state() - exact.state.matrix()).trace_norm()
        })
        .collect();
    let taus: Vec<f64> = steps.iter().map(|&n| 1.0 / n as f64).collect();
    let s = slope(&taus, &errs);
    outcome((s - 1.0).abs() <= 0.1, format!("slope {s:.4} (target 1 +- 0.1)"))
}

fn kraus_local() -> Outcome {
    let (m, _) = random_model(8, 1, 1, 1.0).unwrap();
    let l = m.generator_bound();
    let envelope = m2_bound(&m) + l * l / 2.0;
    let taus: Vec<f64> = (4..=10).map(|p| 0.5f64.powi(p)).collect();
    let mut worst_slope_dev: f64 = 0.0;
    let mut worst_coef: f64 = 0.0;
    for seed in 0..3 {
        let rho = random_mixed_state(8, seed).unwrap();
        let errs: Vec<f64> = taus
            .iter()
            .map(|&tau| {
                let step = kraus_step(&m, rho.matrix(), tau).unwrap();
                let (exact, _) =
                    exact_evolve_matrix(&m, rho.matrix(), tau, 1e-14, PropagatorMethod::DenseExponential).unwrap();
                (step - exact).trace_norm()
            })
            .collect();
        worst_slope_dev = worst_slope_dev.max((slope(&taus, &errs) - 2.0).abs());
        for (e, t) in errs.iter().zip(&taus) {
            worst_coef = worst_coef.max(e / (t * t));
        }
    }
    outcome(
        worst_slope_dev <= 0.1 && worst_coef <= envelope,
        format!("max |slope - 2| {worst_slope_dev:.4}, max err/tau^2 {worst_coef:.3} <= {envelope:.3}"),
    )
}

fn dilation_consistency() -> Outcome {
    let (m, _) = build_tfim(&TfimParams {
        n_q: 2,
        ..TfimParams::default()
    })
    .unwrap();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..5 {
        let rho = random_mixed_state(4, seed).unwrap();
        match dilation_expansion(&m, &rho, 5) {
            Ok(e) => {
                worst.0 = worst.0.max(e.coefficients[0].max_abs_diff(rho.matrix()));
                worst.1 = worst.1.max(e.generator_residual);
                worst.2 = worst.2.max(e.odd_trace_max);
            }
            Err(err) => return outcome(false, format!("expansion failed: {err}")),
        }
    }
    outcome(
        worst.0 == 0.0 && worst.1 <= 1e-10 && worst.2 <= 1e-12,
        format!(
            "|rho_R^0 - rho| = {:.1e}, |rho_R^2 - L rho|_1 = {:.2e}, odd traces {:.2e}",
            worst.0, worst.1, worst.2
        ),
    )
}

fn equidistant_lebesgue() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=10 {
        let g = equidistant_grid(1.0, n).unwrap();
        let l1 = lebesgue_at_zero(&g, ExtrapolationMethod::Interpolation).unwrap();
        let expected = 2f64.powi(n as i32 + 1) - 1.0;
        worst = worst.max((l1 - expected).abs() / expected);
    }
    outcome(worst <= 1e-6, format!("max relative deviation from 2^(n+1)-1: {worst:.2e}"))
}

fn quantized_nodes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=64usize);
        let hi = 10f64.powf(rng.random_range(-5.0..0.0));
        let t_hat = quantization_threshold(hi, n) * rng.random_range(1.0001..100.0);
        let q = match quantize_grid(&chebyshev_grid(hi, n).unwrap(), t_hat) {
            Ok(q) => q,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let c = q.step_counts().unwrap();
        let ordered = q.nodes().windows(2).all(|w| w[0] < w[1]);
        let distinct = c.windows(2).all(|w| w[0] != w[1]) && {
            let mut s = c.to_vec();
            s.sort_unstable();
            s.dedup();
            s.len() == c.len()
        };
        if !(ordered && distinct) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures} failures in 1000 configurations"))
}

fn variance_ratio() -> Outcome {
    let v: f64 = 1e-6;
    let trials = 10_000;
    let f = |t: f64| 0.3 + 0.5 * t - t * t + 0.2 * t.powi(3);
    let mut stats = Vec::new();
    for kind in [GridKind::Equidistant, GridKind::Chebyshev] {
        let grid = build_grid(kind, 0.5, 9).unwrap();
        let w = richardson_weights(&grid).unwrap();
        let clean: Vec<f64> = grid.nodes().iter().map(|&t| f(t)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let estimates: Vec<f64> = (0..trials)
            .map(|_| {
                let noisy: Vec<f64> = clean
                    .iter()
                    .map(|c| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        c + v.sqrt() * z
                    })
                    .collect();
                extrapolate(&w, &noisy).unwrap().value_at_zero
            })
            .collect();
        let mean = estimates.iter().sum::<f64>() / trials as f64;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        stats.push((var, v * w.sum_of_squares(), w.gamma_l1));
    }
    let ratio = stats[0].0 / stats[1].0;
    let predicted = stats[0].1 / stats[1].1;
    let within = (ratio / predicted - 1.0).abs() <= 0.2;
    outcome(
        ratio > 10.0 && within,
        format!(
            "variance ratio {ratio:.1} (predicted {predicted:.1}, |gamma|_1 {:.0} vs {:.2})",
            stats[0].2, stats[1].2
        ),
    )
}

fn bias_reduction() -> Outcome {
    let (m, obs) = random_model(8, 1, 1, 1.0).unwrap();
    let rho = random_pure_state(8, 1).unwrap();
    let t = 1.0;
    let hi = 0.03;
    let exact = expectation(&exact_evolve(&m, &rho, t, 1e-13).unwrap().state, &obs).unwrap();
    let mut errs = Vec::new();
    let mut best_single = f64::INFINITY;
    for n in [2usize, 4, 8] {
        let grid = quantize_grid(&chebyshev_grid(hi, n).unwrap(), t).unwrap();
        let values = noiseless_curve(&m, &rho, &grid, &obs, IntegratorKind::KrausFirstOrder).unwrap();
        let w = richardson_weights(&grid).unwrap();
        errs.push((extrapolate(&w, &values).unwrap().value_at_zero - exact).abs());
        if n == 8 {
            best_single = values.iter().map(|v| (v - exact).abs()).fold(f64::INFINITY, f64::min);
        }
    }
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let ratio = errs[2] / best_single;
    outcome(
        monotone && ratio <= 1e-2,
        format!(
            "errors n=2,4,8: {:.2e}, {:.2e}, {:.2e}; n=8 / best single node {ratio:.2e}",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn coefficient_bounds() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &l in &[1.5, 2.0, 4.0, 8.0] {
        let cases_l = [
            (SequenceVariant::Kraus, l * l / 16.0),
            (SequenceVariant::Kraus, l * l / 4.0),
            (SequenceVariant::Dilated, 1.0),
            (SequenceVariant::Dilated, 2.0),
            (SequenceVariant::Dilated, 4.0),
        ];
        for (variant, aux) in cases_l {
            let seq = build_sequence(variant, l, aux, 12, 12).unwrap();
            let bc = BoundConstants::for_sequence(&seq);
            worst = worst.max(verify_bound(&seq, bc.c1, bc.c2).max_ratio);
            cases += 1;
        }
    }
    outcome(worst <= 1.0, format!("{cases} tables, max ratio {worst:.3e}"))
}

fn gevrey_envelope() -> Outcome {
    let (m, obs) = random_model(4, 1, 1, 1.0).unwrap();
    let rho = random_pure_state(4, 1).unwrap();
    let mut worst: f64 = 0.0;
    for kind in [IntegratorKind::KrausFirstOrder, IntegratorKind::DilatedHamiltonian] {
        let r = gevrey_envelope_check(&m, &rho, &obs, kind, 1.0, 3).unwrap();
        for d in &r.derivatives {
            worst = worst.max(d.estimate / d.envelope);
        }
    }
    outcome(worst <= 1.0, format!("max |f^(k)| / (sigma nu^k k!) over k<=3: {worst:.3e}"))
}

fn hoeffding_calibration() -> Outcome {
    let (eps, delta) = (0.05, 0.1);
    let (m, obs) = random_model(4, 1, 3, 1.0).unwrap();
    let rho = random_pure_state(4, 3).unwrap();
    let grid = quantize_grid(&chebyshev_grid(0.05, 4).unwrap(), 1.0).unwrap();
    let w = ExtrapolationWeights::new(&grid, ExtrapolationMethod::Interpolation).unwrap();
    let states = node_states(&m, &rho, &grid, IntegratorKind::KrausFirstOrder).unwrap();
    let clean: Vec<f64> = states.iter().map(|s| obs.expectation_of(s.matrix()).unwrap()).collect();
    let target = extrapolate(&w, &clean).unwrap().value_at_zero;
    let n_shots = hoeffding_shots(obs.bound_alpha(), w.gamma_l1, eps, delta).unwrap();
    let trials = 500;
    let failures = (0..trials)
        .filter(|&trial| {
            let est = sample_states(&states, &obs, n_shots, 77, trial, ShotMode::Born).unwrap();
            let means: Vec<f64> = est.iter().map(|e| e.mean).collect();
            (extrapolate(&w, &means).unwrap().value_at_zero - target).abs() > eps
        })
        .count();
    let rate = failures as f64 / trials as f64;
    outcome(
        rate <= delta,
        format!("N_S = {n_shots}, failure rate {rate:.3} <= {delta} over {trials} trials"),
    )
}

fn figure_recipes() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for fig in ["fig1", "fig2", "fig3", "fig4"] {
        let cfg = recipe(fig).unwrap();
        let exp = Experiment::new(&cfg).unwrap();
        let s = cmd_reproduce(&exp, fig, &out.path().join(fig), 10, Default::default()).unwrap();
        ok &= s.chebyshev_wins >= 8;
        let flag = if s.noise_surrogate { " gaussian-surrogate" } else { "" };
        lines.push(format!("{fig} {}/10 ({} shots {}{flag})", s.chebyshev_wins, s.n_shots, s.shot_mode));
    }
    outcome(ok, format!("Chebyshev better in: {}", lines.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("order of accuracy (kraus)", Duration::from_secs(30), kraus_order),
        ("local error (kraus)", Duration::from_secs(10), kraus_local),
        ("dilation consistency", Duration::from_secs(5), dilation_consistency),
        ("equidistant lebesgue constant", Duration::from_secs(1), equidistant_lebesgue),
        ("quantized-node properties", Duration::from_secs(5), quantized_nodes),
        ("chebyshev vs equidistant variance", Duration::from_secs(30), variance_ratio),
        ("bias reduction", Duration::from_secs(120), bias_reduction),
        ("coefficient bounds", Duration::from_secs(5), coefficient_bounds),
        ("gevrey envelope", Duration::from_secs(60), gevrey_envelope),
        ("hoeffding calibration", Duration::from_secs(300), hoeffding_calibration),
        ("figure-recipe regeneration", Duration::from_secs(900), figure_recipes),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let passed = o.passed && elapsed <= budget;
        if !passed {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.2}s / {}s]",
            if passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", 11 - failed, 11);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
