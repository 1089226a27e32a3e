//! Gevrey-class constants for the extrapolated observable curve and a
//! finite-difference check of the derivative envelope |f^{(k)}| <= sigma nu^k k!.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sequences::{BoundConstants, SequenceVariant};
use crate::error::{Error, Result};
use crate::integrators::{evolve_with, kraus_step, EvolveOptions, IntegratorKind};
use crate::model::{ComplexMatrix, DensityMatrix, LindbladModel, Observable};
use crate::zoo::random_mixed_state;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyConstants {
    pub c1: f64,
    pub c2: f64,
    pub sigma: f64,
    pub nu: f64,
    pub tau_max: f64,
    /// max(T^2 max(ln T, 1), 1), the large-time factor folded into nu.
    pub time_factor: f64,
    pub log_base: String,
}

/// (|H| + 1/2 sum_j |L_j|^2)^2, a bound on the second-order Kraus step term.
pub fn m2_bound(model: &LindbladModel) -> f64 {
    let h = model.hamiltonian().spectral_norm();
    let s: f64 = model.jumps().iter().map(|l| l.spectral_norm().powi(2)).sum();
    (h + 0.5 * s).powi(2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct M2Check {
    pub bound: f64,
    /// max over samples of |K(tau) rho - rho - tau L rho|_1 / tau^2.
    pub empirical: f64,
    pub passed: bool,
}

/// Samples random states and step sizes and compares the second-order
/// remainder of the Kraus step with `m2_bound`.
pub fn m2_empirical_check(model: &LindbladModel, taus: &[f64], n_states: usize, seed: u64) -> Result<M2Check> {
    let bound = m2_bound(model);
    let mut empirical: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..n_states {
        let rho = random_mixed_state(model.dim(), rand::Rng::random::<u64>(&mut rng) ^ s as u64)?;
        let lr = model.apply(rho.matrix())?;
        for &tau in taus {
            let step = kraus_step(model, rho.matrix(), tau)?;
            let rem: ComplexMatrix = step - rho.matrix() - lr.scale(tau);
            empirical = empirical.max(rem.trace_norm() / (tau * tau));
        }
    }
    Ok(M2Check {
        bound,
        empirical,
        passed: empirical <= bound * (1.0 + 1e-9) + 1e-12,
    })
}

fn time_factor(t: f64) -> f64 {
    (t * t * t.ln().max(1.0)).max(1.0)
}

/// sigma = 2e|O|, nu = 2 C1 C2 max(T^2 max(ln T, 1), 1), tau_max = 1/(2 nu).
pub fn gevrey_constants_for(variant: SequenceVariant, l: f64, aux: f64, obs_norm: f64, t: f64) -> Result<GevreyConstants> {
    if !(l > 1.0 && l.is_finite()) {
        return Err(Error::UnsupportedRegime(format!("Gevrey constants need l > 1, got {l}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("total time must be positive, got {t}")));
    }
    let bc = BoundConstants::for_variant(variant, l, aux);
    let tf = time_factor(t);
    let nu = 2.0 * bc.c1 * bc.c2 * tf;
    Ok(GevreyConstants {
        c1: bc.c1,
        c2: bc.c2,
        sigma: 2.0 * E * obs_norm,
        nu,
        tau_max: 1.0 / (2.0 * nu),
        time_factor: tf,
        log_base: "natural".into(),
    })
}

/// Kraus-variant constants from l and B.
pub fn gevrey_constants(l: f64, b: f64, obs_norm: f64, t: f64) -> Result<GevreyConstants> {
    gevrey_constants_for(SequenceVariant::Kraus, l, b, obs_norm, t)
}

/// Constants for a concrete model and integrator.
pub fn model_gevrey_constants(model: &LindbladModel, kind: IntegratorKind, obs: &Observable, t: f64) -> Result<GevreyConstants> {
    let l = model.generator_bound();
    match kind {
        IntegratorKind::KrausFirstOrder => gevrey_constants(l, m2_bound(model), obs.bound_alpha(), t),
        IntegratorKind::DilatedHamiltonian => gevrey_constants_for(
            SequenceVariant::Dilated,
            l,
            model.jumps().len() as f64,
            obs.bound_alpha(),
            t,
        ),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub k: usize,
    pub estimate: f64,
    pub envelope: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyReport {
    pub constants: GevreyConstants,
    pub tau: f64,
    pub total_time: f64,
    pub nodes_used: usize,
    pub derivatives: Vec<DerivativeCheck>,
    pub passed: bool,
}

/// Estimates f^{(k)}(tau0), f(tau) = Tr(O rho_tau(T)), by a least-squares
/// polynomial fit over step sizes T/n with integer n in a window around T/tau0.
pub fn curve_derivatives(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    obs: &Observable,
    kind: IntegratorKind,
    t: f64,
    tau0: f64,
    k_max: usize,
) -> Result<(Vec<f64>, usize)> {
    let n0 = t / tau0;
    if !(n0 >= 8.0) {
        return Err(Error::InvalidArgument(format!(
            "derivative window needs at least 8 steps at tau0 (T/tau0 = {n0})"
        )));
    }
    let degree = k_max + 3;
    let n_nodes = 2 * degree + 3;
    let half_width = 0.25;
    let mut steps: Vec<usize> = (0..n_nodes)
        .map(|i| {
            let x = -1.0 + 2.0 * i as f64 / (n_nodes - 1) as f64;
            (n0 * (1.0 + half_width * x)).round().max(1.0) as usize
        })
        .collect();
    steps.dedup();
    if steps.len() <= degree {
        return Err(Error::InvalidArgument("too few distinct step counts for the derivative fit".into()));
    }
    let opts = EvolveOptions::default();
    let mut x = Vec::with_capacity(steps.len());
    let mut y = Vec::with_capacity(steps.len());
    let scale = half_width * tau0;
    for &n in &steps {
        let traj = evolve_with(model, rho0.matrix(), t, n, kind, &opts)?;
        x.push((t / n as f64 - tau0) / scale);
        y.push(obs.expectation_of(traj.final_state())?);
    }
    let v = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    let coeffs = v
        .svd(true, true)
        .solve(&DVector::from_vec(y), 1e-14)
        .map_err(|e| Error::SolverFailure(format!("derivative fit failed: {e}")))?;
    let mut fact = 1.0;
    let derivs = (1..=k_max)
        .map(|k| {
            fact *= k as f64;
            coeffs[k] * fact / scale.powi(k as i32)
        })
        .collect();
    Ok((derivs, steps.len()))
}

/// Checks |f^{(k)}(tau_max/2)| <= sigma nu^k k! for k = 1..=k_max.
pub fn gevrey_envelope_check(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    obs: &Observable,
    kind: IntegratorKind,
    t: f64,
    k_max: usize,
) -> Result<GevreyReport> {
    let constants = model_gevrey_constants(model, kind, obs, t)?;
    let tau = constants.tau_max / 2.0;
    let (derivs, nodes_used) = curve_derivatives(model, rho0, obs, kind, t, tau, k_max)?;
    let mut fact = 1.0;
    let derivatives: Vec<DerivativeCheck> = derivs
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let k = i + 1;
            fact *= k as f64;
            let envelope = constants.sigma * constants.nu.powi(k as i32) * fact;
            DerivativeCheck {
                k,
                estimate: d.abs(),
                envelope,
                passed: d.abs() <= envelope,
            }
        })
        .collect();
    let passed = derivatives.iter().all(|d| d.passed);
    Ok(GevreyReport {
        constants,
        tau,
        total_time: t,
        nodes_used,
        derivatives,
        passed,
    })
}
