//! High-accuracy oracles: the exact propagator `exp(tL)` and the step-size
//! error coefficients `Gamma_1`, `Gamma_2` of a first-order integrator.
//!
//! For a one-step map `K(tau) = sum_n tau^n M_n` with `M_0 = I`, `M_1 = L`,
//! the numerical solution expands as `rho_tau(t) = rho(t) + tau Gamma_1(t) +
//! tau^2 Gamma_2(t) + ...` with `Gamma_k(0) = 0` and
//!
//! ```text
//! Gamma_1' = L Gamma_1 + D rho,                  D = M_2 - L^2/2
//! Gamma_2' = L Gamma_2 + D Gamma_1 + E rho,      E = M_3 - (L D + D L)/2 - L^3/6
//! ```
//!
//! Both systems are linear with constant coefficients, so they are solved
//! exactly by exponentiating a block lower-triangular superoperator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::IntegratorKind;
use crate::model::{ComplexMatrix, DensityMatrix, LindbladModel, C64, TOL_HERM};
use crate::theory::dilation::step_expansion_superoperators;

/// Largest system dimension propagated by dense superoperator exponentiation.
pub const DENSE_PROPAGATOR_MAX_DIM: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PropagatorMethod {
    /// Dense exponential for d <= 16, Runge-Kutta above.
    #[default]
    Auto,
    DenseExponential,
    RungeKutta,
}

#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub state: DensityMatrix,
    pub time: f64,
    /// Trace-norm error estimate.
    pub est_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaSolution {
    pub k: usize,
    pub value_at_t: ComplexMatrix,
    pub time: f64,
    pub est_error: f64,
}

/// Trace norm of a column-stacked vector viewed as a d x d matrix.
fn vec_trace_norm(v: &DVector<C64>, d: usize) -> f64 {
    ComplexMatrix::unvectorize(v, d).map(|m| m.trace_norm()).unwrap_or(f64::INFINITY)
}

/// exp(t S) v together with a consistency estimate against exp(tS/2)^2 v.
fn expm_apply(s: &DMatrix<C64>, t: f64, v: &DVector<C64>) -> (DVector<C64>, DVector<C64>) {
    let full = (s * C64::new(t, 0.0)).exp();
    let half = (s * C64::new(t / 2.0, 0.0)).exp();
    let a = &full * v;
    let b = &half * (&half * v);
    (a, b)
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")))
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")))
    }
}

/// exp(tL) rho0 within `tol` in trace norm; the output is not projected.
pub fn exact_evolve(model: &LindbladModel, rho0: &DensityMatrix, t: f64, tol: f64) -> Result<ReferenceSolution> {
    exact_evolve_with(model, rho0, t, tol, PropagatorMethod::Auto)
}

pub fn exact_evolve_with(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t: f64,
    tol: f64,
    method: PropagatorMethod,
) -> Result<ReferenceSolution> {
    let (m, est_error) = exact_evolve_matrix(model, rho0.matrix(), t, tol, method)?;
    let state = DensityMatrix::new(m.hermitian_part())
        .map_err(|e| Error::SolverFailure(format!("reference output is not a valid state: {e}")))?;
    Ok(ReferenceSolution {
        state,
        time: t,
        est_error,
    })
}

/// exp(tL) a for an arbitrary operator; returns the result and the error estimate.
pub fn exact_evolve_matrix(
    model: &LindbladModel,
    a: &ComplexMatrix,
    t: f64,
    tol: f64,
    method: PropagatorMethod,
) -> Result<(ComplexMatrix, f64)> {
    check_time(t)?;
    check_tol(tol)?;
    a.ensure_dim(model.dim())?;
    if t == 0.0 {
        return Ok((a.clone(), 0.0));
    }
    let d = model.dim();
    let dense = match method {
        PropagatorMethod::Auto => d <= DENSE_PROPAGATOR_MAX_DIM,
        PropagatorMethod::DenseExponential => true,
        PropagatorMethod::RungeKutta => false,
    };
    let (out, est) = if dense {
        let (x, y) = expm_apply(&model.superoperator(), t, &a.vectorize());
        let est = vec_trace_norm(&(&x - &y), d);
        (ComplexMatrix::unvectorize(&x, d)?, est)
    } else {
        dormand_prince(model, a, t, tol)?
    };
    if !(est <= tol) {
        return Err(Error::SolverFailure(format!(
            "reference propagator could not reach tolerance {tol:e} (estimate {est:e})"
        )));
    }
    Ok((out, est))
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince integration of a' = L a with PI step control.
///
/// The per-step error is bounded in trace norm by sqrt(d) times the Frobenius
/// norm of the embedded difference; the accumulated sum is the estimate.
fn dormand_prince(model: &LindbladModel, a0: &ComplexMatrix, t_end: f64, tol: f64) -> Result<(ComplexMatrix, f64)> {
    const MAX_STEPS: usize = 10_000_000;
    let sqrt_d = (model.dim() as f64).sqrt();
    // Local budget per unit time, with headroom for the accumulated sum.
    let rate = 0.5 * tol / t_end;
    let l = model.generator_bound().max(1.0);
    let mut h = (0.1 / l).min(t_end);
    let mut t = 0.0;
    let mut y = a0.clone();
    let mut total_err = 0.0;
    let mut prev_ratio: f64 = 1.0;
    let mut steps = 0;
    while t < t_end {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::SolverFailure("Runge-Kutta step budget exhausted".into()));
        }
        h = h.min(t_end - t);
        let mut k: Vec<ComplexMatrix> = Vec::with_capacity(7);
        for s in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    ys += &kj.scale(h * A[s][j]);
                }
            }
            k.push(model.apply(&ys)?);
        }
        let mut y5 = y.clone();
        let mut diff = ComplexMatrix::zeros(model.dim());
        for s in 0..7 {
            if B5[s] != 0.0 {
                y5 += &k[s].scale(h * B5[s]);
            }
            let w = B5[s] - B4[s];
            if w != 0.0 {
                diff += &k[s].scale(h * w);
            }
        }
        let err = sqrt_d * diff.frobenius_norm();
        let allowed = rate * h;
        let ratio = (err / allowed).max(1e-10);
        if ratio <= 1.0 {
            t += h;
            y = y5;
            total_err += err;
            let factor = 0.9 * ratio.powf(-0.7 / 5.0) * prev_ratio.powf(0.4 / 5.0);
            h *= factor.clamp(0.2, 5.0);
            prev_ratio = ratio;
        } else {
            h *= (0.9 * ratio.powf(-1.0 / 5.0)).clamp(0.1, 0.9);
        }
        if h < 1e-14 * t_end.max(1.0) {
            return Err(Error::SolverFailure(format!("step size underflow at t = {t}")));
        }
        let _ = C;
    }
    Ok((y, total_err))
}

/// Superoperators M_2, M_3 of the one-step expansion K(tau) = sum tau^n M_n.
fn step_terms(model: &LindbladModel, kind: IntegratorKind) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let d = model.dim();
    match kind {
        IntegratorKind::KrausFirstOrder => {
            let a = model.effective_generator();
            let m2 = a.as_matrix().conjugate().kronecker(a.as_matrix());
            Ok((m2, DMatrix::zeros(d * d, d * d)))
        }
        IntegratorKind::DilatedHamiltonian => {
            let mut terms = step_expansion_superoperators(model, 3)?;
            let m3 = terms.pop().expect("four terms");
            let m2 = terms.pop().expect("four terms");
            Ok((m2, m3))
        }
    }
}

/// Solves the coupled linear system for Gamma_k(T), k in {1, 2}.
pub fn gamma_ode_solve(
    model: &LindbladModel,
    kind: IntegratorKind,
    rho0: &DensityMatrix,
    k: usize,
    t: f64,
    tol: f64,
) -> Result<GammaSolution> {
    if k == 0 || k > 2 {
        return Err(Error::Unsupported(format!("Gamma_{k} is not supported; only k in {{1, 2}}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    check_tol(tol)?;
    rho0.matrix().ensure_dim(model.dim())?;
    let d = model.dim();
    let n = d * d;
    let s = model.superoperator();
    let (m2, m3) = step_terms(model, kind)?;
    let half = C64::new(0.5, 0.0);
    let s2 = &s * &s;
    let dterm = &m2 - &s2 * half;

    let blocks = k + 1;
    let mut big = DMatrix::<C64>::zeros(blocks * n, blocks * n);
    for b in 0..blocks {
        big.view_mut((b * n, b * n), (n, n)).copy_from(&s);
    }
    big.view_mut((n, 0), (n, n)).copy_from(&dterm);
    if k == 2 {
        let e = &m3 - (&s * &dterm + &dterm * &s) * half - &s2 * &s * C64::new(1.0 / 6.0, 0.0);
        big.view_mut((2 * n, n), (n, n)).copy_from(&dterm);
        big.view_mut((2 * n, 0), (n, n)).copy_from(&e);
    }
    let mut v0 = DVector::<C64>::zeros(blocks * n);
    v0.rows_mut(0, n).copy_from(&rho0.matrix().vectorize());
    let (x, y) = expm_apply(&big, t, &v0);
    let tail = |v: &DVector<C64>| DVector::from_column_slice(v.rows(k * n, n).as_slice());
    let est = vec_trace_norm(&(tail(&x) - tail(&y)), d);
    if !(est <= tol) {
        return Err(Error::SolverFailure(format!(
            "Gamma_{k} solve could not reach tolerance {tol:e} (estimate {est:e})"
        )));
    }
    let value = ComplexMatrix::unvectorize(&tail(&x), d)?;
    let deviation = value.hermiticity_error();
    if deviation > TOL_HERM * value.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(GammaSolution {
        k,
        value_at_t: value.hermitian_part(),
        time: t,
        est_error: est,
    })
}
