//! Small-step expansion of the dilated-Hamiltonian step.
//!
//! With eps = sqrt(tau) the dilated state is
//! `exp(eps A1 + eps^2 A0)(|0><0| (x) rho)`, `A_s = -i[H_s, .]`. Its Taylor
//! coefficients are collected as a polynomial in eps: the k-th power term
//! obeys `T_k[m] = (A1 T_{k-1}[m-1] + A0 T_{k-1}[m-2]) / k`. Only even powers
//! survive the partial trace, giving `K(tau) rho = sum_n tau^n rho_R^{(2n)}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::partial_trace_ancilla;
use crate::model::{ComplexMatrix, DensityMatrix, LindbladModel, C64};

/// Unscaled generators: H0 = |0><0| (x) H_S, H1 = sum_j |j><0| (x) L_j + h.c.
pub fn dilation_generators(model: &LindbladModel) -> (ComplexMatrix, ComplexMatrix) {
    let d = model.dim();
    let blocks = model.jumps().len() + 1;
    let mut h0 = ComplexMatrix::zeros(blocks * d);
    h0.set_block(0, 0, model.hamiltonian());
    let mut h1 = ComplexMatrix::zeros(blocks * d);
    for (j, l) in model.jumps().iter().enumerate() {
        h1.set_block(j + 1, 0, l);
        h1.set_block(0, j + 1, &l.adjoint());
    }
    (h0, h1)
}

/// Lambda0 = 2|H_S|, Lambda1 = max_j |L_j|, Lambda = 2 Lambda0 + 2 Lambda1^2.
pub fn dilation_lambda(model: &LindbladModel) -> (f64, f64, f64) {
    let l0 = 2.0 * model.hamiltonian().spectral_norm();
    let l1 = model.jumps().iter().map(|l| l.spectral_norm()).fold(0.0, f64::max);
    (l0, l1, 2.0 * l0 + 2.0 * l1 * l1)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DilationExpansion {
    /// rho_R^{(2k)} for k = 0..=k_max.
    pub coefficients: Vec<ComplexMatrix>,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda: f64,
    /// Generator bound l of the model, reported next to Lambda.
    pub l: f64,
    pub n_jumps: usize,
    /// max |tr_A(rho^{(m)})| over odd m <= 2 k_max + 1.
    pub odd_trace_max: f64,
    /// |rho_R^{(2)} - L rho| in trace norm.
    pub generator_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBound {
    pub k: usize,
    pub norm: f64,
    /// (J+1) Lambda^k / k!
    pub lambda_bound: f64,
    /// (J+1) l^k / k!
    pub l_bound: f64,
}

impl DilationExpansion {
    pub fn bounds(&self) -> Vec<CoefficientBound> {
        let jp1 = (self.n_jumps + 1) as f64;
        let mut fact = 1.0;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 {
                    fact *= k as f64;
                }
                CoefficientBound {
                    k,
                    norm: c.trace_norm(),
                    lambda_bound: jp1 * self.lambda.powi(k as i32) / fact,
                    l_bound: jp1 * self.l.powi(k as i32) / fact,
                }
            })
            .collect()
    }

    /// sum_{k <= order} tau^k rho_R^{(2k)}.
    pub fn truncated(&self, tau: f64, order: usize) -> ComplexMatrix {
        let d = self.coefficients[0].dim();
        self.coefficients
            .iter()
            .take(order + 1)
            .enumerate()
            .fold(ComplexMatrix::zeros(d), |acc, (k, c)| acc + c.scale(tau.powi(k as i32)))
    }
}

/// Coefficients of eps^0..=eps^max_power in exp(eps X1 + eps^2 X0) applied to `start`.
fn eps_series<F>(start: DMatrix<C64>, max_power: usize, apply: F) -> Vec<DMatrix<C64>>
where
    F: Fn(usize, &DMatrix<C64>) -> DMatrix<C64>,
{
    let zero = DMatrix::<C64>::zeros(start.nrows(), start.ncols());
    let mut total = vec![zero.clone(); max_power + 1];
    total[0] = start.clone();
    let mut prev: Vec<Option<DMatrix<C64>>> = vec![None; max_power + 1];
    prev[0] = Some(start);
    for k in 1..=max_power {
        let mut next: Vec<Option<DMatrix<C64>>> = vec![None; max_power + 1];
        let inv_k = C64::new(1.0 / k as f64, 0.0);
        for m in k..=max_power {
            let mut acc: Option<DMatrix<C64>> = None;
            if let Some(p) = &prev[m - 1] {
                acc = Some(apply(1, p));
            }
            if m >= 2 {
                if let Some(p) = &prev[m - 2] {
                    let t = apply(0, p);
                    acc = Some(match acc {
                        Some(a) => a + t,
                        None => t,
                    });
                }
            }
            if let Some(a) = acc {
                let a = a * inv_k;
                total[m] += &a;
                next[m] = Some(a);
            }
        }
        prev = next;
    }
    total
}

pub fn dilation_expansion(model: &LindbladModel, rho: &DensityMatrix, k_max: usize) -> Result<DilationExpansion> {
    if k_max < 1 {
        return Err(Error::InvalidArgument("dilation expansion needs k_max >= 1".into()));
    }
    rho.matrix().ensure_dim(model.dim())?;
    let d = model.dim();
    let blocks = model.jumps().len() + 1;
    let (h0, h1) = dilation_generators(model);
    let (h0, h1) = (h0.into_matrix(), h1.into_matrix());
    let mi = C64::new(0.0, -1.0);
    let start = ComplexMatrix::ket_bra(blocks, 0, 0).kron(rho.matrix()).into_matrix();
    let series = eps_series(start, 2 * k_max + 1, |s, x| {
        let h = if s == 0 { &h0 } else { &h1 };
        (h * x - x * h) * mi
    });
    let mut coefficients = Vec::with_capacity(k_max + 1);
    let mut odd_trace_max: f64 = 0.0;
    for (m, term) in series.into_iter().enumerate() {
        let reduced = partial_trace_ancilla(&ComplexMatrix::wrap(term), blocks, d)?;
        if m % 2 == 0 {
            coefficients.push(reduced.hermitian_part());
        } else {
            odd_trace_max = odd_trace_max.max(reduced.max_abs());
        }
    }
    let generator_residual = (&coefficients[1] - model.apply(rho.matrix())?).trace_norm();
    let (lambda0, lambda1, lambda) = dilation_lambda(model);
    let scale = model.generator_bound().max(1.0);
    if coefficients[0].max_abs_diff(rho.matrix()) != 0.0 {
        return Err(Error::SolverFailure("zeroth dilation coefficient differs from the input state".into()));
    }
    if generator_residual > 1e-10 * scale {
        return Err(Error::SolverFailure(format!(
            "second dilation coefficient deviates from L rho by {generator_residual:e}"
        )));
    }
    if odd_trace_max > 1e-12 * scale.powi(2 * k_max as i32 + 1).max(1.0) {
        return Err(Error::SolverFailure(format!(
            "odd-order ancilla traces do not vanish ({odd_trace_max:e})"
        )));
    }
    Ok(DilationExpansion {
        coefficients,
        lambda0,
        lambda1,
        lambda,
        l: model.generator_bound(),
        n_jumps: model.jumps().len(),
        odd_trace_max,
        generator_residual,
    })
}

/// Superoperators M_0..=M_{n_max} with K(tau) = sum_n tau^n M_n for the dilated
/// step, built from the eps-expansion of the first block column of U.
pub fn step_expansion_superoperators(model: &LindbladModel, n_max: usize) -> Result<Vec<DMatrix<C64>>> {
    let d = model.dim();
    let blocks = model.jumps().len() + 1;
    let (h0, h1) = dilation_generators(model);
    let (h0, h1) = (h0.into_matrix(), h1.into_matrix());
    let mi = C64::new(0.0, -1.0);
    let mut start = DMatrix::<C64>::zeros(blocks * d, d);
    start.view_mut((0, 0), (d, d)).fill_with_identity();
    let w = eps_series(start, 2 * n_max, |s, x| {
        let h = if s == 0 { &h0 } else { &h1 };
        (h * x) * mi
    });
    let block = |m: usize, j: usize| w[m].view((j * d, 0), (d, d)).into_owned();
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut s = DMatrix::<C64>::zeros(d * d, d * d);
        for a in 0..=2 * n {
            let b = 2 * n - a;
            for j in 0..blocks {
                s += block(b, j).conjugate().kronecker(&block(a, j));
            }
        }
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::dilated_step_matrix;
    use crate::model::pauli;
    use crate::zoo::{build_tfim, random_mixed_state, random_model, tfim_initial_state, TfimParams};

    #[test]
    fn trivial_model_has_no_corrections() {
        let m = LindbladModel::new(ComplexMatrix::zeros(2), vec![]).unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        let e = dilation_expansion(&m, &rho, 4).unwrap();
        assert_eq!(&e.coefficients[0], rho.matrix());
        assert!(e.coefficients[1..].iter().all(|c| c.max_abs() == 0.0));
    }

    #[test]
    fn tfim_two_qubits_reproduces_generator() {
        let p = TfimParams {
            n_q: 2,
            ..TfimParams::default()
        };
        let (m, _) = build_tfim(&p).unwrap();
        let rho = tfim_initial_state(2).unwrap();
        let e = dilation_expansion(&m, &rho, 3).unwrap();
        assert_eq!(&e.coefficients[0], rho.matrix());
        assert!(e.generator_residual <= 1e-10);
        assert!(e.odd_trace_max <= 1e-12);
    }

    #[test]
    fn coefficients_obey_lambda_bound() {
        for seed in 0..5 {
            let (m, _) = random_model(4, 2, seed, 1.0).unwrap();
            let rho = random_mixed_state(4, seed).unwrap();
            let e = dilation_expansion(&m, &rho, 6).unwrap();
            for b in e.bounds() {
                assert!(b.norm <= b.lambda_bound * (1.0 + 1e-12), "{b:?}");
            }
        }
    }

    #[test]
    fn truncation_converges_to_step() {
        let (m, _) = random_model(3, 1, 2, 1.0).unwrap();
        let rho = random_mixed_state(3, 2).unwrap();
        let e = dilation_expansion(&m, &rho, 5).unwrap();
        let exact = dilated_step_matrix(&m, rho.matrix(), 0.05).unwrap();
        let mut prev = f64::INFINITY;
        for order in 1..=5 {
            let err = (&exact - e.truncated(0.05, order)).trace_norm();
            assert!(err < prev * 0.5, "order {order}: {err}");
            prev = err;
        }
        assert!(prev < 1e-9);
    }

    #[test]
    fn superoperators_match_state_expansion() {
        let (m, _) = random_model(3, 2, 4, 1.0).unwrap();
        let rho = random_mixed_state(3, 4).unwrap();
        let e = dilation_expansion(&m, &rho, 3).unwrap();
        let sup = step_expansion_superoperators(&m, 3).unwrap();
        let id = DMatrix::<C64>::identity(9, 9);
        assert!((&sup[0] - id).camax() < 1e-14);
        assert!((&sup[1] - m.superoperator()).camax() < 1e-13);
        for (k, c) in e.coefficients.iter().enumerate() {
            let v = &sup[k] * rho.matrix().vectorize();
            let got = ComplexMatrix::unvectorize(&v, 3).unwrap();
            assert!(got.max_abs_diff(c) < 1e-12, "k={k}");
        }
    }

    #[test]
    fn lambda_definition() {
        let m = LindbladModel::new(pauli::z(), vec![pauli::minus().scale(2.0)]).unwrap();
        let (l0, l1, lam) = dilation_lambda(&m);
        assert_eq!((l0, l1, lam), (2.0, 2.0, 12.0));
    }
}
