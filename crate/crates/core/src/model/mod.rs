//! Core domain types: operators, Lindblad models, states and observables.

mod matrix;

pub use matrix::{ComplexMatrix, HermitianEigen, C64};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hermiticity tolerance on max-entry deviation.
pub const TOL_HERM: f64 = 1e-10;
/// Allowed |Tr(rho) - 1| for states.
pub const TOL_TRACE: f64 = 1e-10;
/// Allowed negative eigenvalue magnitude for states.
pub const TOL_PSD: f64 = 1e-8;
/// Eigensolver agreement tolerance.
pub const TOL_EIG: f64 = 1e-9;

/// Lindblad generator data. Rates are absorbed into the jump operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelJson", into = "ModelJson")]
pub struct LindbladModel {
    hamiltonian: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    dim: usize,
    hamiltonian: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
}

impl TryFrom<ModelJson> for LindbladModel {
    type Error = Error;
    fn try_from(j: ModelJson) -> Result<Self> {
        let model = LindbladModel::new(j.hamiltonian, j.jumps)?;
        if model.dim() != j.dim {
            return Err(Error::DimensionMismatch {
                expected: j.dim,
                found: model.dim(),
            });
        }
        Ok(model)
    }
}

impl From<LindbladModel> for ModelJson {
    fn from(m: LindbladModel) -> Self {
        ModelJson {
            dim: m.dim(),
            hamiltonian: m.hamiltonian,
            jumps: m.jumps,
        }
    }
}

impl LindbladModel {
    pub fn new(hamiltonian: ComplexMatrix, jumps: Vec<ComplexMatrix>) -> Result<Self> {
        let deviation = hamiltonian.hermiticity_error();
        if deviation > TOL_HERM {
            return Err(Error::NotHermitian { deviation });
        }
        for l in &jumps {
            l.ensure_dim(hamiltonian.dim())?;
        }
        Ok(Self { hamiltonian, jumps })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[ComplexMatrix] {
        &self.jumps
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// sum_j L_j^dagger L_j
    pub fn jump_gram(&self) -> ComplexMatrix {
        self.jumps
            .iter()
            .fold(ComplexMatrix::zeros(self.dim()), |acc, l| acc + l.adjoint() * l)
    }

    /// Non-Hermitian effective Hamiltonian term A = -iH - 1/2 sum_j L_j^dagger L_j.
    pub fn effective_generator(&self) -> ComplexMatrix {
        self.hamiltonian.scale_c(C64::new(0.0, -1.0)) - self.jump_gram().scale(0.5)
    }

    /// -i[H,a] + sum_j (L_j a L_j^dagger - 1/2 {L_j^dagger L_j, a})
    pub fn apply(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        a.ensure_dim(self.dim())?;
        let mut out = self.hamiltonian.commutator(a).scale_c(C64::new(0.0, -1.0));
        for l in &self.jumps {
            let ldag = l.adjoint();
            out += &(l * a * &ldag);
            out -= &(&ldag * l).anticommutator(a).scale(0.5);
        }
        Ok(out)
    }

    /// The generator as a d^2 x d^2 matrix acting on column-stacked vec(a).
    pub fn superoperator(&self) -> DMatrix<C64> {
        let d = self.dim();
        let id = DMatrix::<C64>::identity(d, d);
        let h = self.hamiltonian.as_matrix();
        let minus_i = C64::new(0.0, -1.0);
        let mut s = (id.kronecker(h) - h.transpose().kronecker(&id)) * minus_i;
        for l in &self.jumps {
            let l = l.as_matrix();
            let gram = l.adjoint() * l;
            s += l.conjugate().kronecker(l);
            s -= (id.kronecker(&gram) + gram.transpose().kronecker(&id)) * C64::new(0.5, 0.0);
        }
        s
    }

    /// l = 2||H|| + 2 sum_j ||L_j||^2, an upper bound on the induced trace norm of the generator.
    pub fn generator_bound(&self) -> f64 {
        2.0 * self.hamiltonian.spectral_norm()
            + 2.0 * self.jumps.iter().map(|l| l.spectral_norm().powi(2)).sum::<f64>()
    }

    /// Model whose generator is `t` times this one: H -> tH, L_j -> sqrt(t) L_j.
    pub fn rescale(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("rescale factor must be positive, got {t}")));
        }
        let st = t.sqrt();
        Ok(Self {
            hamiltonian: self.hamiltonian.scale(t),
            jumps: self.jumps.iter().map(|l| l.scale(st)).collect(),
        })
    }
}

/// Density operator: Hermitian, unit trace and positive semidefinite within tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct DensityMatrix(ComplexMatrix);

impl TryFrom<ComplexMatrix> for DensityMatrix {
    type Error = Error;
    fn try_from(m: ComplexMatrix) -> Result<Self> {
        DensityMatrix::new(m)
    }
}

impl From<DensityMatrix> for ComplexMatrix {
    fn from(r: DensityMatrix) -> Self {
        r.0
    }
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(m, TOL_TRACE, TOL_PSD)
    }

    pub fn with_tolerances(m: ComplexMatrix, tol_trace: f64, tol_psd: f64) -> Result<Self> {
        let deviation = m.hermiticity_error();
        if deviation > TOL_HERM {
            return Err(Error::NotHermitian { deviation });
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > tol_trace || tr.im.abs() > tol_trace {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = m.min_eigenvalue();
        if min_eig < -tol_psd {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min_eig:e} is negative")));
        }
        Ok(Self(m))
    }

    /// |psi><psi| with psi normalized here.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("state vector has zero or non-finite norm".into()));
        }
        let psi: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::outer(&psi))
    }

    /// |i><i|
    pub fn basis(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::InvalidArgument(format!("basis index {i} out of range for dim {dim}")));
        }
        Ok(Self(ComplexMatrix::ket_bra(dim, i, i)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }
}

/// Hermitian observable with its spectral norm, the Hoeffding range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    matrix: ComplexMatrix,
    bound_alpha: f64,
}

impl Observable {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let deviation = matrix.hermiticity_error();
        if deviation > TOL_HERM {
            return Err(Error::NotHermitian { deviation });
        }
        let bound_alpha = matrix.spectral_norm();
        Ok(Self { matrix, bound_alpha })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn bound_alpha(&self) -> f64 {
        self.bound_alpha
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Re Tr(m O) for an arbitrary (possibly unnormalized) matrix.
    pub fn expectation_of(&self, m: &ComplexMatrix) -> Result<f64> {
        m.ensure_dim(self.dim())?;
        Ok(trace_product(m, &self.matrix).re)
    }
}

/// Re Tr(rho O).
pub fn expectation(rho: &DensityMatrix, obs: &Observable) -> Result<f64> {
    obs.expectation_of(rho.matrix())
}

/// Tr(A B) without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let d = a.dim();
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..d {
        for c in 0..d {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

/// Pauli and ladder matrices; sigma_minus = |0><1| so that |1> decays to |0>.
pub mod pauli {
    use super::{ComplexMatrix, C64};

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[
            vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
            vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
        ])
        .unwrap()
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[1.0, -1.0])
    }

    pub fn minus() -> ComplexMatrix {
        ComplexMatrix::ket_bra(2, 0, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay_model() -> LindbladModel {
        LindbladModel::new(pauli::z(), vec![pauli::minus()]).unwrap()
    }

    /// Brute-force superoperator: column c is vec(apply(E_c)).
    fn superoperator_by_columns(model: &LindbladModel) -> DMatrix<C64> {
        let d = model.dim();
        let mut s = DMatrix::zeros(d * d, d * d);
        for c in 0..d * d {
            let e = ComplexMatrix::ket_bra(d, c % d, c / d);
            let col = model.apply(&e).unwrap().vectorize();
            s.set_column(c, &col);
        }
        s
    }

    #[test]
    fn trivial_generator_vanishes() {
        let model = LindbladModel::new(ComplexMatrix::zeros(3), vec![]).unwrap();
        let a = ComplexMatrix::from_fn(3, |r, c| C64::new(r as f64 + 1.0, c as f64));
        assert_eq!(model.apply(&a).unwrap().max_abs(), 0.0);
        assert_eq!(model.generator_bound(), 0.0);
    }

    #[test]
    fn decay_channel_on_excited_state() {
        let model = decay_model();
        let out = model.apply(&ComplexMatrix::ket_bra(2, 1, 1)).unwrap();
        let expected = ComplexMatrix::diagonal(&[1.0, -1.0]);
        assert!(out.max_abs_diff(&expected) < 1e-15);
        let brute = superoperator_by_columns(&model);
        let via_super = ComplexMatrix::unvectorize(&(&brute * ComplexMatrix::ket_bra(2, 1, 1).vectorize()), 2).unwrap();
        assert!(via_super.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn kronecker_superoperator_matches_column_construction() {
        let h = ComplexMatrix::from_rows(&[
            vec![C64::new(0.3, 0.0), C64::new(0.1, 0.2), C64::new(0.0, 0.0)],
            vec![C64::new(0.1, -0.2), C64::new(-0.5, 0.0), C64::new(0.4, 0.0)],
            vec![C64::new(0.0, 0.0), C64::new(0.4, 0.0), C64::new(1.0, 0.0)],
        ])
        .unwrap();
        let l1 = ComplexMatrix::from_fn(3, |r, c| C64::new((r * 3 + c) as f64 * 0.1, (r as f64 - c as f64) * 0.05));
        let l2 = ComplexMatrix::from_fn(3, |r, c| C64::new(if r + 1 == c { 0.7 } else { 0.0 }, 0.0));
        let model = LindbladModel::new(h, vec![l1, l2]).unwrap();
        let diff = (model.superoperator() - superoperator_by_columns(&model)).camax();
        assert!(diff < 1e-13, "{diff}");
    }

    #[test]
    fn generator_bound_examples() {
        let m = LindbladModel::new(pauli::z(), vec![pauli::x()]).unwrap();
        assert!((m.generator_bound() - 4.0).abs() < 1e-12);
        let m = LindbladModel::new(pauli::z(), vec![pauli::minus().scale(0.4f64.sqrt())]).unwrap();
        assert!((m.generator_bound() - 2.8).abs() < 1e-12);
    }

    #[test]
    fn rescale_scales_generator_and_bound() {
        let m = LindbladModel::new(pauli::z(), vec![pauli::x()]).unwrap();
        assert_eq!(m.rescale(1.0).unwrap(), m);
        let r = m.rescale(4.0).unwrap();
        assert!((r.generator_bound() - 16.0).abs() < 1e-12);
        let diff = (r.superoperator() - m.superoperator() * C64::new(4.0, 0.0)).camax();
        assert!(diff < 1e-13);
        assert!(m.rescale(0.0).is_err());
        assert!(m.rescale(-1.0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(LindbladModel::new(pauli::z(), vec![ComplexMatrix::identity(3)]).is_err());
        let m = decay_model();
        assert!(matches!(
            m.apply(&ComplexMatrix::zeros(3)),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn non_hermitian_hamiltonian_is_rejected() {
        assert!(matches!(
            LindbladModel::new(pauli::minus(), vec![]),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn expectation_examples() {
        let z = Observable::new(pauli::z()).unwrap();
        let x = Observable::new(pauli::x()).unwrap();
        assert_eq!(z.bound_alpha(), 1.0);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!(expectation(&mixed, &z).unwrap().abs() < 1e-15);
        let zero = DensityMatrix::basis(2, 0).unwrap();
        assert!(expectation(&zero, &x).unwrap().abs() < 1e-15);
        let one = DensityMatrix::basis(2, 1).unwrap();
        assert_eq!(expectation(&one, &z).unwrap(), -1.0);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(ComplexMatrix::identity(2)).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::diagonal(&[1.5, -0.5])).is_err());
        assert!(DensityMatrix::new(pauli::minus()).is_err());
        assert!(DensityMatrix::pure(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).is_ok());
        assert_eq!(DensityMatrix::maximally_mixed(4).matrix().trace_norm(), 1.0);
    }

    #[test]
    fn model_json_schema_round_trip() {
        let m = decay_model();
        let s = m.to_json().unwrap();
        assert!(s.starts_with("{\"dim\":2,\"hamiltonian\":[[[1.0,0.0],[0.0,0.0]]"));
        assert_eq!(LindbladModel::from_json(&s).unwrap(), m);
        let bad = s.replace("\"dim\":2", "\"dim\":3");
        assert!(LindbladModel::from_json(&bad).is_err());
    }
}
