//! The experimental systems: seeded random Lindbladians and the dissipative
//! transverse-field Ising chain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pauli, ComplexMatrix, DensityMatrix, LindbladModel, Observable, C64};

// Stream ids separating the draws of a random model from its initial state.
const MODEL_STREAM: u64 = 0x6d6f_6465_6c;
const STATE_STREAM: u64 = 0x7374_6174_65;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfimParams {
    pub n_q: usize,
    pub omega: f64,
    pub omega_r: f64,
    pub coupling_j: f64,
    pub gamma: f64,
}

impl Default for TfimParams {
    fn default() -> Self {
        Self {
            n_q: 4,
            omega: 1.0,
            omega_r: 0.8,
            coupling_j: 0.3,
            gamma: 0.4,
        }
    }
}

/// `op` acting on qubit `site` of an `n_q`-qubit register (qubit 0 is the leading factor).
pub fn site_operator(op: &ComplexMatrix, site: usize, n_q: usize) -> ComplexMatrix {
    (0..n_q).fold(ComplexMatrix::identity(1), |acc, q| {
        if q == site {
            acc.kron(op)
        } else {
            acc.kron(&ComplexMatrix::identity(2))
        }
    })
}

/// Transverse-field Ising chain with local decay and the normalized
/// x-magnetization observable.
pub fn build_tfim(p: &TfimParams) -> Result<(LindbladModel, Observable)> {
    if p.n_q == 0 {
        return Err(Error::InvalidArgument("n_q must be >= 1".into()));
    }
    if !(p.gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("decay rate must be >= 0, got {}", p.gamma)));
    }
    let n = p.n_q;
    let dim = 1usize << n;
    let sx: Vec<ComplexMatrix> = (0..n).map(|q| site_operator(&pauli::x(), q, n)).collect();
    let mut h = ComplexMatrix::zeros(dim);
    for q in 0..n {
        h += &site_operator(&pauli::z(), q, n).scale(p.omega / 2.0);
        h += &sx[q].scale(p.omega_r / 2.0);
    }
    for q in 0..n.saturating_sub(1) {
        h += &(&sx[q] * &sx[q + 1]).scale(p.coupling_j);
    }
    let rate = p.gamma.sqrt();
    let jumps = (0..n)
        .map(|q| site_operator(&pauli::minus(), q, n).scale(rate))
        .collect();
    let model = LindbladModel::new(h.hermitian_part(), jumps)?;

    let total_x = sx.iter().fold(ComplexMatrix::zeros(dim), |acc, s| acc + s);
    let norm = total_x.spectral_norm();
    let obs = Observable::new(total_x.scale(1.0 / norm))?;
    Ok((model, obs))
}

/// |0...0><0...0| for the TFIM register.
pub fn tfim_initial_state(n_q: usize) -> Result<DensityMatrix> {
    DensityMatrix::basis(1usize << n_q, 0)
}

fn ginibre(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

fn normalized(m: ComplexMatrix, target: f64) -> ComplexMatrix {
    let n = m.spectral_norm();
    if n == 0.0 {
        m
    } else {
        m.scale(target / n)
    }
}

/// Random model from complex Ginibre draws: H = (G + G^dagger)/2, jump operators
/// and H rescaled to spectral norm `scale`, observable Hermitized to norm 1.
pub fn random_model(dim: usize, n_jumps: usize, seed: u64, scale: f64) -> Result<(LindbladModel, Observable)> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("random model needs dim >= 2, got {dim}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(MODEL_STREAM);
    let g = ginibre(dim, &mut rng);
    let h = normalized(g.hermitian_part(), scale).hermitian_part();
    let jumps = (0..n_jumps).map(|_| normalized(ginibre(dim, &mut rng), scale)).collect();
    let o = ginibre(dim, &mut rng).hermitian_part();
    let obs = Observable::new(normalized(o, 1.0).hermitian_part())?;
    Ok((LindbladModel::new(h, jumps)?, obs))
}

/// Seeded Haar-like random pure state (normalized complex Gaussian vector).
pub fn random_pure_state(dim: usize, seed: u64) -> Result<DensityMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STATE_STREAM);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi: Vec<C64> = (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re * s, im * s)
        })
        .collect();
    DensityMatrix::pure(&psi)
}

/// Seeded random mixed state of full rank (normalized W W^dagger).
pub fn random_mixed_state(dim: usize, seed: u64) -> Result<DensityMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STATE_STREAM + 1);
    let w = ginibre(dim, &mut rng);
    let m = (&w * w.adjoint()).hermitian_part();
    let tr = m.trace().re;
    DensityMatrix::new(m.scale(1.0 / tr))
}
