//! Shot-noise simulation of observable estimates and Hoeffding sample counts.
//!
//! Outcomes are drawn by Born's rule over the eigenspaces of the observable.
//! Every (seed, node, trial) triple owns its own ChaCha stream, so results do
//! not depend on how node jobs are scheduled.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::StepGrid;
use crate::integrators::{evolve_with, EvolveOptions, IntegratorKind};
use crate::model::{DensityMatrix, LindbladModel, Observable, TOL_EIG, TOL_PSD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotMode {
    #[default]
    Born,
    /// Normal surrogate with the worst-case two-outcome variance.
    Gaussian,
}

impl fmt::Display for ShotMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShotMode::Born => "born",
            ShotMode::Gaussian => "gaussian",
        })
    }
}

impl FromStr for ShotMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "born" => Ok(ShotMode::Born),
            "gaussian" => Ok(ShotMode::Gaussian),
            other => Err(Error::InvalidArgument(format!("unknown shot mode '{other}' (expected born|gaussian)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotEstimate {
    pub mean: f64,
    pub n_shots: u64,
    pub alpha: f64,
    pub seed: u64,
    pub node_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub shots_per_node: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma_l1: f64,
}

impl SamplingPlan {
    pub fn new(alpha: f64, gamma_l1: f64, epsilon: f64, delta: f64) -> Result<Self> {
        Ok(Self {
            shots_per_node: hoeffding_shots(alpha, gamma_l1, epsilon, delta)?,
            epsilon,
            delta,
            gamma_l1,
        })
    }
}

/// ceil(2 alpha^2 |gamma|_1^2 / eps^2 * ln(2/delta)), at least 1.
pub fn hoeffding_shots(alpha: f64, gamma_l1: f64, epsilon: f64, delta: f64) -> Result<u64> {
    for (name, v) in [("alpha", alpha), ("gamma_l1", gamma_l1), ("epsilon", epsilon), ("delta", delta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    if delta >= 1.0 {
        return Err(Error::InvalidArgument(format!("delta must be < 1, got {delta}")));
    }
    let n = 2.0 * alpha * alpha * gamma_l1 * gamma_l1 / (epsilon * epsilon) * (2.0 / delta).ln();
    if n >= 1.8e19 {
        return Err(Error::Overflow(format!("shot count {n:e} exceeds u64")));
    }
    Ok((n.ceil() as u64).max(1))
}

/// Generator for one (seed, node, trial) triple.
pub fn keyed_rng(seed: u64, node: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((node as u64) << 32) | (trial & 0xffff_ffff));
    rng
}

/// Spectral decomposition of an observable with degenerate eigenvalues merged.
#[derive(Clone, Debug)]
pub struct Measurement {
    /// (eigenvalue, eigenvector column indices) per distinct eigenvalue.
    groups: Vec<(f64, Vec<usize>)>,
    vectors: crate::model::ComplexMatrix,
    alpha: f64,
    lambda_min: f64,
    lambda_max: f64,
}

impl Measurement {
    pub fn new(obs: &Observable) -> Self {
        let eig = obs.matrix().hermitian_eigen();
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for (i, &v) in eig.values.iter().enumerate() {
            match groups.last_mut() {
                Some((lam, idx)) if (v - *lam).abs() <= TOL_EIG => idx.push(i),
                _ => groups.push((v, vec![i])),
            }
        }
        for (lam, idx) in &mut groups {
            *lam = idx.iter().map(|&i| eig.values[i]).sum::<f64>() / idx.len() as f64;
        }
        let lambda_min = groups.first().map(|g| g.0).unwrap_or(0.0);
        let lambda_max = groups.last().map(|g| g.0).unwrap_or(0.0);
        Self {
            groups,
            vectors: eig.vectors,
            alpha: obs.bound_alpha(),
            lambda_min,
            lambda_max,
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.0).collect()
    }

    /// Born probabilities Tr(rho P_k), clipped within tol_psd and renormalized.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        let d = self.vectors.dim();
        rho.matrix().ensure_dim(d)?;
        let v = self.vectors.as_matrix();
        let r = rho.matrix().as_matrix();
        let mut probs = Vec::with_capacity(self.groups.len());
        for (_, idx) in &self.groups {
            let mut p = 0.0;
            for &i in idx {
                let col = v.column(i);
                p += (col.adjoint() * r * col)[(0, 0)].re;
            }
            if !(-TOL_PSD..=1.0 + TOL_PSD).contains(&p) {
                return Err(Error::InvalidState(format!("Born probability {p} outside [0, 1]")));
            }
            probs.push(p.clamp(0.0, 1.0));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TOL_PSD.max(1e-8) * probs.len() as f64 {
            return Err(Error::InvalidState(format!("Born probabilities sum to {total}")));
        }
        Ok(probs.into_iter().map(|p| p / total).collect())
    }

    /// Multinomial counts by sequential conditional binomials.
    fn sample_counts(&self, probs: &[f64], n_shots: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
        let mut left = n_shots;
        let mut mass = 1.0;
        let mut counts = vec![0u64; probs.len()];
        for (k, &p) in probs.iter().enumerate() {
            if left == 0 {
                break;
            }
            if k + 1 == probs.len() {
                counts[k] = left;
                break;
            }
            let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
            let c = Binomial::new(left, q).expect("q in [0, 1]").sample(rng);
            counts[k] = c;
            left -= c;
            mass -= p;
        }
        counts
    }

    fn born_mean(&self, rho: &DensityMatrix, n_shots: u64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let probs = self.probabilities(rho)?;
        let counts = self.sample_counts(&probs, n_shots, rng);
        let total: f64 = self.groups.iter().zip(&counts).map(|((lam, _), &c)| lam * c as f64).sum();
        Ok(total / n_shots as f64)
    }

    fn gaussian_mean(&self, truth: f64, n_shots: u64, rng: &mut ChaCha8Rng) -> f64 {
        let sd = (self.lambda_max - self.lambda_min) / (2.0 * (n_shots as f64).sqrt());
        let z: f64 = StandardNormal.sample(rng);
        (truth + sd * z).clamp(self.lambda_min, self.lambda_max)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn estimate(
        &self,
        rho: &DensityMatrix,
        n_shots: u64,
        seed: u64,
        node_index: usize,
        trial: u64,
        mode: ShotMode,
    ) -> Result<ShotEstimate> {
        if n_shots == 0 {
            return Err(Error::InvalidArgument("n_shots must be >= 1".into()));
        }
        let mut rng = keyed_rng(seed, node_index, trial);
        let mean = match mode {
            ShotMode::Born => self.born_mean(rho, n_shots, &mut rng)?,
            ShotMode::Gaussian => {
                let probs = self.probabilities(rho)?;
                let truth = self.groups.iter().zip(&probs).map(|((lam, _), p)| lam * p).sum();
                self.gaussian_mean(truth, n_shots, &mut rng)
            }
        };
        Ok(ShotEstimate {
            mean,
            n_shots,
            alpha: self.alpha,
            seed,
            node_index,
        })
    }
}

/// Empirical mean of `n_shots` Born-rule outcomes of `obs` in `rho`.
pub fn measure_shots(rho: &DensityMatrix, obs: &Observable, n_shots: u64, seed: u64) -> Result<ShotEstimate> {
    Measurement::new(obs).estimate(rho, n_shots, seed, 0, 0, ShotMode::Born)
}

fn check_curve_inputs(model: &LindbladModel, rho0: &DensityMatrix, grid: &StepGrid, obs: &Observable) -> Result<()> {
    rho0.matrix().ensure_dim(model.dim())?;
    obs.matrix().ensure_dim(model.dim())?;
    if !grid.is_quantized() {
        return Err(Error::InvalidArgument(
            "noisy curves need a quantized grid (integer step counts per node)".into(),
        ));
    }
    Ok(())
}

/// Final states at every node, evolved with the node's integer step count.
///
/// States are divided by their trace so that Born probabilities are defined;
/// the dilated step is trace preserving, so only Kraus states change.
pub fn node_states(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    grid: &StepGrid,
    kind: IntegratorKind,
) -> Result<Vec<DensityMatrix>> {
    let t = grid
        .total_time()
        .ok_or_else(|| Error::InvalidArgument("grid is not quantized".into()))?;
    let counts = grid.step_counts().expect("quantized grid has step counts");
    let opts = EvolveOptions {
        normalize_trace: true,
        ..EvolveOptions::default()
    };
    counts
        .par_iter()
        .map(|&k| {
            let traj = evolve_with(model, rho0.matrix(), t, k as usize, kind, &opts)?;
            DensityMatrix::new(traj.final_state().hermitian_part())
        })
        .collect()
}

/// Noiseless observable values at every node (trace-normalized states).
pub fn noiseless_curve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    grid: &StepGrid,
    obs: &Observable,
    kind: IntegratorKind,
) -> Result<Vec<f64>> {
    check_curve_inputs(model, rho0, grid, obs)?;
    node_states(model, rho0, grid, kind)?
        .iter()
        .map(|s| obs.expectation_of(s.matrix()))
        .collect()
}

/// Shot estimates at each node of a quantized grid.
#[allow(clippy::too_many_arguments)]
pub fn noisy_curve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    grid: &StepGrid,
    obs: &Observable,
    kind: IntegratorKind,
    n_shots: u64,
    seed: u64,
) -> Result<Vec<ShotEstimate>> {
    check_curve_inputs(model, rho0, grid, obs)?;
    let states = node_states(model, rho0, grid, kind)?;
    sample_states(&states, obs, n_shots, seed, 0, ShotMode::Born)
}

/// Samples precomputed node states; `trial` selects an independent repetition.
pub fn sample_states(
    states: &[DensityMatrix],
    obs: &Observable,
    n_shots: u64,
    seed: u64,
    trial: u64,
    mode: ShotMode,
) -> Result<Vec<ShotEstimate>> {
    let meas = Measurement::new(obs);
    states
        .par_iter()
        .enumerate()
        .map(|(j, s)| meas.estimate(s, n_shots, seed, j, trial, mode))
        .collect()
}

/// One row of curve.csv.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub node_index: usize,
    pub tau: f64,
    pub step_count: u64,
    pub n_shots: u64,
    pub mean: f64,
    pub seed: u64,
    pub noiseless: Option<f64>,
    pub reference: Option<f64>,
}

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wtr.write_record([
        "node_index",
        "tau",
        "step_count",
        "n_shots",
        "mean",
        "seed",
        "noiseless",
        "reference",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.node_index.to_string(),
            format!("{:.17e}", r.tau),
            r.step_count.to_string(),
            r.n_shots.to_string(),
            format!("{:.17e}", r.mean),
            r.seed.to_string(),
            opt(r.noiseless),
            opt(r.reference),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(r: R) -> Result<Vec<CurveRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    for col in ["node_index", "tau", "step_count", "n_shots", "mean", "seed"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::InvalidArgument(format!("curve file is missing column '{col}'")));
        }
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("curve file has no rows".into()));
    }
    Ok(rows)
}
