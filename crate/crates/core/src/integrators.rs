//! First-order discrete solution operators and multi-step evolution.
//!
//! Two one-step maps approximate `exp(tau L)`:
//!
//! * the Kraus-form step `F0 rho F0^dagger + sum_j F_j rho F_j^dagger` with
//!   `F0 = I + tau (-iH - 1/2 sum L_j^dagger L_j)` and `F_j = sqrt(tau) L_j`;
//! * the dilated-Hamiltonian step, a unitary on `ancilla (J+1) x system`
//!   generated by `tau H0 + sqrt(tau) H1`, followed by a partial trace.
//!
//! The Kraus step is completely positive but only approximately trace
//! preserving; the dilated step is a channel exactly.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComplexMatrix, DensityMatrix, LindbladModel, Observable, C64, TOL_TRACE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntegratorKind {
    #[serde(rename = "kraus")]
    KrausFirstOrder,
    #[serde(rename = "dilated")]
    DilatedHamiltonian,
}

impl IntegratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IntegratorKind::KrausFirstOrder => "kraus",
            IntegratorKind::DilatedHamiltonian => "dilated",
        }
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntegratorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kraus" => Ok(IntegratorKind::KrausFirstOrder),
            "dilated" => Ok(IntegratorKind::DilatedHamiltonian),
            other => Err(Error::InvalidArgument(format!("unknown integrator '{other}' (expected kraus|dilated)"))),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step size must be positive, got {tau}")))
    }
}

/// Kraus operators F0, F1..FJ of the first-order Kraus step.
pub fn kraus_operators(model: &LindbladModel, tau: f64) -> Result<Vec<ComplexMatrix>> {
    check_tau(tau)?;
    let f0 = ComplexMatrix::identity(model.dim()) + model.effective_generator().scale(tau);
    let st = tau.sqrt();
    Ok(std::iter::once(f0).chain(model.jumps().iter().map(|l| l.scale(st))).collect())
}

/// One Kraus-form step. No trace renormalization.
pub fn kraus_step(model: &LindbladModel, rho: &ComplexMatrix, tau: f64) -> Result<ComplexMatrix> {
    rho.ensure_dim(model.dim())?;
    Ok(apply_kraus(&kraus_operators(model, tau)?, rho))
}

fn apply_kraus(ops: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
    ops.iter()
        .fold(ComplexMatrix::zeros(rho.dim()), |acc, f| acc + f * rho * f.adjoint())
}

/// H = tau |0><0| (x) H_S + sqrt(tau) sum_j (|j><0| (x) L_j + |0><j| (x) L_j^dagger),
/// with the ancilla as the leading tensor factor.
pub fn dilated_hamiltonian(model: &LindbladModel, tau: f64) -> Result<ComplexMatrix> {
    check_tau(tau)?;
    let d = model.dim();
    let blocks = model.jumps().len() + 1;
    let eps = tau.sqrt();
    let mut h = ComplexMatrix::zeros(blocks * d);
    h.set_block(0, 0, &model.hamiltonian().scale(tau));
    for (j, l) in model.jumps().iter().enumerate() {
        h.set_block(j + 1, 0, &l.scale(eps));
        h.set_block(0, j + 1, &l.adjoint().scale(eps));
    }
    Ok(h.hermitian_part())
}

/// exp(-iH) of the dilated Hamiltonian via Hermitian eigendecomposition.
pub fn dilated_unitary(model: &LindbladModel, tau: f64) -> Result<ComplexMatrix> {
    let eig = dilated_hamiltonian(model, tau)?.hermitian_eigen();
    Ok(eig.apply_fn(|lam| C64::new(0.0, -lam).exp()))
}

/// sum_j <j|_A m |j>_A for a matrix on ancilla (x) system.
pub fn partial_trace_ancilla(m: &ComplexMatrix, d_ancilla: usize, d_system: usize) -> Result<ComplexMatrix> {
    m.ensure_dim(d_ancilla * d_system)?;
    if d_ancilla == 0 || d_system == 0 {
        return Err(Error::InvalidArgument("partial trace factors must be >= 1".into()));
    }
    Ok((0..d_ancilla).fold(ComplexMatrix::zeros(d_system), |acc, j| acc + m.block(j, j, d_system)))
}

/// Dilated step on an arbitrary operator: tr_A(U (|0><0| (x) a) U^dagger).
pub fn dilated_step_matrix(model: &LindbladModel, a: &ComplexMatrix, tau: f64) -> Result<ComplexMatrix> {
    a.ensure_dim(model.dim())?;
    let blocks = model.jumps().len() + 1;
    let u = dilated_unitary(model, tau)?;
    let embedded = ComplexMatrix::ket_bra(blocks, 0, 0).kron(a);
    partial_trace_ancilla(&(&u * embedded * u.adjoint()), blocks, model.dim())
}

/// One dilated-Hamiltonian step; the result is a valid density matrix.
pub fn dilated_step(model: &LindbladModel, rho: &DensityMatrix, tau: f64) -> Result<DensityMatrix> {
    DensityMatrix::new(dilated_step_matrix(model, rho.matrix(), tau)?)
}

/// One step of either integrator, precomputed as a set of Kraus operators.
///
/// For the dilation the operators are the first block column U_{j0} of the
/// unitary, since only that column touches |0><0| (x) rho.
#[derive(Clone, Debug)]
pub struct StepChannel {
    kind: IntegratorKind,
    tau: f64,
    ops: Vec<ComplexMatrix>,
}

impl StepChannel {
    pub fn new(model: &LindbladModel, kind: IntegratorKind, tau: f64) -> Result<Self> {
        let ops = match kind {
            IntegratorKind::KrausFirstOrder => kraus_operators(model, tau)?,
            IntegratorKind::DilatedHamiltonian => {
                let u = dilated_unitary(model, tau)?;
                (0..=model.jumps().len()).map(|j| u.block(j, 0, model.dim())).collect()
            }
        };
        Ok(Self { kind, tau, ops })
    }

    pub fn kind(&self) -> IntegratorKind {
        self.kind
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        apply_kraus(&self.ops, rho)
    }
}

#[derive(Clone, Debug, Default)]
pub struct EvolveOptions {
    /// Record a snapshot every this many steps (plus step 0); the final state is always kept.
    pub snapshot_every: Option<usize>,
    /// Divide by the trace after every step. Physical post-processing only.
    pub normalize_trace: bool,
    pub observable: Option<Observable>,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub trace: f64,
    pub observable: Option<f64>,
    pub state: ComplexMatrix,
}

/// Result of `n_steps` applications of a one-step map.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub kind: IntegratorKind,
    pub tau: f64,
    pub n_steps: usize,
    pub total_time: f64,
    /// max |Tr(rho_n) - 1| along the trajectory.
    pub trace_drift: f64,
    /// Time-ordered snapshots, ending with the final state.
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn final_state(&self) -> &ComplexMatrix {
        &self.snapshots.last().expect("trajectory always holds the final state").state
    }

    pub fn states(&self) -> impl Iterator<Item = &ComplexMatrix> {
        self.snapshots.iter().map(|s| &s.state)
    }

    /// CSV with columns step_index,time,trace,observable_value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wtr.write_record(["step_index", "time", "trace", "observable_value"])?;
        for s in &self.snapshots {
            let obs = s.observable.map(|v| format!("{v:.17e}")).unwrap_or_default();
            wtr.write_record([
                s.step.to_string(),
                format!("{:.17e}", s.time),
                format!("{:.17e}", s.trace),
                obs,
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn evolve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    total_time: f64,
    n_steps: usize,
    kind: IntegratorKind,
) -> Result<Trajectory> {
    evolve_with(model, rho0.matrix(), total_time, n_steps, kind, &EvolveOptions::default())
}

/// Applies the chosen step `n_steps` times with tau = total_time / n_steps.
pub fn evolve_with(
    model: &LindbladModel,
    rho0: &ComplexMatrix,
    total_time: f64,
    n_steps: usize,
    kind: IntegratorKind,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be >= 1".into()));
    }
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(Error::InvalidArgument(format!("total time must be positive, got {total_time}")));
    }
    rho0.ensure_dim(model.dim())?;
    if let Some(o) = &opts.observable {
        o.matrix().ensure_dim(model.dim())?;
    }
    let tau = total_time / n_steps as f64;
    let channel = StepChannel::new(model, kind, tau)?;

    let snapshot = |step: usize, state: &ComplexMatrix| -> Result<Snapshot> {
        Ok(Snapshot {
            step,
            time: step as f64 * tau,
            trace: state.trace().re,
            observable: match &opts.observable {
                Some(o) => Some(o.expectation_of(state)?),
                None => None,
            },
            state: state.clone(),
        })
    };

    let mut snapshots = Vec::new();
    let mut rho = rho0.clone();
    let mut drift: f64 = (rho.trace().re - 1.0).abs();
    if opts.snapshot_every.is_some() {
        snapshots.push(snapshot(0, &rho)?);
    }
    for step in 1..=n_steps {
        rho = channel.apply(&rho);
        let tr = rho.trace().re;
        drift = drift.max((tr - 1.0).abs());
        if opts.normalize_trace {
            rho = rho.scale(1.0 / tr);
        }
        let keep = step == n_steps || opts.snapshot_every.is_some_and(|k| k > 0 && step % k == 0);
        if keep {
            snapshots.push(snapshot(step, &rho)?);
        }
    }
    if kind == IntegratorKind::DilatedHamiltonian && drift > TOL_TRACE {
        return Err(Error::SolverFailure(format!(
            "dilated trajectory lost trace preservation (drift {drift:e})"
        )));
    }
    Ok(Trajectory {
        kind,
        tau,
        n_steps,
        total_time,
        trace_drift: drift,
        snapshots,
    })
}
