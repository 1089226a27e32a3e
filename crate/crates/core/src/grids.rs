//! Step-size grids: equidistant, mapped first-kind Chebyshev, and the integer
//! quantization that makes every node divide the total time exactly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack under which `total_time / xi` is treated as already integral.
const INTEGRAL_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Equidistant,
    Chebyshev,
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridKind::Equidistant => "equidistant",
            GridKind::Chebyshev => "chebyshev",
        })
    }
}

impl FromStr for GridKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equidistant" => Ok(GridKind::Equidistant),
            "chebyshev" => Ok(GridKind::Chebyshev),
            other => Err(Error::InvalidArgument(format!(
                "unknown grid kind '{other}' (expected equidistant|chebyshev)"
            ))),
        }
    }
}

/// Strictly increasing positive step sizes in `(0, interval_hi]`, optionally
/// quantized so that `total_time / nodes[j] == step_counts[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepGrid {
    nodes: Vec<f64>,
    step_counts: Option<Vec<u64>>,
    interval_hi: f64,
    total_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
}

impl StepGrid {
    /// Validates an arbitrary node list (used when reading curves back in).
    pub fn from_nodes(nodes: Vec<f64>, interval_hi: f64) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("a grid needs at least one node".into()));
        }
        if !(interval_hi > 0.0 && interval_hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("interval_hi must be positive, got {interval_hi}")));
        }
        for (j, &t) in nodes.iter().enumerate() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("node {j} is not a positive step size: {t}")));
            }
            if t > interval_hi * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!("node {j} = {t} exceeds interval_hi = {interval_hi}")));
            }
        }
        for j in 1..nodes.len() {
            if nodes[j] <= nodes[j - 1] {
                if nodes[j] == nodes[j - 1] {
                    return Err(Error::DuplicateNodes {
                        first: j - 1,
                        second: j,
                        tau: nodes[j],
                    });
                }
                return Err(Error::InvalidArgument("nodes must be strictly increasing".into()));
            }
        }
        Ok(Self {
            nodes,
            step_counts: None,
            interval_hi,
            total_time: None,
            warning: None,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Polynomial degree of the interpolant through all nodes.
    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn step_counts(&self) -> Option<&[u64]> {
        self.step_counts.as_deref()
    }

    pub fn interval_hi(&self) -> f64 {
        self.interval_hi
    }

    pub fn total_time(&self) -> Option<f64> {
        self.total_time
    }

    pub fn is_quantized(&self) -> bool {
        self.step_counts.is_some()
    }

    /// Set when quantization succeeded without its sufficient condition.
    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// Copy of the grid with all nodes and the endpoint multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_nodes(self.nodes.iter().map(|t| t * s).collect(), self.interval_hi * s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: StepGrid = serde_json::from_str(s)?;
        let mut checked = Self::from_nodes(g.nodes, g.interval_hi)?;
        checked.step_counts = g.step_counts;
        checked.total_time = g.total_time;
        checked.warning = g.warning;
        Ok(checked)
    }
}

fn check_args(interval_hi: f64, n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidArgument("grid degree n must be >= 1".into()));
    }
    if !(interval_hi > 0.0 && interval_hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("interval_hi must be positive, got {interval_hi}")));
    }
    Ok(())
}

/// n+1 nodes j*h, h = interval_hi/(n+1).
pub fn equidistant_grid(interval_hi: f64, n: usize) -> Result<StepGrid> {
    check_args(interval_hi, n)?;
    let h = interval_hi / (n + 1) as f64;
    let mut nodes: Vec<f64> = (1..=n + 1).map(|j| j as f64 * h).collect();
    nodes[n] = interval_hi;
    StepGrid::from_nodes(nodes, interval_hi)
}

/// n+1 first-kind Chebyshev nodes mapped to (0, interval_hi).
pub fn chebyshev_grid(interval_hi: f64, n: usize) -> Result<StepGrid> {
    check_args(interval_hi, n)?;
    let m = (n + 1) as f64;
    let nodes = (1..=n + 1)
        .map(|k| {
            let theta = (2 * k - 1) as f64 * PI / (2.0 * m);
            // 1 - cos(theta) = 2 sin^2(theta/2), without cancellation near 0.
            interval_hi * (theta / 2.0).sin().powi(2)
        })
        .collect();
    StepGrid::from_nodes(nodes, interval_hi)
}

pub fn build_grid(kind: GridKind, interval_hi: f64, n: usize) -> Result<StepGrid> {
    match kind {
        GridKind::Equidistant => equidistant_grid(interval_hi, n),
        GridKind::Chebyshev => chebyshev_grid(interval_hi, n),
    }
}

/// Sufficient condition for quantization to keep nodes ordered and distinct.
pub fn quantization_threshold(interval_hi: f64, n: usize) -> f64 {
    PI * PI * interval_hi * (n * n) as f64
}

fn step_count(total_time: f64, xi: f64) -> Result<u64> {
    let r = total_time / xi;
    if !(r.is_finite()) || r >= 9.0e15 {
        return Err(Error::Overflow(format!("step count {r} is not representable")));
    }
    let nearest = r.round();
    let k = if (r - nearest).abs() <= INTEGRAL_SLACK * nearest.max(1.0) {
        nearest
    } else {
        r.ceil()
    };
    Ok((k as u64).max(1))
}

/// Replaces each node xi by T/ceil(T/xi).
pub fn quantize_grid(grid: &StepGrid, total_time: f64) -> Result<StepGrid> {
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(Error::InvalidArgument(format!("total time must be positive, got {total_time}")));
    }
    let counts = grid
        .nodes
        .iter()
        .map(|&xi| step_count(total_time, xi))
        .collect::<Result<Vec<u64>>>()?;
    for j in 1..counts.len() {
        if counts[j] >= counts[j - 1] {
            return Err(Error::QuantizationCollision {
                first: j - 1,
                second: j,
                steps: counts[j],
            });
        }
    }
    let nodes: Vec<f64> = counts.iter().map(|&k| total_time / k as f64).collect();
    let mut out = StepGrid::from_nodes(nodes, grid.interval_hi)?;
    let n = grid.n();
    let threshold = quantization_threshold(grid.interval_hi, n);
    if n >= 1 && total_time <= threshold {
        let msg = format!(
            "total time {total_time} is below the quantization threshold {threshold:.6e}; nodes are distinct but not guaranteed well spaced"
        );
        log::warn!("{msg}");
        out.warning = Some(msg);
    }
    out.step_counts = Some(counts);
    out.total_time = Some(total_time);
    Ok(out)
}

fn clamped_ln(x: f64) -> f64 {
    x.ln().max(1.0)
}

/// Right endpoint 1/(T^2 l^2 max(ln l, 1)) / max(T^2 max(ln T, 1), 1).
pub fn recommended_interval(l: f64, total_time: f64) -> Result<f64> {
    if !(l > 1.0) {
        return Err(Error::UnsupportedRegime(format!(
            "recommended interval needs l > 1 (got {l}); choose interval_hi manually"
        )));
    }
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(Error::InvalidArgument(format!("total time must be positive, got {total_time}")));
    }
    let t2 = total_time * total_time;
    let tau_max = 1.0 / (t2 * l * l * clamped_ln(l));
    Ok(tau_max / (t2 * clamped_ln(total_time)).max(1.0))
}
