//! Formula evaluations for node count, circuit depth and shot count.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrapolation::{lebesgue_at_zero, ExtrapolationMethod};
use crate::grids::{chebyshev_grid, recommended_interval};
use crate::sampling::hoeffding_shots;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub l: f64,
    pub total_time: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub obs_norm: f64,
    pub sigma: f64,
    /// n >= ln(sigma/eps)/(3 ln 2) - 2/3, at least 1; the grid has n+1 nodes.
    pub n: usize,
    pub n_nodes: usize,
    /// 1/(l^2 max(ln l, 1)).
    pub tau_max: f64,
    pub tau_max_effective: f64,
    /// T^2 n^2 / tau_max.
    pub d_max: f64,
    pub gamma_l1: f64,
    pub shots_per_node: u64,
    /// Both sides of T >= ln(1/eps) sqrt(ln ln(1/eps)) / (l sqrt(ln l)).
    pub time_condition_lhs: f64,
    pub time_condition_rhs: f64,
    pub log_base: String,
}

pub fn node_count(sigma: f64, epsilon: f64) -> usize {
    let n = (sigma / epsilon).ln() / (3.0 * LN_2) - 2.0 / 3.0;
    (n.ceil().max(1.0)) as usize
}

pub fn resource_estimates(l: f64, t: f64, epsilon: f64, delta: f64, obs_norm: f64) -> Result<ResourceReport> {
    for (name, v) in [("l", l), ("T", t), ("epsilon", epsilon), ("delta", delta), ("obs_norm", obs_norm)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    if epsilon >= 1.0 {
        return Err(Error::InvalidArgument(format!("epsilon must be < 1, got {epsilon}")));
    }
    let sigma = 2.0 * E * obs_norm;
    let n = node_count(sigma, epsilon);
    let tau_max = 1.0 / (l * l * l.ln().max(1.0));
    let tau_eff = recommended_interval(l, t)?;
    let grid = chebyshev_grid(tau_eff, n)?;
    let gamma_l1 = lebesgue_at_zero(&grid, ExtrapolationMethod::Interpolation)?;
    let inv = (1.0 / epsilon).ln();
    let rhs = inv * inv.ln().max(0.0).sqrt() / (l * l.ln().max(f64::MIN_POSITIVE).sqrt());
    Ok(ResourceReport {
        l,
        total_time: t,
        epsilon,
        delta,
        obs_norm,
        sigma,
        n,
        n_nodes: n + 1,
        tau_max,
        tau_max_effective: tau_eff,
        d_max: t * t * (n * n) as f64 / tau_max,
        gamma_l1,
        shots_per_node: hoeffding_shots(obs_norm, gamma_l1, epsilon, delta)?,
        time_condition_lhs: t,
        time_condition_rhs: rhs,
        log_base: "natural".into(),
    })
}
