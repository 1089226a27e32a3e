//! Zero-step-size extrapolation as a linear functional on the node values.
//!
//! Richardson extrapolation evaluates the interpolating polynomial at 0 via
//! the product-form Lagrange basis. Regression fits a degree-m polynomial by
//! least squares in a Chebyshev basis on `[0, interval_hi]` (thin QR of the
//! design matrix), so the weights are `Q R^{-T} b(0)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::StepGrid;

/// Nodes closer than this (relative) are duplicates.
pub const DUPLICATE_TOL: f64 = 1e-14;
/// Largest accepted condition number of the regression design matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExtrapolationMethod {
    Interpolation,
    Regression { degree: usize },
}

impl fmt::Display for ExtrapolationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtrapolationMethod::Interpolation => f.write_str("interpolation"),
            ExtrapolationMethod::Regression { degree } => write!(f, "regression(degree={degree})"),
        }
    }
}

#[derive(Clone, Debug)]
enum Evaluator {
    Lagrange,
    LeastSquares { q: DMatrix<f64>, r: DMatrix<f64> },
}

/// Weights gamma_j with f_extrap(0) = sum_j gamma_j f(tau_j).
#[derive(Clone, Debug)]
pub struct ExtrapolationWeights {
    pub gammas: Vec<f64>,
    pub grid: StepGrid,
    pub method: ExtrapolationMethod,
    pub gamma_l1: f64,
    evaluator: Evaluator,
}

impl ExtrapolationWeights {
    pub fn new(grid: &StepGrid, method: ExtrapolationMethod) -> Result<Self> {
        match method {
            ExtrapolationMethod::Interpolation => richardson_weights(grid),
            ExtrapolationMethod::Regression { degree } => regression_weights(grid, degree),
        }
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.gammas.iter().map(|g| g * g).sum()
    }

    /// Weights of the same fitted polynomial evaluated at `x` instead of 0.
    pub fn weights_at(&self, x: f64) -> Vec<f64> {
        match &self.evaluator {
            Evaluator::Lagrange => lagrange_at(self.grid.nodes(), x),
            Evaluator::LeastSquares { q, r } => {
                let b = chebyshev_row(x, self.grid.interval_hi(), r.nrows());
                let y = r.tr_solve_upper_triangular(&b).expect("R is nonsingular after the conditioning check");
                (q * y).iter().copied().collect()
            }
        }
    }

    pub fn evaluate_at(&self, x: f64, values: &[f64]) -> Result<f64> {
        check_len(self.gammas.len(), values.len())?;
        Ok(dot(&self.weights_at(x), values))
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_distinct(nodes: &[f64]) -> Result<()> {
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let scale = nodes[i].abs().max(nodes[j].abs());
            if (nodes[i] - nodes[j]).abs() <= DUPLICATE_TOL * scale {
                return Err(Error::DuplicateNodes {
                    first: i,
                    second: j,
                    tau: nodes[j],
                });
            }
        }
    }
    Ok(())
}

fn lagrange_at(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &tk)| (x - tk) / (nodes[j] - tk))
                .product()
        })
        .collect()
}

/// T_0..T_{m-1} at x mapped from [0, hi] to [-1, 1].
fn chebyshev_row(x: f64, hi: f64, m: usize) -> DVector<f64> {
    let t = 2.0 * x / hi - 1.0;
    let mut row = DVector::zeros(m);
    if m > 0 {
        row[0] = 1.0;
    }
    if m > 1 {
        row[1] = t;
    }
    for k in 2..m {
        row[k] = 2.0 * t * row[k - 1] - row[k - 2];
    }
    row
}

fn finish(grid: &StepGrid, method: ExtrapolationMethod, gammas: Vec<f64>, evaluator: Evaluator) -> ExtrapolationWeights {
    let gamma_l1 = gammas.iter().map(|g| g.abs()).sum();
    ExtrapolationWeights {
        gammas,
        grid: grid.clone(),
        method,
        gamma_l1,
        evaluator,
    }
}

/// Lagrange basis at zero: gamma_j = prod_{k != j} tau_k / (tau_k - tau_j).
pub fn richardson_weights(grid: &StepGrid) -> Result<ExtrapolationWeights> {
    check_distinct(grid.nodes())?;
    let gammas = lagrange_at(grid.nodes(), 0.0);
    Ok(finish(grid, ExtrapolationMethod::Interpolation, gammas, Evaluator::Lagrange))
}

/// Least-squares degree-`degree` fit evaluated at zero.
pub fn regression_weights(grid: &StepGrid, degree: usize) -> Result<ExtrapolationWeights> {
    let nodes = grid.nodes();
    if degree + 1 >= nodes.len() {
        return Err(Error::InvalidArgument(format!(
            "regression degree {degree} needs more than {} nodes; use interpolation for degree = node count - 1",
            degree + 1
        )));
    }
    check_distinct(nodes)?;
    let m = degree + 1;
    let hi = grid.interval_hi();
    let mut v = DMatrix::<f64>::zeros(nodes.len(), m);
    for (i, &t) in nodes.iter().enumerate() {
        v.set_row(i, &chebyshev_row(t, hi, m).transpose());
    }
    let sv = v.clone().singular_values();
    let smin = sv.min();
    let condition = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let qr = v.qr();
    let q = qr.q();
    let r = qr.r();
    let b = chebyshev_row(0.0, hi, m);
    let y = r
        .tr_solve_upper_triangular(&b)
        .ok_or(Error::IllConditioned { condition })?;
    let gammas = (&q * y).iter().copied().collect();
    Ok(finish(
        grid,
        ExtrapolationMethod::Regression { degree },
        gammas,
        Evaluator::LeastSquares { q, r },
    ))
}

/// sum |gamma_j| for the chosen method.
pub fn lebesgue_at_zero(grid: &StepGrid, method: ExtrapolationMethod) -> Result<f64> {
    Ok(ExtrapolationWeights::new(grid, method)?.gamma_l1)
}

#[derive(Clone, Debug)]
pub struct ExtrapolationResult {
    pub value_at_zero: f64,
    pub weights: ExtrapolationWeights,
    /// RMS fit residual; regression only.
    pub residual: Option<f64>,
    pub values: Vec<f64>,
}

pub fn extrapolate(weights: &ExtrapolationWeights, values: &[f64]) -> Result<ExtrapolationResult> {
    check_len(weights.gammas.len(), values.len())?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("value {i} is not finite")));
    }
    let value_at_zero = dot(&weights.gammas, values);
    let residual = match weights.method {
        ExtrapolationMethod::Interpolation => None,
        ExtrapolationMethod::Regression { .. } => {
            let nodes = weights.grid.nodes();
            let ss: f64 = nodes
                .iter()
                .zip(values)
                .map(|(&t, &f)| {
                    let fit = dot(&weights.weights_at(t), values);
                    (f - fit).powi(2)
                })
                .sum();
            Some((ss / nodes.len() as f64).sqrt())
        }
    };
    Ok(ExtrapolationResult {
        value_at_zero,
        weights: weights.clone(),
        residual,
        values: values.to_vec(),
    })
}

/// Fitted polynomial sampled on `[0, interval_hi]`, for plotting without refitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitCurve {
    pub tau: Vec<f64>,
    pub value: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultJson {
    pub value_at_zero: f64,
    pub gammas: Vec<f64>,
    pub gamma_l1: f64,
    pub method: String,
    pub degree: usize,
    pub residual: Option<f64>,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: FitCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
}

impl ExtrapolationResult {
    pub fn fit_curve(&self, points: usize) -> FitCurve {
        let hi = self.weights.grid.interval_hi();
        let points = points.max(2);
        let tau: Vec<f64> = (0..points).map(|i| hi * i as f64 / (points - 1) as f64).collect();
        let value = tau.iter().map(|&x| dot(&self.weights.weights_at(x), &self.values)).collect();
        FitCurve { tau, value }
    }

    pub fn to_json_value(&self, reference: Option<f64>) -> ResultJson {
        let (method, degree) = match self.weights.method {
            ExtrapolationMethod::Interpolation => ("interpolation".to_string(), self.weights.grid.n()),
            ExtrapolationMethod::Regression { degree } => ("regression".to_string(), degree),
        };
        ResultJson {
            value_at_zero: self.value_at_zero,
            gammas: self.weights.gammas.clone(),
            gamma_l1: self.weights.gamma_l1,
            method,
            degree,
            residual: self.residual,
            nodes: self.weights.grid.nodes().to_vec(),
            values: self.values.clone(),
            fit: self.fit_curve(201),
            reference,
            error: reference.map(|r| (self.value_at_zero - r).abs()),
        }
    }

    pub fn to_json(&self, reference: Option<f64>) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json_value(reference))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{chebyshev_grid, equidistant_grid};

    #[test]
    fn two_equidistant_nodes() {
        let g = equidistant_grid(0.2, 1).unwrap();
        let w = richardson_weights(&g).unwrap();
        assert!((w.gammas[0] - 2.0).abs() < 1e-14 && (w.gammas[1] + 1.0).abs() < 1e-14);
        assert!((w.gamma_l1 - 3.0).abs() < 1e-14);
    }

    #[test]
    fn single_node_weight_is_one() {
        let g = StepGrid::from_nodes(vec![0.3], 1.0).unwrap();
        assert_eq!(richardson_weights(&g).unwrap().gammas, vec![1.0]);
    }

    #[test]
    fn equidistant_lebesgue_constant() {
        for n in 1..=10 {
            let g = equidistant_grid(1.0, n).unwrap();
            let l1 = lebesgue_at_zero(&g, ExtrapolationMethod::Interpolation).unwrap();
            let exact = (2f64).powi(n as i32 + 1) - 1.0;
            assert!((l1 - exact).abs() / exact < 1e-10, "n={n}");
        }
    }

    #[test]
    fn chebyshev_lebesgue_grows_slowly() {
        let vals: Vec<f64> = [4, 8, 16, 32, 64]
            .iter()
            .map(|&n| lebesgue_at_zero(&chebyshev_grid(1.0, n).unwrap(), ExtrapolationMethod::Interpolation).unwrap())
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(vals[3] / vals[2] < 1.5 && vals[4] / vals[3] < 1.5);
    }

    #[test]
    fn regression_examples() {
        let g = StepGrid::from_nodes(vec![1.0, 2.0, 3.0], 3.0).unwrap();
        assert!(regression_weights(&g, 2).is_err());
        let w0 = regression_weights(&g, 0).unwrap();
        for gj in &w0.gammas {
            assert!((gj - 1.0 / 3.0).abs() < 1e-14);
        }
        let w1 = regression_weights(&g, 1).unwrap();
        let r = extrapolate(&w1, &[2.0, 3.0, 4.0]).unwrap();
        assert!((r.value_at_zero - 1.0).abs() < 1e-13);
        assert!(r.residual.unwrap() < 1e-13);
        let noisy = extrapolate(&w1, &[2.0, 3.5, 4.0]).unwrap();
        assert!(noisy.residual.unwrap() > 0.1);
    }

    #[test]
    fn regression_reproduces_low_degree_polynomials() {
        let g = chebyshev_grid(0.05, 8).unwrap();
        let w = regression_weights(&g, 7).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|t| 0.3 - 2.0 * t + 40.0 * t.powi(7)).collect();
        assert!((extrapolate(&w, &vals).unwrap().value_at_zero - 0.3).abs() < 1e-9);
        assert!((w.gammas.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn duplicate_and_length_errors() {
        let g = StepGrid::from_nodes(vec![0.1, 0.1 * (1.0 + 1e-15) + 1e-17], 1.0);
        if let Ok(g) = g {
            assert!(matches!(richardson_weights(&g), Err(Error::DuplicateNodes { .. })));
        }
        let w = richardson_weights(&equidistant_grid(1.0, 2).unwrap()).unwrap();
        assert!(matches!(extrapolate(&w, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fit_curve_passes_through_nodes_for_interpolation() {
        let g = chebyshev_grid(1.0, 4).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|t| t.exp()).collect();
        let w = richardson_weights(&g).unwrap();
        for (t, v) in g.nodes().iter().zip(&vals) {
            assert!((w.evaluate_at(*t, &vals).unwrap() - v).abs() < 1e-12);
        }
        let r = extrapolate(&w, &vals).unwrap();
        let fit = r.fit_curve(11);
        assert_eq!(fit.tau.len(), 11);
        assert!((fit.value[0] - r.value_at_zero).abs() < 1e-12);
        let json: serde_json::Value = serde_json::from_str(&r.to_json(Some(1.0)).unwrap()).unwrap();
        assert_eq!(json["method"], "interpolation");
        assert!(json["residual"].is_null());
        assert!(json["error"].as_f64().unwrap() < 1e-3);
    }
}
