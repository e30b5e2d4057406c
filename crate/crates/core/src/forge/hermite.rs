//! Hermite interpolation by a final hidden layer on top of a scalar projection chain.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::separate::separating_direction;
use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::linalg::{condition_number, solve_refined};
use crate::network::MlpNetwork;

pub const CONDITION_LIMIT: f64 = 1e12;
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Activation argument at the centre of every hidden unit.
pub const ANCHOR: f64 = 0.5;
const SLOPE_FACTOR: f64 = 4.0;
const CENTER_SPREAD: f64 = 0.1;

/// Interpolation condition: `u(x) = value` and all partials of order `1..=order` vanish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteNode {
    pub point: Vec<f64>,
    pub value: f64,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteInterpolant {
    pub network: MlpNetwork,
    pub direction: Vec<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub condition: f64,
    pub anchor_warning: Option<String>,
}

/// Network of hidden widths `(1, …, 1, ℓ)` with `ℓ = Σ(m_i + 1)` matching the Hermite table.
///
/// Nodes are projected onto a separating direction, pushed through `depth − 2` scalar
/// σ-layers and rescaled to `[−1, 1]`; the last hidden layer carries `m_i + 1` units per node
/// centred near it, and the output weights solve the square collocation system.
pub fn smooth_hermite_interpolant(
    nodes: &[HermiteNode],
    activation: Activation,
    depth: usize,
    seed: u64,
) -> Result<HermiteInterpolant> {
    if nodes.is_empty() {
        return Err(Error::Precondition("no interpolation nodes".into()));
    }
    if activation == Activation::Relu {
        return Err(Error::Precondition("Hermite interpolation needs a smooth activation".into()));
    }
    if depth < 2 {
        return Err(Error::Precondition("Hermite interpolant needs depth ≥ 2".into()));
    }
    if depth > 2 && !activation.strictly_monotone() {
        return Err(Error::Precondition(format!("{activation} is not strictly monotone")));
    }
    let d = nodes[0].point.len();
    let points: Vec<Vec<f64>> = nodes.iter().map(|n| n.point.clone()).collect();
    let v = separating_direction(&points, seed)?;
    let proj: Vec<f64> = points.iter().map(|x| x.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();

    let prefix = depth - 2;
    let scale = proj.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let scale = if prefix > 0 && scale > 0.0 { scale } else { 1.0 };
    let t: Vec<f64> = proj
        .iter()
        .map(|&p| (0..prefix).fold(p / scale, |acc, _| activation.eval(acc)))
        .collect();

    let (tmin, tmax) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (alpha, beta) = if nodes.len() == 1 {
        (1.0, -t[0])
    } else {
        (2.0 / (tmax - tmin), -(tmax + tmin) / (tmax - tmin))
    };
    let tau: Vec<f64> = t.iter().map(|&x| alpha * x + beta).collect();
    let mut sorted = tau.clone();
    sorted.sort_by(f64::total_cmp);
    let gap = if nodes.len() == 1 { 2.0 } else { sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min) };
    if !(gap > 0.0) {
        return Err(Error::Precondition("projected nodes collapse".into()));
    }
    let kappa = SLOPE_FACTOR / gap;

    let mut centers = Vec::new();
    for (n, &ti) in nodes.iter().zip(&tau) {
        for j in 0..=n.order {
            centers.push(ti + CENTER_SPREAD * gap * (j as f64 - n.order as f64 / 2.0));
        }
    }
    let ell = centers.len();

    let mut a = DMatrix::zeros(ell, ell);
    let mut b = DVector::zeros(ell);
    let mut row = 0;
    for (n, &ti) in nodes.iter().zip(&tau) {
        for k in 0..=n.order {
            for (u, &c) in centers.iter().enumerate() {
                a[(row, u)] = kappa.powi(k as i32) * activation.derivatives(kappa * (ti - c) + ANCHOR, k)[k];
            }
            b[row] = if k == 0 { n.value } else { 0.0 };
            row += 1;
        }
    }

    let mut eq = a.clone();
    let mut rhs = b.clone();
    for r in 0..ell {
        let m = eq.row(r).iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if m == 0.0 {
            return Err(Error::IllConditioned { condition: f64::INFINITY, limit: CONDITION_LIMIT });
        }
        eq.row_mut(r).scale_mut(1.0 / m);
        rhs[r] /= m;
    }
    let condition = condition_number(&eq);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned { condition, limit: CONDITION_LIMIT });
    }
    let coef = solve_refined(&eq, &rhs)?;
    let residual = (&a * &coef - &b).amax();
    let gmax = nodes.iter().fold(0.0f64, |m, n| m.max(n.value.abs()));
    let tolerance = RESIDUAL_TOLERANCE * (1.0 + gmax);
    if !(residual <= tolerance) {
        return Err(Error::IllConditioned { condition, limit: CONDITION_LIMIT });
    }

    let hidden_bias: Vec<f64> = centers.iter().map(|c| kappa * (beta - c) + ANCHOR).collect();
    let slope = kappa * alpha;
    let output = coef.iter().copied().collect::<Vec<f64>>();
    let network = if prefix == 0 {
        let w1: Vec<f64> = (0..ell).flat_map(|_| v.iter().map(|x| slope * x)).collect();
        MlpNetwork::new(activation, vec![d, ell, 1], vec![w1, output], vec![hidden_bias, vec![0.0]])?
    } else {
        let mut dims = vec![d];
        let mut weights = vec![v.iter().map(|x| x / scale).collect::<Vec<f64>>()];
        let mut biases = vec![vec![0.0]];
        dims.push(1);
        for _ in 1..prefix {
            dims.push(1);
            weights.push(vec![1.0]);
            biases.push(vec![0.0]);
        }
        dims.extend([ell, 1]);
        weights.push(vec![slope; ell]);
        biases.push(hidden_bias);
        weights.push(output);
        biases.push(vec![0.0]);
        MlpNetwork::new(activation, dims, weights, biases)?
    };

    let anchor_derivs = activation.derivatives(ANCHOR, ell.saturating_sub(1));
    let anchor_warning = anchor_derivs
        .iter()
        .position(|x| x.abs() <= 1e-12)
        .map(|k| format!("D^{k}{activation}({ANCHOR}) vanishes to 1e-12 with ℓ = {ell}"));

    Ok(HermiteInterpolant { network, direction: v, residual, tolerance, condition, anchor_warning })
}

/// Same order `m` and zero derivative data at every node.
pub fn smooth_hermite_uniform(
    points: &[Vec<f64>],
    values: &[f64],
    m: usize,
    activation: Activation,
    depth: usize,
    seed: u64,
) -> Result<HermiteInterpolant> {
    if points.len() != values.len() {
        return Err(Error::Precondition(format!("{} nodes but {} values", points.len(), values.len())));
    }
    let nodes: Vec<HermiteNode> = points
        .iter()
        .zip(values)
        .map(|(p, &v)| HermiteNode { point: p.clone(), value: v, order: m })
        .collect();
    smooth_hermite_interpolant(&nodes, activation, depth, seed)
}
