//! Truncated multivariate Taylor propagation through a network.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::multi_index::{self, MultiIndex};
use crate::network::MlpNetwork;

/// Coefficient layout of a truncated Taylor polynomial in `dim` variables.
#[derive(Debug, Clone)]
pub struct JetLayout {
    dim: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
    // (i, j, k): coefficient i times coefficient j contributes to k
    products: Vec<(usize, usize, usize)>,
}

impl JetLayout {
    pub fn new(dim: usize, order: usize) -> Self {
        let indices = multi_index::up_to(dim, 0, order);
        let position: HashMap<MultiIndex, usize> =
            indices.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if a.order() + b.order() <= order {
                    let sum = MultiIndex(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect());
                    products.push((i, j, position[&sum]));
                }
            }
        }
        JetLayout { dim, order, indices, position, products }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, beta: &MultiIndex) -> Option<usize> {
        self.position.get(beta).copied()
    }

    fn variable(&self, axis: usize, value: f64) -> Vec<f64> {
        let mut j = vec![0.0; self.len()];
        j[0] = value;
        if self.order >= 1 {
            j[self.position[&MultiIndex::unit(self.dim, axis)]] = 1.0;
        }
        j
    }

    fn mul(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for &(i, j, k) in &self.products {
            out[k] += x[i] * y[j];
        }
        out
    }

    /// `σ(a)` for a jet `a`, by composing the Taylor series of σ at `a[0]` with `a − a[0]`.
    fn activate(&self, act: Activation, a: &[f64], kink_tolerance: f64) -> Result<Vec<f64>> {
        let a0 = a[0];
        let constant = a[1..].iter().all(|&c| c == 0.0);
        let mut out = vec![0.0; self.len()];
        if self.order == 0 || constant {
            // Constant input: the unit is locally constant whatever the activation.
            out[0] = act.eval(a0);
            return Ok(out);
        }
        if act == Activation::Relu {
            if a0.abs() <= kink_tolerance {
                return Err(Error::KinkProximity { preactivation: a0, tolerance: kink_tolerance });
            }
            if a0 > 0.0 {
                out.copy_from_slice(a);
            }
            return Ok(out);
        }
        if !act.smoothness_order().permits(self.order) {
            return Err(Error::UnsupportedOrder { activation: act.to_string(), order: self.order });
        }
        let d = act.derivatives(a0, self.order);
        let mut delta = a.to_vec();
        delta[0] = 0.0;
        out[0] = d[0];
        let mut power = delta.clone();
        let mut inv_factorial = 1.0;
        for (k, dk) in d.iter().enumerate().skip(1) {
            inv_factorial /= k as f64;
            let c = dk * inv_factorial;
            for (o, p) in out.iter_mut().zip(&power) {
                *o += c * p;
            }
            if k < self.order {
                power = self.mul(&power, &delta);
            }
        }
        Ok(out)
    }
}

/// Value and all partial derivatives up to `order` of a scalar function at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBundle {
    pub point: Vec<f64>,
    pub order: usize,
    pub entries: Vec<(MultiIndex, f64)>,
}

impl DerivativeBundle {
    pub fn get(&self, beta: &MultiIndex) -> Option<f64> {
        self.entries.iter().find(|(b, _)| b == beta).map(|(_, v)| *v)
    }

    pub fn value(&self) -> f64 {
        self.entries[0].1
    }

    pub fn gradient(&self) -> Vec<f64> {
        let d = self.point.len();
        (0..d).map(|k| self.get(&MultiIndex::unit(d, k)).unwrap_or(0.0)).collect()
    }

    /// Entries with `1 ≤ |β| ≤ order`, graded-lexicographic.
    pub fn derivatives(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().skip(1).map(|(_, v)| *v)
    }
}

/// Taylor coefficients `c_β` of the network at `x`, laid out by `layout`.
pub fn jet_coefficients(net: &MlpNetwork, x: &[f64], layout: &JetLayout, kink_tolerance: f64) -> Result<Vec<f64>> {
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch { expected: net.input_dim(), got: x.len() });
    }
    let act = net.activation();
    let mut phi: Vec<Vec<f64>> = x.iter().enumerate().map(|(k, &v)| layout.variable(k, v)).collect();
    let depth = net.depth();
    for i in 1..=depth {
        let w = net.weight(i);
        let b = net.bias(i);
        let cols = phi.len();
        let mut next = Vec::with_capacity(b.len());
        for (row, bias) in w.chunks(cols).zip(b) {
            let mut a = vec![0.0; layout.len()];
            a[0] = *bias;
            for (wk, jk) in row.iter().zip(&phi) {
                if *wk != 0.0 {
                    for (o, c) in a.iter_mut().zip(jk) {
                        *o += wk * c;
                    }
                }
            }
            next.push(if i < depth { layout.activate(act, &a, kink_tolerance)? } else { a });
        }
        phi = next;
    }
    Ok(phi.pop().expect("scalar output"))
}

pub fn jet_forward(net: &MlpNetwork, x: &[f64], order: usize, kink_tolerance: f64) -> Result<DerivativeBundle> {
    let layout = JetLayout::new(net.input_dim(), order);
    let coeffs = jet_coefficients(net, x, &layout, kink_tolerance)?;
    Ok(bundle(&layout, x, coeffs))
}

pub(crate) fn bundle(layout: &JetLayout, x: &[f64], coeffs: Vec<f64>) -> DerivativeBundle {
    let entries = layout
        .indices
        .iter()
        .zip(coeffs)
        .map(|(b, c)| (b.clone(), c * b.factorial()))
        .collect();
    DerivativeBundle { point: x.to_vec(), order: layout.order, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::DEFAULT_KINK_TOLERANCE;

    #[test]
    fn affine_jet() {
        let n = MlpNetwork::affine(Activation::Relu, vec![2.0], 1.0);
        let j = jet_forward(&n, &[0.3], 2, DEFAULT_KINK_TOLERANCE).unwrap();
        let vals: Vec<f64> = j.entries.iter().map(|e| e.1).collect();
        assert_eq!(vals, vec![1.6, 2.0, 0.0]);
    }

    #[test]
    fn tanh_neuron_jet() {
        let n = MlpNetwork::new(Activation::Tanh, vec![1, 1, 1], vec![vec![1.0], vec![1.0]], vec![vec![0.0], vec![0.0]]).unwrap();
        let j = jet_forward(&n, &[0.0], 3, DEFAULT_KINK_TOLERANCE).unwrap();
        let vals: Vec<f64> = j.entries.iter().map(|e| e.1).collect();
        let expect = [0.0, 1.0, 0.0, -2.0];
        for (a, b) in vals.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn kink_detection() {
        let n = MlpNetwork::new(Activation::Relu, vec![1, 1, 1], vec![vec![1.0], vec![1.0]], vec![vec![-0.5], vec![0.0]]).unwrap();
        assert!(matches!(jet_forward(&n, &[0.5], 1, DEFAULT_KINK_TOLERANCE), Err(Error::KinkProximity { .. })));
        assert_eq!(jet_forward(&n, &[0.5], 0, DEFAULT_KINK_TOLERANCE).unwrap().value(), 0.0);
    }

    #[test]
    fn constant_input_at_kink_is_allowed() {
        let n = MlpNetwork::new(Activation::Relu, vec![1, 1, 1], vec![vec![0.0], vec![1.0]], vec![vec![0.0], vec![2.0]]).unwrap();
        let j = jet_forward(&n, &[0.1], 2, DEFAULT_KINK_TOLERANCE).unwrap();
        assert_eq!(j.value(), 2.0);
        assert_eq!(j.derivatives().collect::<Vec<_>>(), vec![0.0, 0.0]);
    }

    #[test]
    fn mixed_partials_of_product_like_net() {
        // u = tanh(x + 2y): D^(1,1) u = 2 tanh''(x + 2y)
        let n = MlpNetwork::new(Activation::Tanh, vec![2, 1, 1], vec![vec![1.0, 2.0], vec![1.0]], vec![vec![0.0], vec![0.0]]).unwrap();
        let x = [0.2, -0.3];
        let j = jet_forward(&n, &x, 2, DEFAULT_KINK_TOLERANCE).unwrap();
        let d = Activation::Tanh.derivatives(x[0] + 2.0 * x[1], 2);
        assert!((j.get(&MultiIndex(vec![1, 1])).unwrap() - 2.0 * d[2]).abs() < 1e-14);
        assert!((j.get(&MultiIndex(vec![0, 2])).unwrap() - 4.0 * d[2]).abs() < 1e-14);
        assert_eq!(j.entries.len(), 6);
    }
}
