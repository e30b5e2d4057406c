//! Plain fixed-step gradient descent for depth-2 networks with analytic parameter gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::network::MlpNetwork;

/// Parameter layout of `u(x) = Σ_j c_j σ(W_j·x + b_j) + c_0`: `[W (row-major), b, c, c_0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shallow {
    pub dim: usize,
    pub width: usize,
    pub activation: Activation,
}

impl Shallow {
    pub fn parameter_count(&self) -> usize {
        self.width * (self.dim + 2) + 1
    }

    /// Seeded standard-normal hidden parameters, output weights scaled by `1/√width`, zero output bias.
    pub fn random(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p: Vec<f64> = (0..self.parameter_count()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let c0 = self.width * (self.dim + 1);
        let s = 1.0 / (self.width as f64).sqrt();
        p[c0..c0 + self.width].iter_mut().for_each(|v| *v *= s);
        *p.last_mut().unwrap() = 0.0;
        p
    }

    pub fn to_network(&self, p: &[f64]) -> MlpNetwork {
        let (w, rest) = p.split_at(self.width * self.dim);
        let (b, rest) = rest.split_at(self.width);
        let (c, c0) = rest.split_at(self.width);
        MlpNetwork::new(
            self.activation,
            vec![self.dim, self.width, 1],
            vec![w.to_vec(), c.to_vec()],
            vec![b.to_vec(), vec![c0[0]]],
        )
        .expect("shapes follow the layout")
    }

    pub fn from_network(net: &MlpNetwork) -> Result<(Shallow, Vec<f64>)> {
        if net.depth() != 2 {
            return Err(Error::Precondition(format!("expected a depth-2 network, got depth {}", net.depth())));
        }
        let s = Shallow { dim: net.input_dim(), width: net.hidden_widths()[0], activation: net.activation() };
        let mut p = net.weight(1).to_vec();
        p.extend_from_slice(net.bias(1));
        p.extend_from_slice(net.weight(2));
        p.push(net.bias(2)[0]);
        Ok((s, p))
    }

    /// Value and spatial gradient at `x`.
    pub fn eval(&self, p: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim;
        let (w, rest) = p.split_at(self.width * d);
        let (b, rest) = rest.split_at(self.width);
        let (c, c0) = rest.split_at(self.width);
        let mut u = c0[0];
        let mut g = vec![0.0; d];
        for j in 0..self.width {
            let wj = &w[j * d..(j + 1) * d];
            let a = b[j] + wj.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            let s = self.activation.derivatives(a, 1);
            u += c[j] * s[0];
            for k in 0..d {
                g[k] += c[j] * s[1] * wj[k];
            }
        }
        (u, g)
    }

    /// Adds `ū ∂u/∂θ + ḡ·∂∇u/∂θ` at `x` into `grad`.
    pub fn backprop(&self, p: &[f64], x: &[f64], u_bar: f64, g_bar: &[f64], grad: &mut [f64]) {
        let d = self.dim;
        let nw = self.width * d;
        let (w, rest) = p.split_at(nw);
        let (b, rest) = rest.split_at(self.width);
        let c = &rest[..self.width];
        for j in 0..self.width {
            let wj = &w[j * d..(j + 1) * d];
            let a = b[j] + wj.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            let s = self.activation.derivatives(a, 2);
            let gw: f64 = g_bar.iter().zip(wj).map(|(a, b)| a * b).sum();
            // ∂/∂c_j
            grad[nw + self.width + j] += u_bar * s[0] + s[1] * gw;
            // ∂/∂b_j
            let db = c[j] * (u_bar * s[1] + s[2] * gw);
            grad[nw + j] += db;
            // ∂/∂W_jk
            for k in 0..d {
                grad[j * d + k] += db * x[k] + c[j] * s[1] * g_bar[k];
            }
        }
        grad[nw + 2 * self.width] += u_bar;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentBudget {
    pub step: f64,
    pub max_iterations: usize,
    /// Stop when the loss decreased by less than `tolerance` over the last `window` iterations.
    pub window: usize,
    pub tolerance: f64,
}

impl Default for DescentBudget {
    fn default() -> Self {
        DescentBudget { step: 1e-2, max_iterations: 200_000, window: 100, tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentOutcome {
    pub params: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fixed-step gradient descent returning the best iterate seen.
pub fn gradient_descent<F>(mut params: Vec<f64>, budget: &DescentBudget, mut loss_grad: F) -> DescentOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut grad = vec![0.0; params.len()];
    let mut history = std::collections::VecDeque::with_capacity(budget.window + 1);
    let mut best = (f64::INFINITY, params.clone());
    let mut converged = false;
    let mut it = 0;
    while it <= budget.max_iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let loss = loss_grad(&params, &mut grad);
        if !loss.is_finite() {
            break;
        }
        if loss < best.0 {
            best = (loss, params.clone());
        }
        history.push_back(loss);
        if history.len() > budget.window {
            let old = history.pop_front().unwrap();
            if old - loss < budget.tolerance {
                converged = true;
                break;
            }
        }
        if it == budget.max_iterations {
            break;
        }
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= budget.step * g;
        }
        it += 1;
    }
    DescentOutcome { params: best.1, loss: best.0, iterations: it, converged }
}
