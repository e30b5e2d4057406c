use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Softplus,
    Identity,
}

/// Differentiability class of an activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothness {
    Finite(usize),
    Infinite,
}

impl Smoothness {
    pub fn permits(self, order: usize) -> bool {
        match self {
            Smoothness::Finite(k) => order <= k,
            Smoothness::Infinite => true,
        }
    }
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Softplus,
        Activation::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Softplus => "softplus",
            Activation::Identity => "identity",
        }
    }

    pub fn smoothness_order(self) -> Smoothness {
        match self {
            Activation::Relu => Smoothness::Finite(0),
            _ => Smoothness::Infinite,
        }
    }

    /// ReLU is monotone but not strictly.
    pub fn strictly_monotone(self) -> bool {
        !matches!(self, Activation::Relu)
    }

    pub fn is_piecewise_linear(self) -> bool {
        matches!(self, Activation::Relu | Activation::Identity)
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Activation::Identity => x,
        }
    }

    /// `[σ(x), σ'(x), ..., σ^(k)(x)]`.
    ///
    /// For ReLU the derivative at the kink is not defined; callers must check
    /// proximity before asking for `k ≥ 1`. Here the right derivative is used.
    pub fn derivatives(self, x: f64, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; k + 1];
        match self {
            Activation::Relu => {
                out[0] = x.max(0.0);
                if k >= 1 {
                    out[1] = if x > 0.0 { 1.0 } else { 0.0 };
                }
            }
            Activation::Identity => {
                out[0] = x;
                if k >= 1 {
                    out[1] = 1.0;
                }
            }
            Activation::Tanh => {
                let y = x.tanh();
                // d/dx P(y) = P'(y)(1 - y²)
                fill_polynomial_derivatives(&mut out, y, &[1.0, 0.0, -1.0]);
            }
            Activation::Sigmoid => {
                let y = sigmoid(x);
                fill_polynomial_derivatives(&mut out, y, &[0.0, 1.0, -1.0]);
            }
            Activation::Softplus => {
                out[0] = Activation::Softplus.eval(x);
                if k >= 1 {
                    let s = Activation::Sigmoid.derivatives(x, k - 1);
                    out[1..].copy_from_slice(&s);
                }
            }
        }
        out
    }

    /// Image of `[lo, hi]` under the (monotone) activation.
    pub fn image(self, lo: f64, hi: f64) -> (f64, f64) {
        (self.eval(lo), self.eval(hi))
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivatives of an activation whose derivative is a polynomial `q` in its own value `y`.
fn fill_polynomial_derivatives(out: &mut [f64], y: f64, q: &[f64]) {
    let mut p = vec![0.0, 1.0];
    for slot in out.iter_mut() {
        *slot = horner(&p, y);
        p = multiply(&differentiate(&p), q);
    }
}

fn horner(p: &[f64], y: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * y + c)
}

fn differentiate(p: &[f64]) -> Vec<f64> {
    if p.len() <= 1 {
        return vec![0.0];
    }
    p.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect()
}

fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_derivatives_at_zero() {
        let d = Activation::Tanh.derivatives(0.0, 5);
        let expect = [0.0, 1.0, 0.0, -2.0, 0.0, 16.0];
        for (a, b) in d.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{d:?}");
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        for act in [Activation::Tanh, Activation::Sigmoid, Activation::Softplus] {
            for &x in &[-1.3, -0.2, 0.4, 2.1] {
                let d = act.derivatives(x, 4);
                let h = 1e-4;
                for k in 1..=4 {
                    let fd = (act.derivatives(x + h, k - 1)[k - 1] - act.derivatives(x - h, k - 1)[k - 1]) / (2.0 * h);
                    assert!((fd - d[k]).abs() < 1e-6 * (1.0 + d[k].abs()), "{act} k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn softplus_is_stable_for_large_arguments() {
        assert_eq!(Activation::Softplus.eval(800.0), 800.0);
        assert!(Activation::Softplus.eval(-800.0) >= 0.0);
    }

    #[test]
    fn serde_names() {
        let s = serde_json::to_string(&Activation::Tanh).unwrap();
        assert_eq!(s, "\"tanh\"");
    }
}
