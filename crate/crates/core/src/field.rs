use crate::error::Result;
use crate::network::MlpNetwork;

/// A scalar function that can be sampled pointwise.
pub trait ScalarField {
    fn input_dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
}

impl ScalarField for MlpNetwork {
    fn input_dim(&self) -> usize {
        MlpNetwork::input_dim(self)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.forward(x)
    }
}

/// Closure-backed field.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64> ScalarField for FnField<F> {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// The zero function.
pub struct Zero(pub usize);

impl ScalarField for Zero {
    fn input_dim(&self) -> usize {
        self.0
    }

    fn value(&self, _: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
}
