//! Interpolants with vanishing derivatives and null directions of measurement maps.

pub mod hermite;
pub mod relu;
pub mod separate;

pub use hermite::{smooth_hermite_interpolant, smooth_hermite_uniform, HermiteInterpolant, HermiteNode};
pub use relu::{plateau_radius, relu_hermite_interpolant};
pub use separate::separating_direction;

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::measurement::MeasurementSpec;
use crate::network::MlpNetwork;

/// Null residual certified for ReLU plateau constructions.
pub const RELU_NULL_TOLERANCE: f64 = 1e-12;
/// Null residual certified for smooth Hermite constructions.
pub const SMOOTH_NULL_TOLERANCE: f64 = 1e-8;
/// Minimum row separation of the cross-evaluation matrix of a null family.
pub const FAMILY_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Relu,
    Smooth { activation: Activation },
}

impl Family {
    pub fn activation(self) -> Activation {
        match self {
            Family::Relu => Activation::Relu,
            Family::Smooth { activation } => activation,
        }
    }

    pub fn null_tolerance(self) -> f64 {
        match self {
            Family::Relu => RELU_NULL_TOLERANCE,
            Family::Smooth { .. } => SMOOTH_NULL_TOLERANCE,
        }
    }

    pub fn tanh() -> Self {
        Family::Smooth { activation: Activation::Tanh }
    }
}

/// Deterministic builder: the same `(family, depth, seed)` and inputs give the same networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Forge {
    pub family: Family,
    pub depth: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullFamily {
    pub witnesses: Vec<Vec<f64>>,
    pub members: Vec<MlpNetwork>,
    /// `cross[j][k] = Φ_j(z0_k)`.
    pub cross: Vec<Vec<f64>>,
}

impl Forge {
    pub fn new(family: Family, depth: usize) -> Self {
        Forge { family, depth, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Network with `u(x_i) = g_i` and vanishing partials of order `1..=m` at every node.
    pub fn interpolant(&self, nodes: &[Vec<f64>], values: &[f64], m: usize, domain: Option<&BoxDomain>) -> Result<MlpNetwork> {
        match self.family {
            Family::Relu => relu_hermite_interpolant(nodes, values, self.depth, domain),
            Family::Smooth { activation } => {
                Ok(smooth_hermite_uniform(nodes, values, m, activation, self.depth, self.seed)?.network)
            }
        }
    }

    /// Φ with `M(Φ) = 0` for every probe of `spec` and `Φ(z0) = 1`.
    pub fn null_direction(&self, spec: &MeasurementSpec, z0: &[f64]) -> Result<MlpNetwork> {
        if z0.len() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), got: z0.len() });
        }
        if spec.contains_point(z0) {
            return Err(Error::Precondition(format!("witness {z0:?} coincides with a probe point")));
        }
        if !spec.domain().contains(z0) {
            return Err(Error::Precondition(format!("witness {z0:?} lies outside the domain")));
        }
        let mut nodes = spec.points_with_orders();
        nodes.push((z0.to_vec(), 0));
        let raw = match self.family {
            Family::Relu => {
                let points: Vec<Vec<f64>> = nodes.iter().map(|n| n.0.clone()).collect();
                let mut data = vec![0.0; points.len()];
                data[points.len() - 1] = 1.0;
                relu_hermite_interpolant(&points, &data, self.depth, Some(spec.domain()))?
            }
            Family::Smooth { activation } => {
                let last = nodes.len() - 1;
                let table: Vec<HermiteNode> = nodes
                    .into_iter()
                    .enumerate()
                    .map(|(i, (point, order))| HermiteNode { point, value: if i == last { 1.0 } else { 0.0 }, order })
                    .collect();
                smooth_hermite_interpolant(&table, activation, self.depth, self.seed)?.network
            }
        };
        normalize_at(raw, z0)
    }

    /// One normalised null direction per witness, certified pairwise distinct.
    pub fn null_family(&self, spec: &MeasurementSpec, witnesses: &[Vec<f64>]) -> Result<NullFamily> {
        for (i, a) in witnesses.iter().enumerate() {
            if witnesses[..i].contains(a) {
                return Err(Error::Precondition(format!("repeated witness {a:?}")));
            }
        }
        let members = witnesses.iter().map(|z| self.null_direction(spec, z)).collect::<Result<Vec<_>>>()?;
        let cross = members
            .iter()
            .map(|phi| witnesses.iter().map(|z| phi.forward(z)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        for j in 0..cross.len() {
            for k in 0..j {
                let diff = cross[j].iter().zip(&cross[k]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if diff <= FAMILY_SEPARATION {
                    return Err(Error::Precondition(format!("null directions {k} and {j} are indistinguishable at the witnesses")));
                }
            }
        }
        Ok(NullFamily { witnesses: witnesses.to_vec(), members, cross })
    }
}

/// Rescale the output layer so that the network evaluates to exactly 1 at `z0`,
/// searching a few ulps around `1/u(z0)` when the first rescaling rounds off.
fn normalize_at(raw: MlpNetwork, z0: &[f64]) -> Result<MlpNetwork> {
    let at = raw.forward(z0)?;
    if !(at.abs() >= f64::MIN_POSITIVE) || !at.is_finite() {
        return Err(Error::Precondition("forged direction vanishes at the witness".into()));
    }
    if at == 1.0 {
        return Ok(raw);
    }
    let s0 = 1.0 / at;
    let mut best = (f64::INFINITY, raw.scaled(s0));
    let (mut up, mut down) = (s0, s0);
    for i in 0..33 {
        let s = if i == 0 {
            s0
        } else if i % 2 == 1 {
            up = up.next_up();
            up
        } else {
            down = down.next_down();
            down
        };
        let net = raw.scaled(s);
        let err = (net.forward(z0)? - 1.0).abs();
        if err == 0.0 {
            return Ok(net);
        }
        if err < best.0 {
            best = (err, net);
        }
    }
    Ok(best.1)
}
