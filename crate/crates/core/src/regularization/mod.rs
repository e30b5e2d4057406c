//! Variational regularization: pointwise-derivative and finite-difference discretisations.

pub mod catalog;
pub mod fd;
pub mod solve;

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::forge::Forge;
use crate::measurement::{loss_invariance_sweep, measure, verify_null, Aggregator, DegeneracyCertificate, MeasurementSpec};
use crate::network::MlpNetwork;

pub use catalog::{catalog, RegularizerKind, RegularizerSpec, DEFAULT_EPSILON};
pub use fd::{certify_fd_nonuniqueness, fd_operator, reg_fd_loss, reg_fd_loss_net, stencil_agreement, StencilReport};
pub use solve::{fd_reference_solve, grid_search_oracle, FdSolution, OracleResult};

/// Cell-centred regular grid: node `i` along axis `a` sits at `origin[a] + i·spacing[a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let g = GridSpec { origin, spacing, counts };
        g.validate()?;
        Ok(g)
    }

    /// `n` cells of width `1/n` per axis of the unit cube, nodes at the cell centres.
    pub fn unit(counts: Vec<usize>) -> Result<Self> {
        let spacing: Vec<f64> = counts.iter().map(|&n| 1.0 / n as f64).collect();
        let origin = spacing.iter().map(|h| 0.5 * h).collect();
        Self::new(origin, spacing, counts)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.origin.len();
        if d == 0 || self.spacing.len() != d || self.counts.len() != d {
            return Err(Error::Precondition("grid origin, spacing and counts must share a positive dimension".into()));
        }
        if self.counts.contains(&0) || self.spacing.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::Precondition("grid needs positive counts and spacings".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Box with the nodes at its cell centres.
    pub fn domain(&self) -> BoxDomain {
        let lo: Vec<f64> = self.origin.iter().zip(&self.spacing).map(|(o, h)| o - 0.5 * h).collect();
        let hi = (0..self.dim()).map(|a| lo[a] + self.counts[a] as f64 * self.spacing[a]).collect();
        BoxDomain::new(lo, hi).expect("validated grid")
    }

    /// Per-axis indices of flat node `k` (last axis fastest).
    pub fn unflatten(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = k % self.counts[a];
            k /= self.counts[a];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn node(&self, k: usize) -> Vec<f64> {
        self.unflatten(k).iter().enumerate().map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a]).collect()
    }

    /// Nodes in lexicographic order.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// CSV with one row `x_0,…,x_{d−1},value` per node.
    pub fn field_csv(&self, values: &[f64]) -> String {
        let mut s: String = (0..self.dim()).map(|a| format!("x{a},")).collect();
        s.push_str("value\n");
        for (k, v) in values.iter().enumerate() {
            for x in self.node(k) {
                s.push_str(&format!("{x:.16e},"));
            }
            s.push_str(&format!("{v:.16e}\n"));
        }
        s
    }
}

/// `α1 Σ ω_D|u − g| + α2 Σ ω_D|u − g|²` with regularizer weights `ω_R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub data: Vec<f64>,
    pub data_weights: Vec<f64>,
    pub reg_weights: Vec<f64>,
}

impl FidelityConfig {
    /// Weights `ω_D = ω_R = 1/|Ω^h|`.
    pub fn new(alpha1: f64, alpha2: f64, data: Vec<f64>) -> Result<Self> {
        let w = vec![1.0 / data.len().max(1) as f64; data.len()];
        let f = FidelityConfig { alpha1, alpha2, data, data_weights: w.clone(), reg_weights: w };
        f.validate(f.data.len())?;
        Ok(f)
    }

    pub fn with_reg_weight(mut self, w: f64) -> Self {
        self.reg_weights = vec![w; self.data.len()];
        self
    }

    pub fn validate(&self, nodes: usize) -> Result<()> {
        if self.data.len() != nodes || self.data_weights.len() != nodes || self.reg_weights.len() != nodes {
            return Err(Error::Precondition(format!("fidelity arrays must have one entry per grid node ({nodes})")));
        }
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0) {
            return Err(Error::Precondition("need α1, α2 ≥ 0".into()));
        }
        if self.data_weights.iter().chain(&self.reg_weights).any(|w| !(*w >= 0.0)) {
            return Err(Error::Precondition("weights must be non-negative".into()));
        }
        Ok(())
    }

    /// Fidelity of value `u` at node `k`.
    pub fn term(&self, k: usize, u: f64) -> f64 {
        let r = u - self.data[k];
        self.data_weights[k] * (self.alpha1 * r.abs() + self.alpha2 * r * r)
    }

    pub fn total(&self, values: &[f64]) -> f64 {
        values.iter().enumerate().map(|(k, &u)| self.term(k, u)).sum()
    }
}

/// `G` on the pointwise layout: value then `η` partials at each node.
pub struct PointwiseAggregator<'a> {
    pub reg: &'a RegularizerSpec,
    pub fid: &'a FidelityConfig,
    pub dim: usize,
}

impl Aggregator for PointwiseAggregator<'_> {
    fn eval(&self, m: &[f64]) -> f64 {
        let stride = self.reg.tuple_len(self.dim) + 1;
        (0..self.fid.data.len())
            .map(|k| {
                let block = &m[k * stride..(k + 1) * stride];
                self.fid.term(k, block[0]) + self.fid.reg_weights[k] * self.reg.eval(&block[1..], self.dim, k)
            })
            .sum()
    }
}

fn check_instance(reg: &RegularizerSpec, fid: &FidelityConfig, grid: &GridSpec) -> Result<()> {
    grid.validate()?;
    reg.validate()?;
    fid.validate(grid.len())?;
    if let RegularizerKind::MixedTvHessian { rho } = &reg.kind {
        if rho.len() != 1 && rho.len() != grid.len() {
            return Err(Error::Precondition("mixed weights: one per node or a single shared weight".into()));
        }
    }
    Ok(())
}

pub fn pointwise_spec(grid: &GridSpec, m: usize) -> Result<MeasurementSpec> {
    MeasurementSpec::pointwise(grid.domain(), &grid.nodes(), m)
}

/// Fidelity plus `Σ ω_R R(D^β u(x))` with exact network derivatives at the grid nodes.
pub fn reg_pointwise_loss(net: &MlpNetwork, reg: &RegularizerSpec, fid: &FidelityConfig, grid: &GridSpec) -> Result<f64> {
    check_instance(reg, fid, grid)?;
    let spec = pointwise_spec(grid, reg.order())?;
    let g = PointwiseAggregator { reg, fid, dim: grid.dim() };
    Ok(g.eval(&measure(net, &spec)?.values))
}

/// Network with `u(x) = g(x)` and vanishing partials of order `1..=m` at every grid node.
pub fn zero_loss_interpolant(grid: &GridSpec, data: &[f64], m: usize, forge: &Forge) -> Result<MlpNetwork> {
    grid.validate()?;
    if data.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: data.len() });
    }
    forge.interpolant(&grid.nodes(), data, m, Some(&grid.domain()))
}

/// One certificate per witness, all sharing the zero-loss interpolant as base.
pub fn certify_reg_nonuniqueness(
    grid: &GridSpec,
    reg: &RegularizerSpec,
    fid: &FidelityConfig,
    forge: &Forge,
    witnesses: &[Vec<f64>],
    lambdas: &[f64],
) -> Result<Vec<DegeneracyCertificate>> {
    check_instance(reg, fid, grid)?;
    let m = reg.order();
    let spec = pointwise_spec(grid, m)?;
    let base = zero_loss_interpolant(grid, &fid.data, m, forge)?;
    let family = forge.null_family(&spec, witnesses)?;
    let g = PointwiseAggregator { reg, fid, dim: grid.dim() };
    family
        .members
        .iter()
        .zip(witnesses)
        .map(|(phi, z0)| {
            let null = verify_null(phi, &spec, z0, forge.family.null_tolerance());
            Ok(loss_invariance_sweep(&g, &spec, &base, phi, lambdas)?.with_null_check(&null))
        })
        .collect()
}
