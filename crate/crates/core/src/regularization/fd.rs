//! Finite-difference stencils and the fully discrete loss.

use serde::{Deserialize, Serialize};

use super::{check_instance, FidelityConfig, GridSpec, RegularizerSpec};
use crate::error::{Error, Result};
use crate::forge::Forge;
use crate::measurement::{loss_invariance_sweep, measure, verify_null, Aggregator, DegeneracyCertificate, MeasurementSpec};
use crate::multi_index::{up_to, MultiIndex};
use crate::network::MlpNetwork;

/// Sparse operator: one row of `(column, coefficient)` pairs per grid node.
pub type Stencil = Vec<Vec<(usize, f64)>>;

fn first_difference(grid: &GridSpec, axis: usize) -> Stencil {
    let h = grid.spacing[axis];
    (0..grid.len())
        .map(|k| {
            let mut idx = grid.unflatten(k);
            if idx[axis] + 1 >= grid.counts[axis] {
                return Vec::new();
            }
            idx[axis] += 1;
            vec![(k, -1.0 / h), (grid.flatten(&idx), 1.0 / h)]
        })
        .collect()
}

fn second_difference(grid: &GridSpec, axis: usize) -> Stencil {
    let h2 = grid.spacing[axis] * grid.spacing[axis];
    let n = grid.counts[axis];
    (0..grid.len())
        .map(|k| {
            let idx = grid.unflatten(k);
            let mut row = vec![(k, -2.0 / h2)];
            for step in [-1i64, 1] {
                let j = idx[axis] as i64 + step;
                let neighbour = if j < 0 || j >= n as i64 {
                    k
                } else {
                    let mut nb = idx.clone();
                    nb[axis] = j as usize;
                    grid.flatten(&nb)
                };
                row.push((neighbour, 1.0 / h2));
            }
            merge(row)
        })
        .collect()
}

fn merge(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::new();
    for (c, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

fn compose(a: &Stencil, b: &Stencil) -> Stencil {
    a.iter()
        .map(|row| merge(row.iter().flat_map(|&(k, c)| b[k].iter().map(move |&(j, v)| (j, c * v))).collect()))
        .collect()
}

/// Stencil of `D_h^β`: forward first differences, centred second differences,
/// mixed second derivatives as composed forward differences, ghost nodes replicate the boundary value.
pub fn fd_stencil(beta: &MultiIndex, grid: &GridSpec) -> Result<Stencil> {
    if beta.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: beta.dim() });
    }
    let axes: Vec<usize> = (0..beta.dim()).flat_map(|a| std::iter::repeat_n(a, beta.0[a] as usize)).collect();
    match axes.as_slice() {
        [a] => Ok(first_difference(grid, *a)),
        [a, b] if a == b => Ok(second_difference(grid, *a)),
        [a, b] => Ok(compose(&first_difference(grid, *a), &first_difference(grid, *b))),
        _ => Err(Error::Precondition(format!("finite differences of order {} are not supported", beta.order()))),
    }
}

pub fn apply(stencil: &Stencil, u: &[f64]) -> Vec<f64> {
    stencil.iter().map(|row| row.iter().map(|&(k, c)| c * u[k]).sum()).collect()
}

/// `D_h^β u` on the grid.
pub fn fd_operator(u: &[f64], beta: &MultiIndex, grid: &GridSpec) -> Result<Vec<f64>> {
    if u.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: u.len() });
    }
    Ok(apply(&fd_stencil(beta, grid)?, u))
}

/// Fully discrete objective with precomputed stencils.
pub struct FdObjective<'a> {
    pub reg: &'a RegularizerSpec,
    pub fid: &'a FidelityConfig,
    pub grid: &'a GridSpec,
    pub stencils: Vec<Stencil>,
}

impl<'a> FdObjective<'a> {
    pub fn new(reg: &'a RegularizerSpec, fid: &'a FidelityConfig, grid: &'a GridSpec) -> Result<Self> {
        check_instance(reg, fid, grid)?;
        let stencils = up_to(grid.dim(), 1, reg.order()).iter().map(|b| fd_stencil(b, grid)).collect::<Result<_>>()?;
        Ok(FdObjective { reg, fid, grid, stencils })
    }

    /// Derivative tuples of all nodes, flattened node-major.
    fn tuples(&self, u: &[f64]) -> Vec<f64> {
        let eta = self.stencils.len();
        let mut t = vec![0.0; u.len() * eta];
        for (b, stencil) in self.stencils.iter().enumerate() {
            for (k, row) in stencil.iter().enumerate() {
                t[k * eta + b] = row.iter().map(|&(j, c)| c * u[j]).sum();
            }
        }
        t
    }

    pub fn regularizer(&self, u: &[f64]) -> f64 {
        let d = self.grid.dim();
        let eta = self.stencils.len();
        self.tuples(u)
            .chunks(eta)
            .enumerate()
            .map(|(k, t)| self.fid.reg_weights[k] * self.reg.eval(t, d, k))
            .sum()
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        self.fid.total(u) + self.regularizer(u)
    }

    /// Subgradient of the regularizer part, accumulated into `out`.
    pub fn regularizer_subgradient(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.grid.dim();
        let eta = self.stencils.len();
        for (k, t) in self.tuples(u).chunks(eta).enumerate() {
            let w = self.fid.reg_weights[k];
            if w == 0.0 {
                continue;
            }
            let s = self.reg.subgradient(t, d, k)?;
            for (stencil, sb) in self.stencils.iter().zip(&s) {
                if *sb != 0.0 {
                    for &(j, c) in &stencil[k] {
                        out[j] += w * sb * c;
                    }
                }
            }
        }
        Ok(())
    }
}

impl Aggregator for FdObjective<'_> {
    fn eval(&self, m: &[f64]) -> f64 {
        self.value(m)
    }
}

/// Fully discrete loss of a grid field.
pub fn reg_fd_loss(u: &[f64], reg: &RegularizerSpec, fid: &FidelityConfig, grid: &GridSpec) -> Result<f64> {
    if u.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: u.len() });
    }
    Ok(FdObjective::new(reg, fid, grid)?.value(u))
}

/// Fully discrete loss of a network through its grid values.
pub fn reg_fd_loss_net(net: &MlpNetwork, reg: &RegularizerSpec, fid: &FidelityConfig, grid: &GridSpec) -> Result<f64> {
    let spec = MeasurementSpec::values(grid.domain(), &grid.nodes())?;
    reg_fd_loss(&measure(net, &spec)?.values, reg, fid, grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilMember {
    pub witness: Vec<f64>,
    pub fd_loss_spread: f64,
    pub grid_deviation: f64,
    /// `(λ, (base + λΦ)(z0) − base(z0))`
    pub witness_changes: Vec<(f64, f64)>,
    pub witness_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilReport {
    pub base: MlpNetwork,
    pub field_loss: f64,
    pub network_loss: f64,
    pub loss_gap: f64,
    pub interpolation_error: f64,
    /// Largest gap between a supplied network minimiser and the field on the grid.
    pub minimizer_deviation: Option<f64>,
    pub members: Vec<StencilMember>,
    pub tolerance: f64,
    pub passed: bool,
}

pub const STENCIL_TOLERANCE: f64 = 1e-10;

/// Interpolate a grid solution by a network and certify that FD-null perturbations keep every grid value.
#[allow(clippy::too_many_arguments)]
pub fn stencil_agreement(
    net_minimizer: Option<&MlpNetwork>,
    fd_solution: &[f64],
    grid: &GridSpec,
    reg: &RegularizerSpec,
    fid: &FidelityConfig,
    forge: &Forge,
    witnesses: &[Vec<f64>],
    lambdas: &[f64],
) -> Result<StencilReport> {
    let objective = FdObjective::new(reg, fid, grid)?;
    if fd_solution.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: fd_solution.len() });
    }
    let domain = grid.domain();
    let nodes = grid.nodes();
    let spec = MeasurementSpec::values(domain.clone(), &nodes)?;
    let base = forge.interpolant(&nodes, fd_solution, 0, Some(&domain))?;
    let base_values = measure(&base, &spec)?.values;
    let interpolation_error = base_values.iter().zip(fd_solution).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let field_loss = objective.value(fd_solution);
    let network_loss = objective.value(&base_values);
    let loss_gap = (field_loss - network_loss).abs();
    let minimizer_deviation = net_minimizer
        .map(|net| -> Result<f64> {
            let v = measure(net, &spec)?.values;
            Ok(v.iter().zip(fd_solution).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
        })
        .transpose()?;

    let mut members = Vec::new();
    if !witnesses.is_empty() {
        let family = forge.null_family(&spec, witnesses)?;
        for (phi, z0) in family.members.iter().zip(witnesses) {
            let mut grid_deviation = 0.0f64;
            let (mut lo, mut hi) = (network_loss, network_loss);
            let mut witness_changes = Vec::new();
            let mut witness_error = 0.0f64;
            let at_base = base.forward(z0)?;
            for &l in lambdas {
                let u = MlpNetwork::linear_combine(&[&base, phi], &[1.0, l])?;
                let values = measure(&u, &spec)?.values;
                grid_deviation = values.iter().zip(&base_values).fold(grid_deviation, |m, (a, b)| m.max((a - b).abs()));
                let loss = objective.value(&values);
                lo = lo.min(loss);
                hi = hi.max(loss);
                let change = u.forward(z0)? - at_base;
                witness_error = witness_error.max((change - l).abs() / (1.0 + l.abs()));
                witness_changes.push((l, change));
            }
            let fd_loss_spread = hi - lo;
            let passed = fd_loss_spread <= STENCIL_TOLERANCE
                && grid_deviation <= STENCIL_TOLERANCE
                && witness_error <= STENCIL_TOLERANCE;
            members.push(StencilMember {
                witness: z0.clone(),
                fd_loss_spread,
                grid_deviation,
                witness_changes,
                witness_error,
                passed,
            });
        }
    }
    let passed = loss_gap <= STENCIL_TOLERANCE
        && interpolation_error <= STENCIL_TOLERANCE
        && members.iter().all(|m| m.passed);
    Ok(StencilReport {
        base,
        field_loss,
        network_loss,
        loss_gap,
        interpolation_error,
        minimizer_deviation,
        members,
        tolerance: STENCIL_TOLERANCE,
        passed,
    })
}

/// Certificate over the value-only layout with the data interpolant as base.
pub fn certify_fd_nonuniqueness(
    grid: &GridSpec,
    reg: &RegularizerSpec,
    fid: &FidelityConfig,
    forge: &Forge,
    witness: &[f64],
    lambdas: &[f64],
) -> Result<DegeneracyCertificate> {
    let objective = FdObjective::new(reg, fid, grid)?;
    let domain = grid.domain();
    let nodes = grid.nodes();
    let spec = MeasurementSpec::values(domain.clone(), &nodes)?;
    let base = forge.interpolant(&nodes, &fid.data, 0, Some(&domain))?;
    let phi = forge.null_direction(&spec, witness)?;
    let null = verify_null(&phi, &spec, witness, forge.family.null_tolerance());
    Ok(loss_invariance_sweep(&objective, &spec, &base, &phi, lambdas)?.with_null_check(&null))
}
