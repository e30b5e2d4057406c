use std::fmt::Write as _;

use forge_core::measurement::{Check, DegeneracyCertificate};
use forge_core::regularization::{
    catalog, certify_fd_nonuniqueness, certify_reg_nonuniqueness, fd_reference_solve, reg_pointwise_loss,
    stencil_agreement, zero_loss_interpolant, FdSolution, FidelityConfig, GridSpec, RegularizerKind, RegularizerSpec,
    StencilReport, DEFAULT_EPSILON,
};
use forge_core::{Family, Forge, MlpNetwork};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{rng, scoped, seeded, value_of, Outcome, Result};

/// Data on a cell-centred grid of the unit box and the fidelity weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Instance {
    pub counts: Vec<usize>,
    /// Grid data in lexicographic order; drawn uniformly from `[−1, 1]` with the seed when absent.
    pub data: Option<Vec<f64>>,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Regularizer weight at every node; `1/|Ω^h|` when absent.
    pub reg_weight: Option<f64>,
}

impl Default for Instance {
    fn default() -> Self {
        Instance { counts: vec![5], data: None, alpha1: 0.0, alpha2: 1.0, reg_weight: None }
    }
}

impl Instance {
    fn build(&self, seed: u64) -> Result<(GridSpec, FidelityConfig)> {
        let grid = GridSpec::unit(self.counts.clone())?;
        let data = match &self.data {
            Some(d) => d.clone(),
            None => {
                let mut r = rng(seed);
                (0..grid.len()).map(|_| r.random_range(-1.0..1.0)).collect()
            }
        };
        let mut fid = FidelityConfig::new(self.alpha1, self.alpha2, data)?;
        if let Some(w) = self.reg_weight {
            fid = fid.with_reg_weight(w);
        }
        fid.validate(grid.len())?;
        Ok((grid, fid))
    }
}

fn relu_forge(seed: u64) -> Forge {
    Forge::new(Family::Relu, 3).with_seed(seed)
}

fn default_lambdas() -> Vec<f64> {
    vec![-100.0, -10.0, -1.0, 1.0, 10.0, 100.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroLossConfig {
    pub seed: u64,
    pub instance: Instance,
    /// Smoothing parameter of the TV-Laplacian and elastica kinds.
    pub epsilon: f64,
    pub forge: Forge,
    pub witness: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Default for ZeroLossConfig {
    fn default() -> Self {
        ZeroLossConfig {
            seed: 1,
            instance: Instance::default(),
            epsilon: DEFAULT_EPSILON,
            forge: relu_forge(1),
            witness: vec![0.2],
            lambdas: default_lambdas(),
        }
    }
}

#[derive(Serialize)]
struct ZeroLossRow {
    regularizer: RegularizerSpec,
    loss: f64,
    certificate: DegeneracyCertificate,
}

pub(crate) fn zero_loss(cfg: &ZeroLossConfig) -> Result<Outcome> {
    let (grid, fid) = cfg.instance.build(cfg.seed)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for reg in catalog(cfg.epsilon) {
        let net = zero_loss_interpolant(&grid, &fid.data, reg.order(), &cfg.forge)?;
        let loss = reg_pointwise_loss(&net, &reg, &fid, &grid)?;
        let mut certs =
            certify_reg_nonuniqueness(&grid, &reg, &fid, &cfg.forge, std::slice::from_ref(&cfg.witness), &cfg.lambdas)?;
        let certificate = certs.remove(0);
        checks.push(Check::at_most(&format!("{}/zero_loss", reg.name()), loss.abs(), 1e-8));
        checks.extend(scoped(reg.name(), certificate.checks.clone()));
        rows.push(ZeroLossRow { regularizer: reg, loss, certificate });
    }
    let mut sweep_csv = String::from("regularizer,lambda,loss\n");
    let mut summary = format!("grid {:?}, data {:?}\n", grid.counts, fid.data);
    for r in &rows {
        for (l, v) in r.certificate.lambda_samples.iter().zip(&r.certificate.loss_values) {
            let _ = writeln!(sweep_csv, "{},{l:e},{v:.16e}", r.regularizer.name());
        }
        let _ = writeln!(
            summary,
            "{}: loss of the zero-loss interpolant {:e}; loss spread along u + λΦ {:e}",
            r.regularizer.name(),
            r.loss,
            r.certificate.loss_spread
        );
    }
    let _ = writeln!(summary, "each interpolant reproduces the data with vanishing derivatives, so no regularization is performed");
    Ok(Outcome { checks, results: value_of(&rows), sweep_csv, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastConfig {
    pub seed: u64,
    pub instance: Instance,
    pub regularizer: RegularizerSpec,
    pub forge: Forge,
    pub solver_tolerance: f64,
    /// Allowed shortfall of the solver objective below the grid-search oracle.
    pub oracle_slack: f64,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        ContrastConfig {
            seed: 1,
            instance: Instance { counts: vec![3], data: Some(vec![0.0, 1.0, 0.0]), reg_weight: Some(1.0), ..Instance::default() },
            regularizer: RegularizerSpec { kind: RegularizerKind::Tv { nu: 1 } },
            forge: relu_forge(1),
            solver_tolerance: 1e-12,
            oracle_slack: 1e-6,
        }
    }
}

#[derive(Serialize)]
struct ContrastResults {
    pointwise_minimum: f64,
    interpolant: MlpNetwork,
    fd: FdSolution,
}

pub(crate) fn fd_contrast(cfg: &ContrastConfig) -> Result<Outcome> {
    let (grid, fid) = cfg.instance.build(cfg.seed)?;
    let reg = &cfg.regularizer;
    let interpolant = zero_loss_interpolant(&grid, &fid.data, reg.order(), &cfg.forge)?;
    let pointwise_minimum = reg_pointwise_loss(&interpolant, reg, &fid, &grid)?;
    let fd = fd_reference_solve(reg, &fid, &grid, cfg.solver_tolerance)?;
    let mut checks = vec![Check::at_most("pointwise_minimum_zero", pointwise_minimum.abs(), 1e-12)];
    let lower = match &fd.oracle {
        Some(o) => {
            checks.push(Check::at_least("fd_objective_vs_oracle", fd.objective - (o.objective - cfg.oracle_slack), 0.0));
            o.objective - cfg.oracle_slack
        }
        None => fd.objective,
    };
    checks.push(Check::at_least("fd_minimum_positive", lower, f64::MIN_POSITIVE));

    let mut sweep_csv = String::from("node,data,fd_solution,interpolant\n");
    for (k, x) in grid.nodes().iter().enumerate() {
        let _ = writeln!(sweep_csv, "{},{:.16e},{:.16e},{:.16e}", x[0], fid.data[k], fd.field[k], interpolant.forward(x)?);
    }
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "pointwise minimum 0 vs FD minimum > 0: pointwise loss {pointwise_minimum:e}, FD objective {:.12}",
        fd.objective
    );
    if let Some(o) = &fd.oracle {
        let _ = writeln!(summary, "grid-search oracle {:.12} (final step {:e})", o.objective, o.final_step);
    }
    let _ = writeln!(summary, "data {:?}; FD minimizer {:?}", fid.data, fd.field);
    let _ = writeln!(summary, "exact network derivatives let the interpolant switch the {} term off entirely", reg.name());
    Ok(Outcome { checks, results: value_of(&ContrastResults { pointwise_minimum, interpolant, fd }), sweep_csv, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgreeConfig {
    pub seed: u64,
    pub instance: Instance,
    pub regularizer: RegularizerSpec,
    pub forge: Forge,
    pub solver_tolerance: f64,
    pub witnesses: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
}

impl Default for AgreeConfig {
    fn default() -> Self {
        AgreeConfig {
            seed: 1,
            instance: Instance { counts: vec![8], reg_weight: Some(0.05), ..Instance::default() },
            regularizer: RegularizerSpec { kind: RegularizerKind::Tv { nu: 1 } },
            forge: relu_forge(1),
            solver_tolerance: 1e-12,
            witnesses: vec![vec![0.125], vec![0.5], vec![0.875]],
            lambdas: default_lambdas(),
        }
    }
}

#[derive(Serialize)]
struct AgreeResults {
    fd: FdSolution,
    stencil: StencilReport,
}

pub(crate) fn fd_agree(cfg: &AgreeConfig) -> Result<Outcome> {
    let (grid, fid) = cfg.instance.build(cfg.seed)?;
    let reg = &cfg.regularizer;
    let fd = fd_reference_solve(reg, &fid, &grid, cfg.solver_tolerance)?;
    let stencil = stencil_agreement(None, &fd.field, &grid, reg, &fid, &cfg.forge, &cfg.witnesses, &cfg.lambdas)?;
    let tol = stencil.tolerance;
    let mut checks = vec![
        Check::at_most("fd_loss_match", stencil.loss_gap, tol),
        Check::at_most("grid_interpolation", stencil.interpolation_error, tol),
    ];
    for (i, m) in stencil.members.iter().enumerate() {
        checks.push(Check::at_most(&format!("witness{i}/grid_values_unchanged"), m.grid_deviation, tol));
        checks.push(Check::at_most(&format!("witness{i}/fd_loss_spread"), m.fd_loss_spread, tol));
        checks.push(Check::at_most(&format!("witness{i}/off_grid_change_is_lambda"), m.witness_error, tol));
    }
    let mut sweep_csv = String::from("witness,lambda,change_at_witness\n");
    for m in &stencil.members {
        for (l, c) in &m.witness_changes {
            let _ = writeln!(sweep_csv, "{},{l:e},{c:.16e}", m.witness[0]);
        }
    }
    let mut summary = String::new();
    let _ = writeln!(summary, "FD {} solution on {:?} nodes: objective {:.12}, {} iterations", reg.name(), grid.counts, fd.objective, fd.iterations);
    let _ = writeln!(
        summary,
        "interpolating network: FD loss {:.12} (gap {:e}), grid error {:e}",
        stencil.network_loss, stencil.loss_gap, stencil.interpolation_error
    );
    for m in &stencil.members {
        let _ = writeln!(
            summary,
            "witness {:?}: grid values move by {:e}, off-grid value moves by λ (relative error {:e})",
            m.witness, m.grid_deviation, m.witness_error
        );
    }
    let _ = writeln!(summary, "network and FD solutions coincide on the grid and differ arbitrarily between nodes");
    Ok(Outcome { checks, results: value_of(&AgreeResults { fd, stencil }), sweep_csv, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdNonUniquenessConfig {
    pub seed: u64,
    pub instance: Instance,
    pub epsilon: f64,
    pub forge: Forge,
    pub witness: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Default for FdNonUniquenessConfig {
    fn default() -> Self {
        FdNonUniquenessConfig {
            seed: 1,
            instance: Instance { counts: vec![6], ..Instance::default() },
            epsilon: DEFAULT_EPSILON,
            forge: relu_forge(1),
            witness: vec![1.0 / 3.0],
            lambdas: default_lambdas(),
        }
    }
}

#[derive(Serialize)]
struct FdRow {
    regularizer: RegularizerSpec,
    certificate: DegeneracyCertificate,
}

pub(crate) fn fd_nonuniqueness(cfg: &FdNonUniquenessConfig) -> Result<Outcome> {
    let (grid, fid) = cfg.instance.build(cfg.seed)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for reg in catalog(cfg.epsilon) {
        let certificate = certify_fd_nonuniqueness(&grid, &reg, &fid, &cfg.forge, &cfg.witness, &cfg.lambdas)?;
        checks.extend(scoped(reg.name(), certificate.checks.clone()));
        rows.push(FdRow { regularizer: reg, certificate });
    }
    let mut sweep_csv = String::from("regularizer,lambda,loss\n");
    let mut summary = format!("FD objective on {:?} nodes, witness {:?}\n", grid.counts, cfg.witness);
    for r in &rows {
        for (l, v) in r.certificate.lambda_samples.iter().zip(&r.certificate.loss_values) {
            let _ = writeln!(sweep_csv, "{},{l:e},{v:.16e}", r.regularizer.name());
        }
        let _ = writeln!(
            summary,
            "{}: objective {:.12}, spread along u + λΦ {:e}, Φ(z0) = {}",
            r.regularizer.name(),
            r.certificate.base_loss,
            r.certificate.loss_spread,
            r.certificate.witness_value.unwrap_or(f64::NAN)
        );
    }
    let _ = writeln!(summary, "Φ vanishes on the grid, so every minimizer comes with a line of minimizers");
    Ok(Outcome { checks, results: value_of(&rows), sweep_csv, summary })
}

seeded!(ZeroLossConfig, ContrastConfig, AgreeConfig, FdNonUniquenessConfig);
