use std::fmt::Write as _;

use forge_core::measurement::Check;
use forge_core::train::DescentBudget;
use forge_core::wpinn::{
    quadrature_sensitivity, sample_kernel, solution_family, wpinn_fit, FamilyCertificate, FitArchitecture, KernelSearch,
    QuadratureReport, Source, TestSpace, WeakForm, CERTIFIED_QUADRATURE_FLOOR, DEFAULT_QUADRATURE,
};
use forge_core::Activation;
use serde::{Deserialize, Serialize};

use crate::{flag, seeded, value_of, Outcome, Result};

/// Trial networks sampled for kernel extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialNets {
    pub width: usize,
    pub activation: Activation,
}

impl Default for TrialNets {
    fn default() -> Self {
        TrialNets { width: 8, activation: Activation::Tanh }
    }
}

fn kernel_checks(label: &str, k: &KernelSearch) -> Vec<Check> {
    let e = &k.element;
    vec![
        Check::at_most(&format!("{label}/kernel_residual"), e.residual, 1e-10 * e.t_norm),
        Check::at_least(&format!("{label}/phi_l2"), e.phi_l2, 1e-4),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub seed: u64,
    pub length: f64,
    /// Numbers of interior hat functions.
    pub sizes: Vec<usize>,
    pub quadrature: usize,
    pub trials: TrialNets,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { seed: 1, length: 1.0, sizes: vec![2, 4, 8], quadrature: DEFAULT_QUADRATURE, trials: TrialNets::default() }
    }
}

#[derive(Serialize)]
struct KernelRow {
    n: usize,
    search: KernelSearch,
}

pub(crate) fn kernel(cfg: &KernelConfig) -> Result<Outcome> {
    let form = WeakForm::poisson(Source::Zero);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &n in &cfg.sizes {
        let space = TestSpace::uniform(cfg.length, n, cfg.quadrature)?;
        let search = sample_kernel(&space, &form, cfg.trials.width, cfg.trials.activation, cfg.seed.wrapping_add(100 * n as u64))?;
        checks.extend(kernel_checks(&format!("n={n}"), &search));
        rows.push(KernelRow { n, search });
    }
    let mut sweep_csv = String::from("n,kernel_residual,t_norm,phi_l2,sigma_min,attempts\n");
    let mut summary = String::from("homogeneous problem a(u, φ_i) = 0 for all interior hats φ_i\n");
    for r in &rows {
        let e = &r.search.element;
        let sigma_min = e.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let _ = writeln!(
            sweep_csv,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.n, e.residual, e.t_norm, e.phi_l2, sigma_min, r.search.attempts
        );
        let _ = writeln!(
            summary,
            "n = {}: {} trial nets, residual {:.3e} (‖T‖ = {:.3e}), ‖Φ‖_L2 = {:.4e}",
            r.n,
            r.n + 1,
            e.residual,
            e.t_norm,
            e.phi_l2
        );
    }
    let _ = writeln!(summary, "n + 1 independent networks always leave a nontrivial combination in the kernel");
    Ok(Outcome { checks, results: value_of(&rows), sweep_csv, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    pub seed: u64,
    pub length: f64,
    pub elements: usize,
    pub quadrature: usize,
    pub source: Source,
    pub u0: f64,
    pub ut: f64,
    pub fit_width: usize,
    pub fit_budget: DescentBudget,
    pub trials: TrialNets,
    pub lambdas: Vec<f64>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            seed: 1,
            length: 1.0,
            elements: 4,
            quadrature: DEFAULT_QUADRATURE,
            source: Source::Constant { value: 1.0 },
            u0: 0.0,
            ut: 0.0,
            fit_width: 8,
            fit_budget: DescentBudget { max_iterations: 500, ..DescentBudget::default() },
            trials: TrialNets::default(),
            lambdas: vec![-1e3, -100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0, 1e3],
        }
    }
}

#[derive(Serialize)]
struct FamilyResults {
    fit_residual: f64,
    fit_iterations: usize,
    kernel: KernelSearch,
    family: FamilyCertificate,
}

pub(crate) fn family(cfg: &FamilyConfig) -> Result<Outcome> {
    let space = TestSpace::uniform(cfg.length, cfg.elements, cfg.quadrature)?;
    let form = WeakForm::poisson(cfg.source.clone());
    let arch = FitArchitecture { width: cfg.fit_width, activation: cfg.trials.activation, seed: cfg.seed };
    let fit = wpinn_fit(&space, &form, (cfg.u0, cfg.ut), &arch, &cfg.fit_budget)?;
    let kernel = sample_kernel(&space, &form, cfg.trials.width, cfg.trials.activation, cfg.seed.wrapping_add(1))?;
    let family = solution_family(&fit.trial, &kernel.element.phi, &cfg.lambdas, &space, &form)?;

    let mut checks = vec![flag("fit_reached_target", fit.reached_target)];
    checks.extend(kernel_checks("kernel", &kernel));
    let slack = family
        .lambdas
        .iter()
        .zip(&family.residuals)
        .map(|(l, r)| r - (1e-8 + l.abs() * 1e-10))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most("family_residual_bound", slack, 0.0));
    checks.push(flag("family_triangle_bound", family.passed));

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "u* fitted with {} hats: weak residual {:.3e} after {} iterations",
        cfg.elements, fit.residual, fit.iterations
    );
    let _ = writeln!(summary, "kernel element Φ: residual {:.3e}, ‖Φ‖_L2 = {:.4e}", family.kernel_residual, family.phi_l2);
    for ((l, r), d) in family.lambdas.iter().zip(&family.residuals).zip(&family.distances) {
        let _ = writeln!(summary, "λ = {l:e}: residual {r:.3e}, ‖u* + λΦ − u*‖_L2 = {d:.4e}");
    }
    let _ = writeln!(summary, "every u* + λΦ solves the weak problem; the solutions are unbounded in L2");
    let sweep_csv = family.sweep_csv();
    Ok(Outcome {
        checks,
        results: value_of(&FamilyResults { fit_residual: fit.residual, fit_iterations: fit.iterations, kernel, family }),
        sweep_csv,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub seed: u64,
    pub length: f64,
    pub elements: usize,
    pub orders: Vec<usize>,
    pub trials: TrialNets,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { seed: 1, length: 1.0, elements: 4, orders: vec![1, 2, 4, 8, 16], trials: TrialNets::default() }
    }
}

#[derive(Serialize)]
struct QuadratureRow {
    q: usize,
    below_floor: bool,
    search: KernelSearch,
}

#[derive(Serialize)]
struct QuadratureResults {
    per_order: Vec<QuadratureRow>,
    /// The kernel element of the finest order, re-evaluated at every order.
    transfer: QuadratureReport,
}

pub(crate) fn quadrature(cfg: &QuadratureConfig) -> Result<Outcome> {
    let form = WeakForm::poisson(Source::Zero);
    let base = TestSpace::uniform(cfg.length, cfg.elements, DEFAULT_QUADRATURE)?;
    let mut per_order = Vec::new();
    let mut checks = Vec::new();
    for &q in &cfg.orders {
        let space = base.with_quadrature(q)?;
        let search = sample_kernel(&space, &form, cfg.trials.width, cfg.trials.activation, cfg.seed)?;
        checks.extend(kernel_checks(&format!("q={q}"), &search));
        per_order.push(QuadratureRow { q, below_floor: q < CERTIFIED_QUADRATURE_FLOOR, search });
    }
    let finest = per_order.iter().max_by_key(|r| r.q).expect("at least one quadrature order");
    let phi = &finest.search.element.phi;
    let transfer = quadrature_sensitivity(phi, phi, &base.with_quadrature(finest.q)?, &cfg.orders)?;

    let mut sweep_csv = String::from("q,kernel_residual,phi_l2,transfer_residual,below_floor\n");
    let mut summary = String::from("a kernel element exists at every quadrature order\n");
    for (r, t) in per_order.iter().zip(&transfer.rows) {
        let e = &r.search.element;
        let _ = writeln!(
            sweep_csv,
            "{},{:.16e},{:.16e},{:.16e},{}",
            r.q, e.residual, e.phi_l2, t.kernel_residual, r.below_floor
        );
        let _ = writeln!(
            summary,
            "q = {}: residual {:.3e}, ‖Φ‖_L2 = {:.4e}; finest-order Φ has residual {:.3e} here{}",
            r.q,
            e.residual,
            e.phi_l2,
            t.kernel_residual,
            if r.below_floor { " (below the certified floor)" } else { "" }
        );
    }
    Ok(Outcome { checks, results: value_of(&QuadratureResults { per_order, transfer }), sweep_csv, summary })
}

seeded!(KernelConfig, FamilyConfig, QuadratureConfig);
