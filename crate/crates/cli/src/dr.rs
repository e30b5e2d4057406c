use std::fmt::Write as _;

use forge_core::deep_ritz::{
    affine_minimizer_1d, certify_dr_nonuniqueness, collocation_agreement_check, dr_loss, non_coercive_sequence,
    one_neuron_zero_loss, DeepRitzConfig, DrCertificateRequest, Enforcement, LocalIntegrand, TrialArchitecture,
    AGREEMENT_TOLERANCE,
};
use forge_core::field::FnField;
use forge_core::forge::{smooth_hermite_interpolant, HermiteNode};
use forge_core::measurement::{lp_distance, Check};
use forge_core::train::DescentBudget;
use forge_core::{Activation, BoxDomain, Family, Forge, MlpNetwork};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{flag, rng, scoped, seeded, value_of, Outcome, Result};

/// The two-point problem on `[0, T]` with nodes `z_1 < … < z_N` inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Interval {
    pub length: f64,
    pub u0: f64,
    pub ut: f64,
    pub alpha: f64,
    pub nodes: Vec<f64>,
}

impl Default for Interval {
    fn default() -> Self {
        Interval { length: 1.0, u0: 0.0, ut: 1.0, alpha: 1.0, nodes: vec![0.2, 0.5, 0.8] }
    }
}

impl Interval {
    fn config(&self) -> Result<DeepRitzConfig> {
        Ok(DeepRitzConfig::interval(self.length, self.u0, self.ut, self.alpha, &self.nodes)?)
    }

    fn exact_solution(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x: &[f64]| self.u0 + (self.ut - self.u0) * x[0] / self.length
    }
}

const L2_RESOLUTION: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffineConfig {
    pub seed: u64,
    pub problem: Interval,
    /// Extra instances with random `(T, u0, uT, α_B)`.
    pub random_draws: usize,
    pub alpha_sweep: Vec<f64>,
}

impl Default for AffineConfig {
    fn default() -> Self {
        AffineConfig {
            seed: 1,
            problem: Interval::default(),
            random_draws: 4,
            alpha_sweep: vec![0.0, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineInstance {
    pub problem: Interval,
    pub slope: f64,
    pub intercept: f64,
    pub oracle: (f64, f64),
    pub oracle_error: f64,
    pub gradient_norm: f64,
    pub loss: f64,
}

/// Solves the 2×2 normal equations of `½a² + α[(c − u0)² + (aT + c − uT)²]` by Cramer's rule.
fn normal_equations(p: &Interval) -> (f64, f64) {
    let (t, a) = (p.length, p.alpha);
    let (m11, m12, m22) = (1.0 + 2.0 * a * t * t, 2.0 * a * t, 4.0 * a);
    let (r1, r2) = (2.0 * a * t * p.ut, 2.0 * a * (p.u0 + p.ut));
    let det = m11 * m22 - m12 * m12;
    if det == 0.0 {
        // α = 0: any intercept, slope 0; the closed form picks the mean of the targets.
        return (0.0, 0.5 * (p.u0 + p.ut));
    }
    ((r1 * m22 - m12 * r2) / det, (m11 * r2 - m12 * r1) / det)
}

fn affine_loss(p: &Interval, integrand: &LocalIntegrand, slope: f64, intercept: f64) -> Result<f64> {
    let net = MlpNetwork::affine(Activation::Identity, vec![slope], intercept);
    Ok(dr_loss(&net, integrand, &p.config()?)?)
}

fn affine_instance(p: &Interval) -> Result<AffineInstance> {
    let (slope, intercept) = affine_minimizer_1d(p.length, p.u0, p.ut, p.alpha)?;
    let oracle = normal_equations(p);
    let integrand = LocalIntegrand::poisson(vec![0.0; p.nodes.len()]);
    // Central differences are exact on a quadratic up to rounding of order ε·L/h.
    let h = 1e-3;
    let ds = (affine_loss(p, &integrand, slope + h, intercept)? - affine_loss(p, &integrand, slope - h, intercept)?) / (2.0 * h);
    let dc = (affine_loss(p, &integrand, slope, intercept + h)? - affine_loss(p, &integrand, slope, intercept - h)?) / (2.0 * h);
    Ok(AffineInstance {
        problem: p.clone(),
        slope,
        intercept,
        oracle,
        oracle_error: (slope - oracle.0).abs().max((intercept - oracle.1).abs()),
        gradient_norm: ds.hypot(dc),
        loss: affine_loss(p, &integrand, slope, intercept)?,
    })
}

#[derive(Serialize)]
struct AffineResults {
    instances: Vec<AffineInstance>,
    exact_slope: f64,
    exact_intercept: f64,
    l2_to_solution: f64,
    alpha_sweep: Vec<(f64, f64, f64)>,
}

pub(crate) fn affine(cfg: &AffineConfig) -> Result<Outcome> {
    let mut problems = vec![cfg.problem.clone()];
    let mut r = rng(cfg.seed);
    for _ in 0..cfg.random_draws {
        let length = r.random_range(0.5..2.0);
        problems.push(Interval {
            length,
            u0: r.random_range(-1.0..1.0),
            ut: r.random_range(-1.0..1.0),
            alpha: r.random_range(0.1..10.0),
            nodes: cfg.problem.nodes.iter().map(|z| z / cfg.problem.length * length).collect(),
        });
    }
    let instances = problems.iter().map(affine_instance).collect::<Result<Vec<_>>>()?;

    let p = &cfg.problem;
    let main = &instances[0];
    let exact_slope = (p.ut - p.u0) / p.length;
    let affine_net = MlpNetwork::affine(Activation::Identity, vec![main.slope], main.intercept);
    let solution = FnField::new(1, p.exact_solution());
    let domain = BoxDomain::interval(0.0, p.length)?;
    let l2_to_solution = lp_distance(&affine_net, &solution, 2.0, &domain, L2_RESOLUTION)?;

    let mut checks = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        checks.push(Check::at_most(&format!("instance{i}/normal_equations"), inst.oracle_error, 1e-10));
        checks.push(Check::at_most(&format!("instance{i}/gradient_norm"), inst.gradient_norm, 1e-10));
    }
    if p.u0 != p.ut && p.alpha.is_finite() {
        checks.push(Check::at_least("not_a_solution/l2_distance", l2_to_solution, 1e-8));
    }

    let mut sweep_csv = String::from("alpha,slope,intercept,l2_to_solution\n");
    let mut alpha_sweep = Vec::new();
    for &alpha in &cfg.alpha_sweep {
        let (s, c) = affine_minimizer_1d(p.length, p.u0, p.ut, alpha)?;
        let net = MlpNetwork::affine(Activation::Identity, vec![s], c);
        let d = lp_distance(&net, &solution, 2.0, &domain, L2_RESOLUTION)?;
        let _ = writeln!(sweep_csv, "{alpha:e},{s:.16e},{c:.16e},{d:.16e}");
        alpha_sweep.push((alpha, s, c));
    }

    let mut summary = String::new();
    let _ = writeln!(summary, "T = {}, u0 = {}, uT = {}, alpha_B = {}, nodes {:?}", p.length, p.u0, p.ut, p.alpha, p.nodes);
    let _ = writeln!(summary, "affine minimizer: slope = {}, intercept = {}", main.slope, main.intercept);
    let _ = writeln!(summary, "normal-equation oracle: slope = {}, intercept = {}", main.oracle.0, main.oracle.1);
    let _ = writeln!(summary, "exact solution: slope = {exact_slope}, intercept = {}", p.u0);
    let _ = writeln!(summary, "L2 distance to the exact solution: {l2_to_solution:e}");
    let worst = instances.iter().map(|i| i.oracle_error).fold(0.0, f64::max);
    let _ = writeln!(summary, "largest oracle deviation over {} instances: {worst:e}", instances.len());

    Ok(Outcome {
        checks,
        results: value_of(&AffineResults {
            instances,
            exact_slope,
            exact_intercept: p.u0,
            l2_to_solution,
            alpha_sweep,
        }),
        sweep_csv,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroLossConfig {
    pub seed: u64,
    pub problem: Interval,
    pub b_values: Vec<f64>,
}

impl Default for ZeroLossConfig {
    fn default() -> Self {
        ZeroLossConfig { seed: 1, problem: Interval::default(), b_values: vec![-0.99, -0.95, -0.9, -0.85, -0.81] }
    }
}

#[derive(Serialize)]
struct ZeroLossMember {
    b: f64,
    loss: f64,
    l2_to_solution: f64,
    network: MlpNetwork,
}

pub(crate) fn zero_loss_family(cfg: &ZeroLossConfig) -> Result<Outcome> {
    let p = &cfg.problem;
    let config = p.config()?;
    let integrand = LocalIntegrand::poisson(vec![0.0; p.nodes.len()]);
    let z_max = p.nodes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let solution = FnField::new(1, p.exact_solution());
    let mut members = Vec::new();
    for &b in &cfg.b_values {
        let network = one_neuron_zero_loss(b, p.length, p.u0, p.ut, z_max)?;
        let loss = dr_loss(&network, &integrand, &config)?;
        let l2_to_solution = lp_distance(&network, &solution, 2.0, &config.domain, L2_RESOLUTION)?;
        members.push(ZeroLossMember { b, loss, l2_to_solution, network });
    }
    let mut checks: Vec<Check> =
        members.iter().map(|m| Check::at_most(&format!("zero_loss/b={}", m.b), m.loss.abs(), 1e-14)).collect();
    let mut separation = f64::INFINITY;
    for (i, a) in members.iter().enumerate() {
        for b in &members[..i] {
            separation = separation.min(lp_distance(&a.network, &b.network, 2.0, &config.domain, L2_RESOLUTION)?);
        }
    }
    if members.len() > 1 {
        checks.push(Check::at_least("distinct_members/min_l2_separation", separation, 1e-8));
    }
    let mut sweep_csv = String::from("b,loss,l2_to_solution\n");
    let mut summary = format!("one-neuron networks u(z) = (uT − u0)/(T + b)·σ(z + b) + u0 with b ∈ ({}, {})\n", -p.length, -z_max);
    for m in &members {
        let _ = writeln!(sweep_csv, "{:.16e},{:.16e},{:.16e}", m.b, m.loss, m.l2_to_solution);
        let _ = writeln!(summary, "b = {}: loss = {:e}, L2 distance to exact solution = {:.6}", m.b, m.loss, m.l2_to_solution);
    }
    Ok(Outcome { checks, results: value_of(&members), sweep_csv, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonCoerciveConfig {
    pub seed: u64,
    pub problem: Interval,
    /// Source samples at the nodes.
    pub zeta: Vec<f64>,
    pub ks: Vec<f64>,
}

impl Default for NonCoerciveConfig {
    fn default() -> Self {
        NonCoerciveConfig { seed: 1, problem: Interval::default(), zeta: vec![1.0, -0.5, 2.0], ks: vec![1.0, 10.0, 100.0, 1000.0] }
    }
}

#[derive(Serialize)]
struct NonCoerciveRow {
    k: f64,
    loss: f64,
    bound: f64,
    affine_prediction: f64,
}

pub(crate) fn noncoercive(cfg: &NonCoerciveConfig) -> Result<Outcome> {
    let config = cfg.problem.config()?;
    let integrand = LocalIntegrand::poisson(cfg.zeta.clone());
    // Zero gradient on every plateau and exact boundary values leave only the source term.
    let slope: f64 = -config.interior_weights.iter().zip(&cfg.zeta).map(|(w, z)| w * z.abs()).sum::<f64>();
    let mut rows = Vec::new();
    let mut rate = 0.0;
    for &k in &cfg.ks {
        let step = non_coercive_sequence(k, &integrand, &config)?;
        rate = step.rate;
        rows.push(NonCoerciveRow { k, loss: step.loss, bound: -0.9 * step.rate * k, affine_prediction: slope * k });
    }
    let mut checks = Vec::new();
    for r in &rows {
        checks.push(Check::at_most(&format!("unbounded_below/k={}", r.k), r.loss - r.bound, 0.0));
        checks.push(Check::at_most(
            &format!("affine_in_k/k={}", r.k),
            (r.loss - r.affine_prediction).abs(),
            1e-12 * (1.0 + r.loss.abs()),
        ));
    }
    let mut sweep_csv = String::from("k,loss,bound\n");
    let mut summary = format!("plateau networks of height k·sign(ζ) at the nodes; c = ω|ζ(z0)| = {rate}\n");
    for r in &rows {
        let _ = writeln!(sweep_csv, "{:e},{:.16e},{:.16e}", r.k, r.loss, r.bound);
        let _ = writeln!(summary, "k = {}: loss = {:.6e} ≤ −0.9·c·k = {:.6e}", r.k, r.loss, r.bound);
    }
    let _ = writeln!(summary, "loss decreases linearly with slope {slope}: the discrete energy is unbounded below");
    Ok(Outcome { checks, results: value_of(&rows), sweep_csv, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonUniquenessConfig {
    pub seed: u64,
    pub problem: Interval,
    /// Offset of the one-neuron zero-loss base network.
    pub base_b: f64,
    pub witness: f64,
    pub lambdas: Vec<f64>,
    pub relu_depth: usize,
    pub smooth_activation: Activation,
    pub smooth_depth: usize,
    pub resolution: usize,
    /// Required ratio `d(λ_max)/d(1)` of distances to the exact solution.
    pub escape_ratio: f64,
}

impl Default for NonUniquenessConfig {
    fn default() -> Self {
        NonUniquenessConfig {
            seed: 1,
            problem: Interval::default(),
            base_b: -0.81,
            witness: 0.35,
            lambdas: vec![-100.0, -10.0, -1.0, 1.0, 10.0, 100.0],
            relu_depth: 3,
            smooth_activation: Activation::Tanh,
            smooth_depth: 2,
            resolution: 4096,
            escape_ratio: 50.0,
        }
    }
}

#[derive(Serialize)]
struct NonUniquenessCase {
    label: String,
    escape_ratio: Option<f64>,
    certificate: forge_core::measurement::DegeneracyCertificate,
}

pub(crate) fn nonuniqueness(cfg: &NonUniquenessConfig) -> Result<Outcome> {
    let p = &cfg.problem;
    let z_max = p.nodes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let one_neuron = one_neuron_zero_loss(cfg.base_b, p.length, p.u0, p.ut, z_max)?;
    let domain = BoxDomain::interval(0.0, p.length)?;
    let integrand = LocalIntegrand::poisson(vec![0.0; p.nodes.len()]);
    let solution = FnField::new(1, p.exact_solution());
    let forges = [
        ("relu", Forge::new(Family::Relu, cfg.relu_depth).with_seed(cfg.seed)),
        (
            cfg.smooth_activation.name(),
            Forge::new(Family::Smooth { activation: cfg.smooth_activation }, cfg.smooth_depth).with_seed(cfg.seed),
        ),
    ];
    let l_max = cfg.lambdas.iter().cloned().fold(0.0f64, |m, l| m.max(l.abs()));
    let bases = [
        one_neuron.extend_depth_identity(cfg.relu_depth, Some(&domain))?,
        smooth_zero_loss(p, cfg.smooth_activation, cfg.smooth_depth, cfg.seed)?,
    ];
    let mut cases = Vec::new();
    let mut checks = Vec::new();
    for enforcement in [Enforcement::Penalty, Enforcement::HardAtPoints] {
        let config = p.config()?.with_enforcement(enforcement);
        for ((name, forge), base) in forges.iter().zip(&bases) {
            let request = DrCertificateRequest {
                forge: *forge,
                witness: vec![cfg.witness],
                lambdas: cfg.lambdas.clone(),
                reference: Some(&solution),
                resolution: cfg.resolution,
            };
            let certificate = certify_dr_nonuniqueness(&config, &integrand, base, &request)?;
            let label = format!("{name}/{}", if enforcement == Enforcement::Penalty { "penalty" } else { "hard" });
            let escape_ratio = certificate.lp_distances.as_ref().and_then(|c| {
                let near = c.distance_at(1.0)?;
                let far = c.distance_at(l_max)?;
                Some(far / near)
            });
            checks.extend(scoped(&label, certificate.checks.clone()));
            checks.push(Check::at_least(&format!("{label}/escape_ratio"), escape_ratio.unwrap_or(f64::NAN), cfg.escape_ratio));
            cases.push(NonUniquenessCase { label, escape_ratio, certificate });
        }
    }
    let mut sweep_csv = String::from("case,lambda,loss,distance\n");
    let mut summary = format!(
        "bases: one-neuron ReLU network (b = {}) with loss {:e}; {} Hermite network with loss {:e}; witness z0 = {}\n",
        cfg.base_b,
        cases[0].certificate.base_loss,
        cfg.smooth_activation,
        cases[1].certificate.base_loss,
        cfg.witness
    );
    for c in &cases {
        let cert = &c.certificate;
        for (i, (l, v)) in cert.lambda_samples.iter().zip(&cert.loss_values).enumerate() {
            let d = cert.lp_distances.as_ref().map_or(f64::NAN, |e| e.pairs[i].1);
            let _ = writeln!(sweep_csv, "{},{l:e},{v:.16e},{d:.16e}", c.label);
        }
        let _ = writeln!(
            summary,
            "{}: null residual {:.3e}, Φ(z0) = {}, loss spread {:.3e}, L2 distance ratio λ={l_max}/λ=1: {:.2}",
            c.label,
            cert.null_residual,
            cert.witness_value.unwrap_or(f64::NAN),
            cert.loss_spread,
            c.escape_ratio.unwrap_or(f64::NAN)
        );
    }
    let _ = writeln!(summary, "every u + λΦ is a minimizer, and minimizers drift arbitrarily far from the exact solution");
    Ok(Outcome { checks, results: value_of(&cases), sweep_csv, summary })
}

/// Smooth zero-loss network: boundary targets at `0` and `T`, exact-solution values with zero slope at the nodes.
fn smooth_zero_loss(p: &Interval, activation: Activation, depth: usize, seed: u64) -> Result<MlpNetwork> {
    let exact = p.exact_solution();
    let mut table = vec![HermiteNode { point: vec![0.0], value: p.u0, order: 0 }];
    table.extend(p.nodes.iter().map(|&z| HermiteNode { point: vec![z], value: exact(&[z]), order: 1 }));
    table.push(HermiteNode { point: vec![p.length], value: p.ut, order: 0 });
    Ok(smooth_hermite_interpolant(&table, activation, depth, seed)?.network)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollocationConfig {
    pub seed: u64,
    pub problem: Interval,
    pub zeta: Vec<f64>,
    pub mu: f64,
    pub trials: usize,
    pub width: usize,
    pub activation: Activation,
    pub budget: DescentBudget,
}

impl Default for CollocationConfig {
    /// Constant data `ζ = μ·c`, `u0 = uT = c`: the measurement optimum (value c, slope 0) is attained.
    fn default() -> Self {
        CollocationConfig {
            seed: 1,
            problem: Interval { u0: 0.5, ut: 0.5, ..Interval::default() },
            zeta: vec![0.5; 3],
            mu: 1.0,
            trials: 5,
            width: 8,
            activation: Activation::Tanh,
            budget: DescentBudget::default(),
        }
    }
}

pub(crate) fn collocation(cfg: &CollocationConfig) -> Result<Outcome> {
    let config = cfg.problem.config()?;
    let integrand = LocalIntegrand::strictly_convex(cfg.zeta.clone(), cfg.mu);
    let arch = TrialArchitecture { width: cfg.width, activation: cfg.activation, seed: cfg.seed };
    let report = collocation_agreement_check(&integrand, &config, cfg.trials, &arch, &cfg.budget)?;
    let mut checks = vec![
        flag("hypotheses_hold", report.applicable),
        Check::at_most("measurement_agreement", report.max_deviation, AGREEMENT_TOLERANCE),
    ];
    if let Some(d) = report.deviation_from_optimum {
        checks.push(Check::at_most("deviation_from_measurement_optimum", d, AGREEMENT_TOLERANCE));
    }
    let mut sweep_csv = String::from("seed,loss,iterations,converged,qualifying\n");
    for (i, t) in report.trials.iter().enumerate() {
        let _ = writeln!(sweep_csv, "{},{:.16e},{},{},{}", t.seed, t.loss, t.iterations, t.converged, report.qualifying.contains(&i));
    }
    let mut summary = String::new();
    let _ = writeln!(summary, "{} trials, width {}, {}; best loss {:.12e}", cfg.trials, cfg.width, cfg.activation, report.best_loss);
    let _ = writeln!(summary, "max pairwise measurement deviation among qualifying runs: {:e}", report.max_deviation);
    if report.qualifying.len() < 2 {
        let _ = writeln!(summary, "only {} run(s) qualify, so the pairwise agreement is vacuous", report.qualifying.len());
    }
    if let Some(d) = report.deviation_from_optimum {
        let _ = writeln!(summary, "deviation from the measurement-space optimum: {d:e}");
    }
    let _ = writeln!(summary, "{}", report.note);
    Ok(Outcome { checks, results: value_of(&report), sweep_csv, summary })
}

seeded!(AffineConfig, ZeroLossConfig, NonCoerciveConfig, NonUniquenessConfig, CollocationConfig);
