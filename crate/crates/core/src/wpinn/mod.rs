//! Weak formulations against a P1 test space on an interval.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field::{ScalarField, Zero};
use crate::jet::jet_forward;
use crate::linalg::smallest_right_singular_vector;
use crate::measurement::lp_distance;
use crate::network::{MlpNetwork, DEFAULT_KINK_TOLERANCE};
use crate::quadrature::gauss_legendre;
use crate::train::{gradient_descent, DescentBudget, Shallow};

pub const DEFAULT_QUADRATURE: usize = 8;
/// Smallest quadrature order whose kernel residual is certified.
pub const CERTIFIED_QUADRATURE_FLOOR: usize = 4;
pub const INDEPENDENCE_FLOOR: f64 = 1e-8;
pub const KERNEL_RELATIVE_TOLERANCE: f64 = 1e-10;
pub const NONTRIVIAL_L2: f64 = 1e-4;
pub const MAX_KERNEL_ATTEMPTS: usize = 3;
pub const FIT_TARGET: f64 = 1e-6;
/// Midpoint cells used for L² norms on the interval.
pub const L2_RESOLUTION: usize = 4096;

/// P1 hats on the interior nodes of a partition of `[0, T]`, integrated with `q` Gauss points per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpace {
    pub mesh: Vec<f64>,
    pub quadrature: usize,
}

impl TestSpace {
    /// Uniform partition with `n` interior nodes.
    pub fn uniform(t: f64, n: usize, quadrature: usize) -> Result<Self> {
        let h = t / (n + 1) as f64;
        let mut mesh: Vec<f64> = (0..=n + 1).map(|i| i as f64 * h).collect();
        mesh[n + 1] = t;
        Self::new(mesh, quadrature)
    }

    pub fn new(mesh: Vec<f64>, quadrature: usize) -> Result<Self> {
        if mesh.len() < 2 || mesh[0] != 0.0 || mesh.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("mesh must increase strictly from 0".into()));
        }
        if quadrature == 0 {
            return Err(Error::Precondition("quadrature needs at least one point".into()));
        }
        Ok(TestSpace { mesh, quadrature })
    }

    pub fn with_quadrature(&self, q: usize) -> Result<Self> {
        Self::new(self.mesh.clone(), q)
    }

    pub fn length(&self) -> f64 {
        *self.mesh.last().unwrap()
    }

    /// Number of hats.
    pub fn dim(&self) -> usize {
        self.mesh.len() - 2
    }

    pub fn domain(&self) -> BoxDomain {
        BoxDomain::interval(0.0, self.length()).expect("positive length")
    }

    /// `(element, x, weight)` for every quadrature point.
    pub fn points(&self) -> Vec<(usize, f64, f64)> {
        let (xs, ws) = gauss_legendre(self.quadrature);
        let mut out = Vec::with_capacity((self.mesh.len() - 1) * self.quadrature);
        for (e, w) in self.mesh.windows(2).enumerate() {
            let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for (x, wt) in xs.iter().zip(&ws) {
                out.push((e, mid + half * x, half * wt));
            }
        }
        out
    }

    /// Value and slope of hat `i` (0-based, centred at `mesh[i + 1]`) on element `e`.
    pub fn hat(&self, i: usize, e: usize, x: f64) -> (f64, f64) {
        let (l, c, r) = (self.mesh[i], self.mesh[i + 1], self.mesh[i + 2]);
        if e == i {
            ((x - l) / (c - l), 1.0 / (c - l))
        } else if e == i + 1 {
            ((r - x) / (r - c), -1.0 / (r - c))
        } else {
            (0.0, 0.0)
        }
    }

    /// Hats that are nonzero on element `e`.
    fn hats_on(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        [e.checked_sub(1), Some(e)].into_iter().flatten().filter(move |&i| i < self.dim())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Zero,
    Constant { value: f64 },
    /// `Σ_k c_k z^k`
    Polynomial { coefficients: Vec<f64> },
    /// `a sin(ω z)`
    Sine { amplitude: f64, frequency: f64 },
}

impl Source {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Source::Zero => 0.0,
            Source::Constant { value } => *value,
            Source::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * z + c),
            Source::Sine { amplitude, frequency } => amplitude * (frequency * z).sin(),
        }
    }
}

/// `a(u, v) = ∫ u′v′` and `F(v) = ∫ f v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakForm {
    pub source: Source,
}

impl WeakForm {
    pub fn poisson(source: Source) -> Self {
        WeakForm { source }
    }

    /// `(a(u, φ_1), …, a(u, φ_n))`
    pub fn apply(&self, u: &dyn Trial, space: &TestSpace) -> Result<Vec<f64>> {
        let mut out = vec![0.0; space.dim()];
        for (e, x, w) in space.points() {
            let (_, du) = u.value_slope(x)?;
            for i in space.hats_on(e) {
                out[i] += w * du * space.hat(i, e, x).1;
            }
        }
        Ok(out)
    }

    /// `(F(φ_1), …, F(φ_n))`
    pub fn load(&self, space: &TestSpace) -> Vec<f64> {
        let mut out = vec![0.0; space.dim()];
        for (e, x, w) in space.points() {
            let f = self.source.eval(x);
            for i in space.hats_on(e) {
                out[i] += w * f * space.hat(i, e, x).0;
            }
        }
        out
    }
}

/// A trial function on the interval with value and slope.
pub trait Trial {
    fn value_slope(&self, z: f64) -> Result<(f64, f64)>;
}

impl Trial for MlpNetwork {
    fn value_slope(&self, z: f64) -> Result<(f64, f64)> {
        let j = jet_forward(self, &[z], 1, DEFAULT_KINK_TOLERANCE)?;
        Ok((j.value(), j.gradient()[0]))
    }
}

/// `u(z) = u0 + (uT − u0) z/T + z(T − z)·net(z)`, meeting both boundary values for every network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedTrial {
    pub network: MlpNetwork,
    pub length: f64,
    pub u0: f64,
    pub ut: f64,
}

impl Trial for LiftedTrial {
    fn value_slope(&self, z: f64) -> Result<(f64, f64)> {
        let (n, dn) = self.network.value_slope(z)?;
        let t = self.length;
        let slope = (self.ut - self.u0) / t;
        Ok((self.u0 + slope * z + z * (t - z) * n, slope + (t - 2.0 * z) * n + z * (t - z) * dn))
    }
}

impl ScalarField for LiftedTrial {
    fn input_dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_slope(x[0])?.0)
    }
}

/// `base + λΦ` evaluated pointwise.
pub struct Perturbed<'a> {
    pub base: &'a dyn Trial,
    pub phi: &'a MlpNetwork,
    pub lambda: f64,
}

impl Trial for Perturbed<'_> {
    fn value_slope(&self, z: f64) -> Result<(f64, f64)> {
        let (u, du) = self.base.value_slope(z)?;
        let (p, dp) = self.phi.value_slope(z)?;
        Ok((u + self.lambda * p, du + self.lambda * dp))
    }
}

impl ScalarField for Perturbed<'_> {
    fn input_dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_slope(x[0])?.0)
    }
}

/// `n × k` matrix with column `j` equal to `(a(u_j, φ_i))_i`.
pub fn assemble_t(trials: &[&dyn Trial], space: &TestSpace, form: &WeakForm) -> Result<DMatrix<f64>> {
    let mut t = DMatrix::zeros(space.dim(), trials.len());
    for (j, u) in trials.iter().enumerate() {
        for (i, v) in form.apply(*u, space)?.into_iter().enumerate() {
            t[(i, j)] = v;
        }
    }
    Ok(t)
}

/// `a(u, φ_i) − F(φ_i)` for every hat.
pub fn weak_residual(u: &dyn Trial, space: &TestSpace, form: &WeakForm) -> Result<Vec<f64>> {
    Ok(form.apply(u, space)?.into_iter().zip(form.load(space)).map(|(a, f)| a - f).collect())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// CSV dump of a matrix, one row per line.
pub fn matrix_csv(t: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..t.nrows() {
        let row: Vec<String> = (0..t.ncols()).map(|j| format!("{:.16e}", t[(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Depth-2 networks of the given width with seeded standard-normal parameters.
pub fn sample_trial_nets(count: usize, width: usize, activation: Activation, seed: u64) -> Vec<MlpNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.sample(StandardNormal)).collect() };
            let (w1, b1, w2, b2) = (draw(width), draw(width), draw(width), draw(1));
            MlpNetwork::new(activation, vec![1, width, 1], vec![w1, w2], vec![b1, b2]).expect("consistent shapes")
        })
        .collect()
}

/// Smallest singular value of the column-normalised value matrix of `nets` on `4k` seeded points.
pub fn independence_margin(nets: &[MlpNetwork], space: &TestSpace, seed: u64) -> Result<f64> {
    let k = nets.len();
    let rows = 4 * k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let t = space.length();
    let points: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..t)).collect();
    let mut v = DMatrix::zeros(rows, k);
    for (j, net) in nets.iter().enumerate() {
        for (i, &z) in points.iter().enumerate() {
            v[(i, j)] = net.forward(&[z])?;
        }
        let norm = v.column(j).norm();
        if norm > 0.0 {
            v.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    Ok(v.singular_values().iter().cloned().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelElement {
    pub phi: MlpNetwork,
    pub coefficients: Vec<f64>,
    /// `max_i |a(Φ, φ_i)|`
    pub residual: f64,
    /// Largest singular value of `T`.
    pub t_norm: f64,
    pub singular_values: Vec<f64>,
    pub phi_l2: f64,
    pub independence: f64,
    pub t_matrix: Vec<Vec<f64>>,
}

impl KernelElement {
    pub fn residual_ok(&self) -> bool {
        self.residual <= KERNEL_RELATIVE_TOLERANCE * self.t_norm.max(f64::MIN_POSITIVE)
    }

    pub fn nontrivial(&self) -> bool {
        self.phi_l2 >= NONTRIVIAL_L2
    }
}

/// Null vector of `T` for `n + 1` independent networks, combined into `Φ` with `a(Φ, φ_i) = 0`.
pub fn homogeneous_kernel(nets: &[MlpNetwork], space: &TestSpace, form: &WeakForm, seed: u64) -> Result<KernelElement> {
    if nets.is_empty() {
        return Err(Error::Precondition("no trial networks".into()));
    }
    let independence = independence_margin(nets, space, seed)?;
    if !(independence > INDEPENDENCE_FLOOR) {
        return Err(Error::DependentTrials { sigma_min: independence });
    }
    let trials: Vec<&dyn Trial> = nets.iter().map(|n| n as &dyn Trial).collect();
    let t = assemble_t(&trials, space, form)?;
    let (coefficients, singular_values): (Vec<f64>, Vec<f64>) = if space.dim() == 0 {
        let mut c = vec![0.0; nets.len()];
        c[0] = 1.0;
        (c, Vec::new())
    } else {
        let (v, s) = smallest_right_singular_vector(&t);
        (v.iter().copied().collect(), s)
    };
    let t_norm = singular_values.iter().cloned().fold(0.0, f64::max);
    let refs: Vec<&MlpNetwork> = nets.iter().collect();
    let phi = MlpNetwork::linear_combine(&refs, &coefficients)?;
    let residual = max_abs(&form.apply(&phi, space)?);
    let phi_l2 = lp_distance(&phi, &Zero(1), 2.0, &space.domain(), L2_RESOLUTION)?;
    let t_matrix = (0..t.nrows()).map(|i| t.row(i).iter().copied().collect()).collect();
    Ok(KernelElement { phi, coefficients, residual, t_norm, singular_values, phi_l2, independence, t_matrix })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSearch {
    pub element: KernelElement,
    pub attempts: usize,
    pub seed: u64,
    pub nets: Vec<MlpNetwork>,
}

/// Sample `n + 1` networks and extract a kernel element, resampling up to three times.
pub fn sample_kernel(
    space: &TestSpace,
    form: &WeakForm,
    width: usize,
    activation: Activation,
    seed: u64,
) -> Result<KernelSearch> {
    let mut diagnostics = Vec::new();
    for attempt in 0..MAX_KERNEL_ATTEMPTS {
        let s = seed.wrapping_add(attempt as u64);
        let nets = sample_trial_nets(space.dim() + 1, width, activation, s);
        match homogeneous_kernel(&nets, space, form, s) {
            Ok(element) if element.nontrivial() && element.residual_ok() => {
                return Ok(KernelSearch { element, attempts: attempt + 1, seed: s, nets });
            }
            Ok(element) => diagnostics.push(format!(
                "seed {s}: ‖Φ‖ = {:e}, residual {:e} vs ‖T‖ {:e}",
                element.phi_l2, element.residual, element.t_norm
            )),
            Err(e) => diagnostics.push(format!("seed {s}: {e}")),
        }
    }
    Err(Error::Kernel(diagnostics.join("; ")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCertificate {
    pub lambdas: Vec<f64>,
    pub residuals: Vec<f64>,
    pub bounds: Vec<f64>,
    pub base_residual: f64,
    pub kernel_residual: f64,
    pub phi_l2: f64,
    /// `‖(u* + λΦ) − u*‖_{L²}` per λ.
    pub distances: Vec<f64>,
    pub passed: bool,
}

impl FamilyCertificate {
    pub fn sweep_csv(&self) -> String {
        let mut s = String::from("lambda,residual,bound,distance\n");
        for i in 0..self.lambdas.len() {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.lambdas[i], self.residuals[i], self.bounds[i], self.distances[i]
            ));
        }
        s
    }
}

/// Residuals of `u* + λΦ`; the bound is `res(u*) + |λ| res(Φ)` plus a rounding allowance.
pub fn solution_family<U: Trial + ScalarField>(
    u_star: &U,
    phi: &MlpNetwork,
    lambdas: &[f64],
    space: &TestSpace,
    form: &WeakForm,
) -> Result<FamilyCertificate> {
    let base_residual = max_abs(&weak_residual(u_star, space, form)?);
    let kernel_residual = max_abs(&WeakForm { source: Source::Zero }.apply(phi, space)?);
    let phi_l2 = lp_distance(phi, &Zero(1), 2.0, &space.domain(), L2_RESOLUTION)?;
    let scale = max_abs(&form.load(space)).max(1.0);
    let (mut residuals, mut bounds, mut distances) = (Vec::new(), Vec::new(), Vec::new());
    for &l in lambdas {
        let u = Perturbed { base: u_star, phi, lambda: l };
        residuals.push(max_abs(&weak_residual(&u, space, form)?));
        bounds.push(base_residual + l.abs() * kernel_residual + 1e-13 * (1.0 + l.abs()) * scale);
        distances.push(lp_distance(&u, u_star, 2.0, &space.domain(), L2_RESOLUTION)?);
    }
    let passed = residuals.iter().zip(&bounds).all(|(r, b)| r <= b);
    Ok(FamilyCertificate {
        lambdas: lambdas.to_vec(),
        residuals,
        bounds,
        base_residual,
        kernel_residual,
        phi_l2,
        distances,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitArchitecture {
    pub width: usize,
    pub activation: Activation,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub trial: LiftedTrial,
    pub residual: f64,
    pub iterations: usize,
    pub reached_target: bool,
}

/// Precomputed quadrature data for the lifted trial `u = ℓ + z(T − z)N`.
struct FitProblem<'a> {
    space: &'a TestSpace,
    shallow: Shallow,
    points: Vec<(usize, f64, f64)>,
    load: Vec<f64>,
    affine_slope: f64,
}

impl FitProblem<'_> {
    fn residual(&self, p: &[f64]) -> Vec<f64> {
        let t = self.space.length();
        let mut r: Vec<f64> = self.load.iter().map(|f| -f).collect();
        for &(e, x, w) in &self.points {
            let (n, g) = self.shallow.eval(p, &[x]);
            let du = self.affine_slope + (t - 2.0 * x) * n + x * (t - x) * g[0];
            for i in self.space.hats_on(e) {
                r[i] += w * du * self.space.hat(i, e, x).1;
            }
        }
        r
    }

    fn loss_grad(&self, p: &[f64], grad: &mut [f64]) -> f64 {
        let r = self.residual(p);
        let t = self.space.length();
        for &(e, x, w) in &self.points {
            let c: f64 = self.space.hats_on(e).map(|i| 2.0 * r[i] * w * self.space.hat(i, e, x).1).sum();
            if c != 0.0 {
                self.shallow.backprop(p, &[x], c * (t - 2.0 * x), &[c * x * (t - x)], grad);
            }
        }
        r.iter().map(|v| v * v).sum()
    }

    /// `∂r/∂p` as a dense `n × P` matrix.
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let t = self.space.length();
        let mut jac = DMatrix::zeros(self.space.dim(), p.len());
        let mut row = vec![0.0; p.len()];
        for i in 0..self.space.dim() {
            row.iter_mut().for_each(|v| *v = 0.0);
            for &(e, x, w) in &self.points {
                if e == i || e == i + 1 {
                    let c = w * self.space.hat(i, e, x).1;
                    self.shallow.backprop(p, &[x], c * (t - 2.0 * x), &[c * x * (t - x)], &mut row);
                }
            }
            for (j, v) in row.iter().enumerate() {
                jac[(i, j)] = *v;
            }
        }
        jac
    }

    /// Least-squares solve for the output layer, in which the residual is affine.
    fn polish(&self, p: &mut [f64]) {
        let width = self.shallow.width;
        let start = width * 2;
        let jac = self.jacobian(p).columns(start, width + 1).into_owned();
        let r = nalgebra::DVector::from_vec(self.residual(p));
        if let Ok(delta) = jac.svd(true, true).solve(&r, 1e-14) {
            for (k, d) in delta.iter().enumerate() {
                p[start + k] -= d;
            }
        }
    }
}

/// Gradient descent on `‖weak_residual‖²` over the lifted trial class, followed by an exact
/// least-squares solve for the output layer. A zero iteration budget returns the initialisation.
pub fn wpinn_fit(
    space: &TestSpace,
    form: &WeakForm,
    boundary: (f64, f64),
    architecture: &FitArchitecture,
    budget: &DescentBudget,
) -> Result<FitOutcome> {
    let t = space.length();
    let shallow = Shallow { dim: 1, width: architecture.width, activation: architecture.activation };
    let problem = FitProblem {
        space,
        shallow,
        points: space.points(),
        load: form.load(space),
        affine_slope: (boundary.1 - boundary.0) / t,
    };
    let init = shallow.random(architecture.seed);
    let (mut params, iterations) = if budget.max_iterations == 0 {
        (init, 0)
    } else {
        let sigma = problem.jacobian(&init).singular_values().iter().cloned().fold(0.0, f64::max);
        let step = if sigma > 0.0 { 0.5 / (sigma * sigma) } else { budget.step };
        let tuned = DescentBudget { step, ..*budget };
        let out = gradient_descent(init, &tuned, |p, g| problem.loss_grad(p, g));
        let mut p = out.params;
        problem.polish(&mut p);
        (p, out.iterations)
    };
    let mut residual = max_abs(&problem.residual(&params));
    if budget.max_iterations > 0 {
        // A second polish pass removes the rounding left by the first.
        let mut again = params.clone();
        problem.polish(&mut again);
        let r2 = max_abs(&problem.residual(&again));
        if r2 < residual {
            params = again;
            residual = r2;
        }
    }
    let trial = LiftedTrial { network: shallow.to_network(&params), length: t, u0: boundary.0, ut: boundary.1 };
    Ok(FitOutcome { trial, residual, iterations, reached_target: residual <= FIT_TARGET })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRow {
    pub q: usize,
    pub values: Vec<f64>,
    pub kernel_residual: f64,
    pub below_floor: bool,
    pub max_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureReport {
    pub rows: Vec<QuadratureRow>,
    /// Largest kernel residual among orders at or above the certified floor.
    pub certified_kernel_residual: f64,
}

/// `a(u, φ_i)` and the kernel residual of a fixed `Φ` across quadrature orders.
/// `max_change` is measured against the highest order in `q_list`.
pub fn quadrature_sensitivity(
    u: &dyn Trial,
    phi: &MlpNetwork,
    space: &TestSpace,
    q_list: &[usize],
) -> Result<QuadratureReport> {
    let form = WeakForm { source: Source::Zero };
    let q_ref = q_list.iter().copied().max().unwrap_or(space.quadrature);
    let reference = form.apply(u, &space.with_quadrature(q_ref)?)?;
    let mut rows = Vec::new();
    for &q in q_list {
        let s = space.with_quadrature(q)?;
        let values = form.apply(u, &s)?;
        let kernel_residual = max_abs(&form.apply(phi, &s)?);
        let max_change = values.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        rows.push(QuadratureRow { q, values, kernel_residual, below_floor: q < CERTIFIED_QUADRATURE_FLOOR, max_change });
    }
    let certified_kernel_residual =
        rows.iter().filter(|r| !r.below_floor).map(|r| r.kernel_residual).fold(0.0, f64::max);
    Ok(QuadratureReport { rows, certified_kernel_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hats_form_a_partition_of_unity() {
        let s = TestSpace::uniform(1.0, 3, 4).unwrap();
        for (e, x, _) in s.points() {
            if e == 0 || e == 3 {
                continue;
            }
            let total: f64 = s.hats_on(e).map(|i| s.hat(i, e, x).0).sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_is_weakly_harmonic() {
        let s = TestSpace::uniform(1.0, 4, 8).unwrap();
        let u = MlpNetwork::affine(Activation::Tanh, vec![1.0], 0.0);
        let r = weak_residual(&u, &s, &WeakForm::poisson(Source::Zero)).unwrap();
        assert!(max_abs(&r) <= 1e-12);
    }

    #[test]
    fn unit_source_against_zero() {
        let s = TestSpace::uniform(2.0, 3, 8).unwrap();
        let r = weak_residual(&Zero1, &s, &WeakForm::poisson(Source::Constant { value: 1.0 })).unwrap();
        for v in r {
            assert!((v + 0.5).abs() < 1e-15);
        }
    }

    struct Zero1;
    impl Trial for Zero1 {
        fn value_slope(&self, _: f64) -> Result<(f64, f64)> {
            Ok((0.0, 0.0))
        }
    }

    #[test]
    fn t_has_expected_shape_and_constant_columns_vanish() {
        let s = TestSpace::uniform(1.0, 2, 8).unwrap();
        let nets = sample_trial_nets(2, 4, Activation::Tanh, 3);
        let c = MlpNetwork::constant(Activation::Tanh, &[4], 1, 5.0);
        let trials: Vec<&dyn Trial> = vec![&nets[0], &c, &nets[1]];
        let t = assemble_t(&trials, &s, &WeakForm::poisson(Source::Zero)).unwrap();
        assert_eq!(t.shape(), (2, 3));
        assert_eq!(t.column(1).amax(), 0.0);
    }

    #[test]
    fn assembly_is_bilinear() {
        let s = TestSpace::uniform(1.0, 4, 8).unwrap();
        let nets = sample_trial_nets(3, 8, Activation::Tanh, 11);
        let refs: Vec<&MlpNetwork> = nets.iter().collect();
        let coeffs = [0.3, -1.7, 2.2];
        let combo = MlpNetwork::linear_combine(&refs, &coeffs).unwrap();
        let form = WeakForm::poisson(Source::Zero);
        let lhs = form.apply(&combo, &s).unwrap();
        let trials: Vec<&dyn Trial> = nets.iter().map(|n| n as &dyn Trial).collect();
        let t = assemble_t(&trials, &s, &form).unwrap();
        let rhs = &t * nalgebra::DVector::from_column_slice(&coeffs);
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn kernel_for_several_sizes() {
        for n in [2, 4, 8] {
            let s = TestSpace::uniform(1.0, n, DEFAULT_QUADRATURE).unwrap();
            let k = sample_kernel(&s, &WeakForm::poisson(Source::Zero), 8, Activation::Tanh, 7).unwrap();
            assert!(k.element.residual_ok(), "n={n}: {:e} vs {:e}", k.element.residual, k.element.t_norm);
            assert!(k.element.nontrivial());
        }
    }

    #[test]
    fn empty_test_space_accepts_any_single_net() {
        let s = TestSpace::uniform(1.0, 0, 8).unwrap();
        let nets = sample_trial_nets(1, 4, Activation::Tanh, 1);
        let k = homogeneous_kernel(&nets, &s, &WeakForm::poisson(Source::Zero), 1).unwrap();
        assert_eq!(k.coefficients, vec![1.0]);
        assert_eq!(k.residual, 0.0);
    }

    #[test]
    fn dependent_trials_are_rejected() {
        let s = TestSpace::uniform(1.0, 2, 8).unwrap();
        let mut nets = sample_trial_nets(2, 4, Activation::Tanh, 1);
        nets.push(nets[0].scaled(2.0));
        assert!(matches!(
            homogeneous_kernel(&nets, &s, &WeakForm::poisson(Source::Zero), 1),
            Err(Error::DependentTrials { .. })
        ));
    }

    #[test]
    fn fit_unit_source() {
        let s = TestSpace::uniform(1.0, 4, 8).unwrap();
        let form = WeakForm::poisson(Source::Constant { value: 1.0 });
        let arch = FitArchitecture { width: 8, activation: Activation::Tanh, seed: 2 };
        let budget = DescentBudget { max_iterations: 2000, ..Default::default() };
        let out = wpinn_fit(&s, &form, (0.0, 0.0), &arch, &budget).unwrap();
        assert!(out.reached_target, "{:e}", out.residual);
        let zero = wpinn_fit(&s, &form, (0.0, 0.0), &arch, &DescentBudget { max_iterations: 0, ..Default::default() }).unwrap();
        assert_eq!(zero.iterations, 0);
        assert_eq!(zero.trial.network, Shallow { dim: 1, width: 8, activation: Activation::Tanh }.to_network(&Shallow { dim: 1, width: 8, activation: Activation::Tanh }.random(2)));
    }

    #[test]
    fn family_residual_grows_at_most_linearly() {
        let s = TestSpace::uniform(1.0, 4, 8).unwrap();
        let form = WeakForm::poisson(Source::Constant { value: 1.0 });
        let arch = FitArchitecture { width: 8, activation: Activation::Tanh, seed: 2 };
        let fit = wpinn_fit(&s, &form, (0.0, 0.0), &arch, &DescentBudget { max_iterations: 500, ..Default::default() }).unwrap();
        let k = sample_kernel(&s, &form, 8, Activation::Tanh, 5).unwrap();
        let lambdas = [-1e3, -100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0, 1e3];
        let fam = solution_family(&fit.trial, &k.element.phi, &lambdas, &s, &form).unwrap();
        assert!(fam.passed);
        for (l, r) in lambdas.iter().zip(&fam.residuals) {
            assert!(*r <= 1e-8 + l.abs() * 1e-10);
        }
        assert!(fam.distances[7] >= 99.0 * fam.phi_l2 * (1.0 - 1e-6));
    }

    #[test]
    fn affine_integrand_is_quadrature_exact() {
        let s = TestSpace::uniform(1.0, 3, 8).unwrap();
        let u = MlpNetwork::affine(Activation::Tanh, vec![2.0], 1.0);
        let k = sample_kernel(&s, &WeakForm::poisson(Source::Zero), 8, Activation::Tanh, 3).unwrap();
        let rep = quadrature_sensitivity(&u, &k.element.phi, &s, &[1, 4, 8, 16]).unwrap();
        assert!(rep.rows.iter().all(|r| r.max_change <= 1e-14));
        assert!(rep.rows[0].below_floor && !rep.rows[1].below_floor);
    }
}
