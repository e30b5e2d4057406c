//! Acceptance criteria 1 to 12, one printed line each. Exits nonzero if any criterion fails.
//!
//! Oracles here are computed independently of the library where possible: normal equations by
//! Cramer's rule, L² norms by midpoint sums, weak residuals of P1 hats by exact nodal formulas,
//! derivatives by finite differences.

use std::process::ExitCode;

use forge_cli::{run, EXPERIMENTS};
use forge_core::deep_ritz::{
    affine_minimizer_1d, certify_dr_nonuniqueness, dr_loss, non_coercive_sequence, one_neuron_zero_loss, DeepRitzConfig,
    DrCertificateRequest, Enforcement, LocalIntegrand,
};
use forge_core::forge::{smooth_hermite_interpolant, smooth_hermite_uniform, HermiteNode};
use forge_core::regularization::{
    catalog, fd_reference_solve, grid_search_oracle, reg_fd_loss, reg_pointwise_loss, stencil_agreement,
    zero_loss_interpolant, fd::FdObjective, FidelityConfig, GridSpec, RegularizerKind, RegularizerSpec,
};
use forge_core::train::DescentBudget;
use forge_core::wpinn::{sample_kernel, solution_family, wpinn_fit, FitArchitecture, Source, TestSpace, WeakForm};
use forge_core::{jet_forward, measure, Activation, Error, Family, Forge, MeasurementSpec, MlpNetwork, MultiIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AC1_TOL: f64 = 1e-10;
const AC2_TOL: f64 = 1e-14;
const AC3_FACTOR: f64 = 0.9;
const AC4_RELU_NULL: f64 = 1e-12;
const AC4_SMOOTH_NULL: f64 = 1e-8;
const AC4_WITNESS: f64 = 1e-12;
const AC4_SPREAD: f64 = 1e-9;
const AC5_RATIO: f64 = 50.0;
const AC6_TOL: f64 = 1e-8;
const AC7_SLACK: f64 = 1e-6;
const AC8_TOL: f64 = 1e-10;
const AC9_KERNEL: f64 = 1e-10;
const AC9_L2: f64 = 1e-4;
const AC9_FAMILY_ABS: f64 = 1e-8;
const AC9_FAMILY_REL: f64 = 1e-10;
const AC10_FIRST: f64 = 1e-6;
const AC10_SECOND: f64 = 1e-4;
const AC10_LINEARITY: f64 = 1e-10;
const AC10_COMBINE: f64 = 1e-14;
const AC11_TOL: f64 = 1e-8;
const L2_CELLS: usize = 4096;

const LAMBDAS: [f64; 6] = [-100.0, -10.0, -1.0, 1.0, 10.0, 100.0];
const NODES: [f64; 3] = [0.2, 0.5, 0.8];

type Outcome = (bool, String);

fn example(alpha: f64) -> DeepRitzConfig {
    DeepRitzConfig::interval(1.0, 0.0, 1.0, alpha, &NODES).unwrap()
}

/// Midpoint rule for `‖f‖_{L²(a, b)}`.
fn l2_norm(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / L2_CELLS as f64;
    let s: f64 = (0..L2_CELLS).map(|i| f(a + (i as f64 + 0.5) * h).powi(2)).sum();
    (s * h).sqrt()
}

fn random_smooth_net(rng: &mut ChaCha8Rng, dim: usize) -> MlpNetwork {
    let depth = rng.random_range(2..=4);
    let mut dims = vec![dim];
    for _ in 1..depth {
        dims.push(rng.random_range(2..=6));
    }
    dims.push(1);
    let act = [Activation::Tanh, Activation::Sigmoid, Activation::Softplus][rng.random_range(0..3)];
    random_net(rng, act, dims)
}

fn random_net(rng: &mut ChaCha8Rng, act: Activation, dims: Vec<usize>) -> MlpNetwork {
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in dims.windows(2) {
        let scale = 1.0 / (w[0] as f64).sqrt();
        weights.push((0..w[0] * w[1]).map(|_| rng.random_range(-1.5..1.5) * scale).collect());
        biases.push((0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect());
    }
    MlpNetwork::new(act, dims, weights, biases).unwrap()
}

fn ac1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut draws = vec![(1.0, 0.0, 1.0, 1.0)];
    for _ in 0..4 {
        draws.push((rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..10.0)));
    }
    let (mut worst_err, mut worst_grad) = (0.0f64, 0.0f64);
    for (t, u0, ut, alpha) in draws {
        let (s, c) = affine_minimizer_1d(t, u0, ut, alpha).unwrap();
        // ½a² + α[(c − u0)² + (aT + c − uT)²]: gradient = M·(a, c) − r.
        let (m11, m12, m22) = (1.0 + 2.0 * alpha * t * t, 2.0 * alpha * t, 4.0 * alpha);
        let (r1, r2) = (2.0 * alpha * t * ut, 2.0 * alpha * (u0 + ut));
        let det = m11 * m22 - m12 * m12;
        let (so, co) = ((r1 * m22 - m12 * r2) / det, (m11 * r2 - m12 * r1) / det);
        worst_err = worst_err.max((s - so).abs()).max((c - co).abs());
        let nodes: Vec<f64> = NODES.iter().map(|z| z * t).collect();
        let cfg = DeepRitzConfig::interval(t, u0, ut, alpha, &nodes).unwrap();
        let integrand = LocalIntegrand::poisson(vec![0.0; 3]);
        let loss = |a: f64, b: f64| dr_loss(&MlpNetwork::affine(Activation::Identity, vec![a], b), &integrand, &cfg).unwrap();
        let h = 1e-3;
        let gs = (loss(s + h, c) - loss(s - h, c)) / (2.0 * h);
        let gc = (loss(s, c + h) - loss(s, c - h)) / (2.0 * h);
        worst_grad = worst_grad.max(gs.hypot(gc));
    }
    (
        worst_err <= AC1_TOL && worst_grad <= AC1_TOL,
        format!("oracle error {worst_err:.2e}, gradient norm {worst_grad:.2e} (tol {AC1_TOL:e})"),
    )
}

fn ac2() -> Outcome {
    let cfg = example(1.0);
    let integrand = LocalIntegrand::poisson(vec![0.0; 3]);
    let worst = [-0.99, -0.95, -0.9, -0.85, -0.81]
        .iter()
        .map(|&b| dr_loss(&one_neuron_zero_loss(b, 1.0, 0.0, 1.0, 0.8).unwrap(), &integrand, &cfg).unwrap().abs())
        .fold(0.0, f64::max);
    (worst <= AC2_TOL, format!("max |loss| over 5 offsets {worst:.2e} (tol {AC2_TOL:e})"))
}

fn ac3() -> Outcome {
    let cfg = example(1.0);
    let zeta = vec![1.0, -0.5, 2.0];
    let c = zeta.iter().map(|z: &f64| z.abs() / 3.0).fold(0.0, f64::max);
    let integrand = LocalIntegrand::poisson(zeta);
    let mut ok = true;
    let mut detail = Vec::new();
    for k in [1.0, 10.0, 100.0] {
        let loss = non_coercive_sequence(k, &integrand, &cfg).unwrap().loss;
        ok &= loss <= -AC3_FACTOR * c * k;
        detail.push(format!("k={k}: {loss:.4}"));
    }
    (ok, format!("{} vs bound −{AC3_FACTOR}·{c:.4}·k", detail.join(", ")))
}

fn smooth_base() -> MlpNetwork {
    let mut table = vec![HermiteNode { point: vec![0.0], value: 0.0, order: 0 }];
    table.extend(NODES.iter().map(|&z| HermiteNode { point: vec![z], value: z, order: 1 }));
    table.push(HermiteNode { point: vec![1.0], value: 1.0, order: 0 });
    smooth_hermite_interpolant(&table, Activation::Tanh, 2, 1).unwrap().network
}

fn dr_cases() -> Vec<(&'static str, Forge, MlpNetwork)> {
    let relu_base = one_neuron_zero_loss(-0.81, 1.0, 0.0, 1.0, 0.8).unwrap().extend_depth_identity(3, None).unwrap();
    vec![
        ("relu", Forge::new(Family::Relu, 3), relu_base),
        ("tanh", Forge::new(Family::tanh(), 2).with_seed(1), smooth_base()),
    ]
}

fn ac4() -> Outcome {
    let integrand = LocalIntegrand::poisson(vec![0.0; 3]);
    let mut ok = true;
    let mut detail = Vec::new();
    for enforcement in [Enforcement::Penalty, Enforcement::HardAtPoints] {
        let cfg = example(1.0).with_enforcement(enforcement);
        let spec = cfg.spec().unwrap();
        for (name, forge, base) in dr_cases() {
            let request = DrCertificateRequest {
                forge,
                witness: vec![0.35],
                lambdas: LAMBDAS.to_vec(),
                reference: None,
                resolution: L2_CELLS,
            };
            let cert = certify_dr_nonuniqueness(&cfg, &integrand, &base, &request).unwrap();
            let phi = &cert.null_dir;
            let null = measure(phi, &spec).unwrap().values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let null_tol = if name == "relu" { AC4_RELU_NULL } else { AC4_SMOOTH_NULL };
            let witness = (phi.forward(&[0.35]).unwrap() - 1.0).abs();
            let base_loss = dr_loss(&base, &integrand, &cfg).unwrap();
            let mut spread = 0.0f64;
            for l in LAMBDAS {
                let u = MlpNetwork::linear_combine(&[&base, phi], &[1.0, l]).unwrap();
                spread = spread.max((dr_loss(&u, &integrand, &cfg).unwrap() - base_loss).abs());
            }
            let pass = null <= null_tol && witness <= AC4_WITNESS && spread <= AC4_SPREAD * (1.0 + base_loss.abs()) && cert.passed();
            ok &= pass;
            detail.push(format!("{name}/{enforcement:?}: null {null:.1e}, spread {spread:.1e}"));
        }
    }
    (ok, detail.join("; "))
}

fn ac5() -> Outcome {
    let cfg = example(1.0);
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, forge, base) in dr_cases() {
        let phi = forge.null_direction(&cfg.spec().unwrap(), &[0.35]).unwrap();
        let dist = |l: f64| l2_norm(0.0, 1.0, |z| base.forward(&[z]).unwrap() + l * phi.forward(&[z]).unwrap() - z);
        let ratio = dist(100.0) / dist(1.0);
        ok &= ratio >= AC5_RATIO;
        detail.push(format!("{name}: d(100)/d(1) = {ratio:.2}"));
    }
    (ok, format!("{} (need ≥ {AC5_RATIO})", detail.join(", ")))
}

fn ac6() -> Outcome {
    let grid = GridSpec::unit(vec![5]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let data: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fid = FidelityConfig::new(0.5, 1.0, data.clone()).unwrap();
    let forge = Forge::new(Family::Relu, 3);
    let mut worst = 0.0f64;
    let mut kinds = Vec::new();
    for reg in catalog(1e-3) {
        let net = zero_loss_interpolant(&grid, &data, reg.order(), &forge).unwrap();
        worst = worst.max(reg_pointwise_loss(&net, &reg, &fid, &grid).unwrap().abs());
        kinds.push(reg.name());
    }
    (kinds.len() == 7 && worst <= AC6_TOL, format!("{} kinds, max loss {worst:.2e} (tol {AC6_TOL:e})", kinds.len()))
}

fn ac7() -> Outcome {
    let grid = GridSpec::unit(vec![3]).unwrap();
    let fid = FidelityConfig::new(0.0, 1.0, vec![0.0, 1.0, 0.0]).unwrap().with_reg_weight(1.0);
    let tv = RegularizerSpec::new(RegularizerKind::Tv { nu: 1 }).unwrap();
    let net = zero_loss_interpolant(&grid, &fid.data, 1, &Forge::new(Family::Relu, 3)).unwrap();
    let pointwise = reg_pointwise_loss(&net, &tv, &fid, &grid).unwrap();
    let sol = fd_reference_solve(&tv, &fid, &grid, 1e-12).unwrap();
    let oracle = grid_search_oracle(&FdObjective::new(&tv, &fid, &grid).unwrap(), &fid).unwrap().objective;
    // Constant fields carry no TV; the best one is the data mean 1/3 with fidelity 2/9.
    let constant = reg_fd_loss(&[1.0 / 3.0; 3], &tv, &fid, &grid).unwrap();
    let ok = pointwise == 0.0 && sol.objective >= oracle - AC7_SLACK && oracle - AC7_SLACK > 0.0 && oracle <= constant + 1e-12;
    (ok, format!("pointwise {pointwise:e}, FD {:.9}, oracle {oracle:.9}, constant-field value {constant:.9}", sol.objective))
}

fn ac8() -> Outcome {
    let grid = GridSpec::unit(vec![8]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let data: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fid = FidelityConfig::new(0.0, 1.0, data).unwrap().with_reg_weight(0.05);
    let tv = RegularizerSpec::new(RegularizerKind::Tv { nu: 1 }).unwrap();
    let sol = fd_reference_solve(&tv, &fid, &grid, 1e-12).unwrap();
    let forge = Forge::new(Family::Relu, 3);
    let witnesses = vec![vec![0.125], vec![0.5], vec![0.875]];
    let rep = stencil_agreement(None, &sol.field, &grid, &tv, &fid, &forge, &witnesses, &LAMBDAS).unwrap();
    let nodes = grid.nodes();
    let values: Vec<f64> = nodes.iter().map(|x| rep.base.forward(x).unwrap()).collect();
    let loss_gap = (reg_fd_loss(&values, &tv, &fid, &grid).unwrap() - reg_fd_loss(&sol.field, &tv, &fid, &grid).unwrap()).abs();
    let spec = MeasurementSpec::values(grid.domain(), &nodes).unwrap();
    let family = forge.null_family(&spec, &witnesses).unwrap();
    let (mut grid_dev, mut witness_err) = (0.0f64, 0.0f64);
    for (phi, z0) in family.members.iter().zip(&witnesses) {
        for l in LAMBDAS {
            let u = MlpNetwork::linear_combine(&[&rep.base, phi], &[1.0, l]).unwrap();
            for (x, v) in nodes.iter().zip(&values) {
                grid_dev = grid_dev.max((u.forward(x).unwrap() - v).abs());
            }
            let change = u.forward(z0).unwrap() - rep.base.forward(z0).unwrap();
            witness_err = witness_err.max((change.abs() - l.abs()).abs());
        }
    }
    let ok = loss_gap <= AC8_TOL && grid_dev <= AC8_TOL && witness_err <= AC8_TOL && rep.passed;
    (ok, format!("FD loss gap {loss_gap:.1e}, grid deviation {grid_dev:.1e}, witness error {witness_err:.1e}"))
}

/// `a(Φ, φ_i) = (2Φ(x_i) − Φ(x_{i−1}) − Φ(x_{i+1}))/h` exactly for P1 hats on a uniform mesh.
fn exact_hat_residual(phi: &MlpNetwork, n: usize) -> f64 {
    let h = 1.0 / (n + 1) as f64;
    let v = |i: usize| phi.forward(&[i as f64 * h]).unwrap();
    (1..=n).map(|i| ((2.0 * v(i) - v(i - 1) - v(i + 1)) / h).abs()).fold(0.0, f64::max)
}

fn ac9() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    let lambdas = [-1e3, -100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0, 1e3];
    for n in [2, 4, 8] {
        let space = TestSpace::uniform(1.0, n, 8).unwrap();
        let form = WeakForm::poisson(Source::Constant { value: 1.0 });
        let k = sample_kernel(&space, &WeakForm::poisson(Source::Zero), 8, Activation::Tanh, 10 + n as u64).unwrap();
        let e = &k.element;
        let l2 = l2_norm(0.0, 1.0, |z| e.phi.forward(&[z]).unwrap());
        let exact = exact_hat_residual(&e.phi, n);
        let arch = FitArchitecture { width: 8, activation: Activation::Tanh, seed: n as u64 };
        let fit = wpinn_fit(&space, &form, (0.0, 0.0), &arch, &DescentBudget { max_iterations: 500, ..Default::default() }).unwrap();
        let fam = solution_family(&fit.trial, &e.phi, &lambdas, &space, &form).unwrap();
        let family_ok = lambdas.iter().zip(&fam.residuals).all(|(l, r)| *r <= AC9_FAMILY_ABS + l.abs() * AC9_FAMILY_REL);
        ok &= e.residual <= AC9_KERNEL * e.t_norm && l2 >= AC9_L2 && exact <= 1e-8 && family_ok;
        detail.push(format!(
            "n={n}: kernel {:.1e}/‖T‖ {:.1e}, exact-integral {exact:.1e}, ‖Φ‖ {l2:.3}, family max {:.1e}",
            e.residual,
            e.t_norm,
            fam.residuals.iter().cloned().fold(0.0, f64::max)
        ));
    }
    (ok, detail.join("; "))
}

fn ac10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let (mut first, mut second, mut linear, mut combine) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let dim = rng.random_range(1..=3);
        let net = random_smooth_net(&mut rng, dim);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jet = jet_forward(&net, &x, 2, 1e-9).unwrap();
        let f = |p: &[f64]| net.forward(p).unwrap();
        let shift = |d: &[(usize, f64)]| {
            let mut p = x.clone();
            for &(i, s) in d {
                p[i] += s;
            }
            p
        };
        for i in 0..dim {
            let h = 1e-5;
            let fd = (f(&shift(&[(i, h)])) - f(&shift(&[(i, -h)]))) / (2.0 * h);
            let mut beta = vec![0; dim];
            beta[i] = 1;
            let d = jet.get(&MultiIndex(beta)).unwrap();
            first = first.max((fd - d).abs() / d.abs().max(1.0));
            for j in 0..=i {
                let h = 1e-4;
                let fd = (f(&shift(&[(i, h), (j, h)])) - f(&shift(&[(i, h), (j, -h)])) - f(&shift(&[(i, -h), (j, h)]))
                    + f(&shift(&[(i, -h), (j, -h)])))
                    / (4.0 * h * h);
                let mut beta = vec![0; dim];
                beta[i] += 1;
                beta[j] += 1;
                let d = jet.get(&MultiIndex(beta)).unwrap();
                second = second.max((fd - d).abs() / d.abs().max(1.0));
            }
        }
        let other = random_net(&mut rng, net.activation(), net.layer_dims().to_vec());
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        {
            let sum = MlpNetwork::linear_combine(&[&net, &other], &[a, b]).unwrap();
            let points: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| rng.random_range(-0.9..0.9)).collect()).collect();
            let spec = MeasurementSpec::pointwise(forge_core::BoxDomain::symmetric(dim, 1.0), &points, 2).unwrap();
            let (mu, mv, ms) = (measure(&net, &spec).unwrap(), measure(&other, &spec).unwrap(), measure(&sum, &spec).unwrap());
            for k in 0..ms.values.len() {
                linear = linear.max((ms.values[k] - a * mu.values[k] - b * mv.values[k]).abs());
            }
            for p in &points {
                combine = combine.max((sum.forward(p).unwrap() - (a * f(p) + b * other.forward(p).unwrap())).abs());
            }
        }
    }
    let ok = first <= AC10_FIRST && second <= AC10_SECOND && linear <= AC10_LINEARITY && combine <= AC10_COMBINE;
    (ok, format!("first {first:.1e}, second {second:.1e}, linearity {linear:.1e}, combine {combine:.1e}"))
}

fn ac11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let (mut built, mut refused, mut worst) = (0, 0, 0.0f64);
    let mut silent = false;
    for trial in 0..10 {
        let mut points: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        points.sort_by(f64::total_cmp);
        let values: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let nodes: Vec<Vec<f64>> = points.iter().map(|p| vec![*p]).collect();
        let depth = 2 + trial % 2;
        match smooth_hermite_uniform(&nodes, &values, 2, Activation::Tanh, depth, trial as u64) {
            Ok(h) => {
                built += 1;
                let mut err = 0.0f64;
                for (x, g) in nodes.iter().zip(&values) {
                    let j = jet_forward(&h.network, x, 2, 1e-9).unwrap();
                    err = err.max((j.value() - g).abs());
                    err = err.max(j.get(&MultiIndex(vec![1])).unwrap().abs());
                    err = err.max(j.get(&MultiIndex(vec![2])).unwrap().abs());
                }
                silent |= err > AC11_TOL;
                worst = worst.max(err);
            }
            Err(Error::IllConditioned { .. }) => refused += 1,
            Err(e) => {
                silent = true;
                eprintln!("unexpected error: {e}");
            }
        }
    }
    (!silent, format!("{built} built (worst of 9 conditions {worst:.1e}), {refused} refused as ill-conditioned"))
}

fn ac12() -> Outcome {
    let reports: Vec<(String, bool)> = std::thread::scope(|s| {
        let handles: Vec<_> = EXPERIMENTS
            .iter()
            .map(|e| {
                s.spawn(move || {
                    let a = run(e.name, None, Some(7)).map(|r| r.certificate_json());
                    let b = run(e.name, None, Some(7)).map(|r| r.certificate_json());
                    let same = matches!((&a, &b), (Ok(x), Ok(y)) if x.as_bytes() == y.as_bytes());
                    (e.name.to_string(), same)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let differing: Vec<&str> = reports.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect();
    (
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} experiments byte-identical across two runs", reports.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("closed-form Deep Ritz minimizer", ac1),
        ("zero-loss one-neuron family", ac2),
        ("non-coercivity", ac3),
        ("Deep Ritz non-uniqueness certificate", ac4),
        ("distance escape", ac5),
        ("regularization zero-loss", ac6),
        ("pointwise/FD contrast", ac7),
        ("stencil agreement", ac8),
        ("wPINN kernel and family", ac9),
        ("jet engine properties", ac10),
        ("smooth Hermite interpolation", ac11),
        ("determinism", ac12),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let (ok, detail) = f();
        println!("AC{:<2} {} {title}: {detail}", i + 1, if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
