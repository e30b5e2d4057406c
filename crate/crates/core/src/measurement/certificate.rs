use serde::{Deserialize, Serialize};

use super::{measure, Aggregator, MeasurementSpec};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::network::MlpNetwork;

/// Minimum |Φ(z0)| accepted as evidence that Φ is not the zero function.
pub const NONTRIVIALITY_FLOOR: f64 = 0.1;

/// Relative tolerance on the loss spread of a λ-sweep.
pub const INVARIANCE_TOLERANCE: f64 = 1e-9;

/// One named pass/fail property with the measured number and its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), passed: value <= threshold, value, threshold }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), passed: value >= threshold, value, threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCheck {
    pub null_residual: f64,
    pub tolerance: f64,
    pub witness_point: Vec<f64>,
    pub witness_value: f64,
    pub error: Option<String>,
}

impl NullCheck {
    pub fn checks(&self) -> Vec<Check> {
        vec![
            Check::at_most("null_residual", self.null_residual, self.tolerance),
            Check::at_least("nontriviality", self.witness_value.abs(), NONTRIVIALITY_FLOOR),
        ]
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks().iter().all(|c| c.passed)
    }
}

/// Checks `M(Φ) ≈ 0` and `|Φ(z0)| ≥ 0.1`; failures are reported, never raised.
pub fn verify_null(phi: &MlpNetwork, spec: &MeasurementSpec, z0: &[f64], tol: f64) -> NullCheck {
    let mut out = NullCheck {
        null_residual: f64::INFINITY,
        tolerance: tol,
        witness_point: z0.to_vec(),
        witness_value: 0.0,
        error: None,
    };
    if spec.contains_point(z0) {
        out.error = Some("witness point coincides with a probe point".into());
        return out;
    }
    match measure(phi, spec) {
        Ok(m) => out.null_residual = m.values.iter().fold(0.0, |a, v| a.max(v.abs())),
        Err(e) => out.error = Some(e.to_string()),
    }
    match phi.forward(z0) {
        Ok(v) => out.witness_value = v,
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Distances `‖base + λΦ − reference‖_{L^p}` along the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeCurve {
    pub p: f64,
    pub resolution: usize,
    pub pairs: Vec<(f64, f64)>,
    pub base_distance: f64,
    pub phi_norm: f64,
    /// Beyond this |λ| the sampled distance is nondecreasing in |λ|.
    pub escape_lambda: Option<f64>,
}

impl EscapeCurve {
    pub fn distance_at(&self, lambda: f64) -> Option<f64> {
        self.pairs.iter().find(|(l, _)| *l == lambda).map(|(_, d)| *d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyCertificate {
    pub spec_id: String,
    pub base: MlpNetwork,
    pub null_dir: MlpNetwork,
    pub lambda_samples: Vec<f64>,
    pub loss_values: Vec<f64>,
    pub base_loss: f64,
    pub loss_spread: f64,
    pub worst_lambda: Option<f64>,
    pub null_residual: f64,
    pub witness_point: Option<Vec<f64>>,
    pub witness_value: Option<f64>,
    pub lp_distances: Option<EscapeCurve>,
    pub constraint_residuals: Option<Vec<f64>>,
    pub checks: Vec<Check>,
}

impl DegeneracyCertificate {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    fn replace_check(&mut self, check: Check) {
        self.checks.retain(|c| c.name != check.name);
        self.checks.push(check);
    }

    pub fn with_null_check(mut self, null: &NullCheck) -> Self {
        self.null_residual = null.null_residual;
        self.witness_point = Some(null.witness_point.clone());
        self.witness_value = Some(null.witness_value);
        for c in null.checks() {
            self.replace_check(c);
        }
        if let Some(e) = &null.error {
            self.replace_check(Check { name: format!("null_check_error: {e}"), passed: false, value: f64::NAN, threshold: f64::NAN });
        }
        self
    }

    /// Records the worst `|B(u + λΦ)|` per λ; `deviation` is the largest change from the residuals of `u`.
    pub fn with_constraints(mut self, residuals: Vec<f64>, deviation: f64, tol: f64) -> Self {
        self.replace_check(Check::at_most("hard_constraints", deviation, tol));
        self.constraint_residuals = Some(residuals);
        self
    }

    /// Adds the distance curve and checks the lower bound `d(λ) ≥ |λ|‖Φ‖ − d(0)`.
    pub fn with_escape(
        mut self,
        reference: &dyn ScalarField,
        p: f64,
        domain: &BoxDomain,
        resolution: usize,
    ) -> Result<Self> {
        let (points, cell) = domain.midpoints(resolution);
        let mut base = Vec::with_capacity(points.len());
        let mut phi = Vec::with_capacity(points.len());
        let mut reference_values = Vec::with_capacity(points.len());
        for x in &points {
            base.push(self.base.forward(x)?);
            phi.push(self.null_dir.forward(x)?);
            reference_values.push(reference.value(x)?);
        }
        let norm = |lambda: f64, with_ref: bool| -> f64 {
            let s: f64 = (0..points.len())
                .map(|i| {
                    let r = if with_ref { reference_values[i] } else { 0.0 };
                    let b = if with_ref { base[i] } else { 0.0 };
                    (b + lambda * phi[i] - r).abs().powf(p)
                })
                .sum();
            (s * cell).powf(1.0 / p)
        };
        let base_distance = norm(0.0, true);
        let phi_norm = norm(1.0, false);
        let pairs: Vec<(f64, f64)> = self.lambda_samples.iter().map(|&l| (l, norm(l, true))).collect();
        let slack = pairs
            .iter()
            .map(|&(l, d)| (l.abs() * phi_norm - base_distance) - d)
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = 1e-12 * (1.0 + base_distance + self.lambda_samples.iter().fold(0.0f64, |a, l| a.max(l.abs())) * phi_norm);
        self.replace_check(Check::at_most("escape_lower_bound", slack, scale));
        let escape_lambda = escape_threshold(&pairs);
        self.lp_distances = Some(EscapeCurve { p, resolution, pairs, base_distance, phi_norm, escape_lambda });
        Ok(self)
    }

    /// CSV rows `lambda,loss,distance` with 17 significant digits.
    pub fn sweep_csv(&self) -> String {
        let mut s = String::from("lambda,loss,distance\n");
        for (i, (l, v)) in self.lambda_samples.iter().zip(&self.loss_values).enumerate() {
            let d = self
                .lp_distances
                .as_ref()
                .map(|c| format!("{:.16e}", c.pairs[i].1))
                .unwrap_or_default();
            s.push_str(&format!("{l:.16e},{v:.16e},{d}\n"));
        }
        s
    }
}

/// Smallest sampled |λ| beyond which the distance never decreases in |λ| (each sign separately).
pub fn escape_threshold(pairs: &[(f64, f64)]) -> Option<f64> {
    let mut threshold: Option<f64> = None;
    for positive in [true, false] {
        let mut branch: Vec<(f64, f64)> = pairs
            .iter()
            .filter(|(l, _)| if positive { *l >= 0.0 } else { *l <= 0.0 })
            .map(|&(l, d)| (l.abs(), d))
            .collect();
        if branch.is_empty() {
            continue;
        }
        branch.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut start = 0;
        for i in 0..branch.len() - 1 {
            if branch[i + 1].1 < branch[i].1 {
                start = i + 1;
            }
        }
        let t = branch[start].0;
        threshold = Some(threshold.map_or(t, |x: f64| x.max(t)));
    }
    threshold
}

/// Loss of `base + λΦ` for each λ; passes iff the spread is at most `1e-9·(1 + |loss(base)|)`.
pub fn loss_invariance_sweep<G: Aggregator + ?Sized>(
    g: &G,
    spec: &MeasurementSpec,
    base: &MlpNetwork,
    phi: &MlpNetwork,
    lambdas: &[f64],
) -> Result<DegeneracyCertificate> {
    let base_loss = g.eval(&measure(base, spec)?.values);
    if !base_loss.is_finite() {
        return Err(Error::Precondition(format!("base loss is not finite: {base_loss}")));
    }
    let null_residual = measure(phi, spec)?.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut loss_values = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let shifted = MlpNetwork::linear_combine(&[base, phi], &[1.0, l])?;
        loss_values.push(g.eval(&measure(&shifted, spec)?.values));
    }
    let (mut lo, mut hi) = (base_loss, base_loss);
    let mut worst: Option<(f64, f64)> = None;
    for (&l, &v) in lambdas.iter().zip(&loss_values) {
        lo = lo.min(v);
        hi = hi.max(v);
        let dev = (v - base_loss).abs();
        if worst.is_none_or(|(_, d)| dev > d || dev.is_nan()) {
            worst = Some((l, dev));
        }
    }
    let spread = if loss_values.iter().any(|v| v.is_nan()) { f64::INFINITY } else { hi - lo };
    let tolerance = INVARIANCE_TOLERANCE * (1.0 + base_loss.abs());
    Ok(DegeneracyCertificate {
        spec_id: spec.id().to_string(),
        base: base.clone(),
        null_dir: phi.clone(),
        lambda_samples: lambdas.to_vec(),
        loss_values,
        base_loss,
        loss_spread: spread,
        worst_lambda: worst.map(|w| w.0),
        null_residual,
        witness_point: None,
        witness_value: None,
        lp_distances: None,
        constraint_residuals: None,
        checks: vec![Check::at_most("loss_invariance", spread, tolerance)],
    })
}

/// Composite midpoint approximation of `‖u − v‖_{L^p(domain)}` with `resolution` cells per axis.
pub fn lp_distance(
    u: &dyn ScalarField,
    v: &dyn ScalarField,
    p: f64,
    domain: &BoxDomain,
    resolution: usize,
) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::Precondition(format!("L^p distance needs p ≥ 1, got {p}")));
    }
    let (points, cell) = domain.midpoints(resolution.max(2));
    let mut s = 0.0;
    for x in &points {
        s += (u.value(x)? - v.value(x)?).abs().powf(p);
    }
    Ok((s * cell).powf(1.0 / p))
}
