//! Finite linear measurement maps `M` and losses of the form `G ∘ M`.

mod certificate;

pub use certificate::{
    escape_threshold, loss_invariance_sweep, lp_distance, verify_null, Check, DegeneracyCertificate, EscapeCurve,
    NullCheck, NONTRIVIALITY_FLOOR,
};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::jet::{jet_coefficients, JetLayout};
use crate::multi_index::{self, MultiIndex};
use crate::network::{MlpNetwork, DEFAULT_KINK_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeKind {
    Value,
    Partial { beta: MultiIndex },
    TraceValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub point: Vec<f64>,
    #[serde(flatten)]
    pub kind: ProbeKind,
}

impl Probe {
    pub fn value(point: Vec<f64>) -> Self {
        Probe { point, kind: ProbeKind::Value }
    }

    pub fn partial(point: Vec<f64>, beta: MultiIndex) -> Self {
        Probe { point, kind: ProbeKind::Partial { beta } }
    }

    pub fn trace(point: Vec<f64>) -> Self {
        Probe { point, kind: ProbeKind::TraceValue }
    }

    pub fn order(&self) -> usize {
        match &self.kind {
            ProbeKind::Partial { beta } => beta.order(),
            _ => 0,
        }
    }

    pub fn is_trace(&self) -> bool {
        matches!(self.kind, ProbeKind::TraceValue)
    }

    fn beta(&self) -> MultiIndex {
        match &self.kind {
            ProbeKind::Partial { beta } => beta.clone(),
            _ => MultiIndex::zero(self.point.len()),
        }
    }
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Canonical order: interior points lexicographically, value before partials,
/// partials graded-lexicographic, all boundary probes last.
fn canonical(a: &Probe, b: &Probe) -> Ordering {
    a.is_trace()
        .cmp(&b.is_trace())
        .then_with(|| lex(&a.point, &b.point))
        .then_with(|| a.order().cmp(&b.order()))
        .then_with(|| b.beta().cmp(&a.beta()))
}

/// Ordered list of linear probes on a box domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSpec {
    domain: BoxDomain,
    probes: Vec<Probe>,
    id: String,
}

impl MeasurementSpec {
    /// Validates probe placement and sorts probes into canonical order.
    pub fn new(domain: BoxDomain, mut probes: Vec<Probe>) -> Result<Self> {
        let d = domain.dim();
        for p in &probes {
            if p.point.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.point.len() });
            }
            match &p.kind {
                ProbeKind::TraceValue if !domain.is_boundary(&p.point) => {
                    return Err(Error::InvalidProbe(format!("trace probe at {:?} is not on the boundary", p.point)));
                }
                ProbeKind::Value | ProbeKind::Partial { .. } if !domain.is_interior(&p.point) => {
                    return Err(Error::InvalidProbe(format!("interior probe at {:?} is not interior", p.point)));
                }
                ProbeKind::Partial { beta } if beta.dim() != d || beta.order() == 0 => {
                    return Err(Error::InvalidProbe(format!("partial probe with multi-index {:?}", beta.0)));
                }
                _ => {}
            }
        }
        probes.sort_by(canonical);
        if probes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidProbe("duplicate probe".into()));
        }
        let id = spec_id(&domain, &probes);
        Ok(MeasurementSpec { domain, probes, id })
    }

    /// Values and first partials at interior points, traces at boundary points.
    pub fn deep_ritz(domain: BoxDomain, interior: &[Vec<f64>], boundary: &[Vec<f64>]) -> Result<Self> {
        let d = domain.dim();
        let mut probes = Vec::new();
        for x in interior {
            probes.push(Probe::value(x.clone()));
            for k in 0..d {
                probes.push(Probe::partial(x.clone(), MultiIndex::unit(d, k)));
            }
        }
        probes.extend(boundary.iter().cloned().map(Probe::trace));
        Self::new(domain, probes)
    }

    /// Value and every partial with `1 ≤ |β| ≤ m` at each node.
    pub fn pointwise(domain: BoxDomain, nodes: &[Vec<f64>], m: usize) -> Result<Self> {
        let d = domain.dim();
        let betas = multi_index::up_to(d, 1, m);
        let mut probes = Vec::new();
        for x in nodes {
            probes.push(Probe::value(x.clone()));
            probes.extend(betas.iter().map(|b| Probe::partial(x.clone(), b.clone())));
        }
        Self::new(domain, probes)
    }

    pub fn values(domain: BoxDomain, nodes: &[Vec<f64>]) -> Result<Self> {
        Self::pointwise(domain, nodes, 0)
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn max_order(&self) -> usize {
        self.probes.iter().map(Probe::order).max().unwrap_or(0)
    }

    /// Distinct probe points with the highest probe order requested there, in probe order.
    pub fn points_with_orders(&self) -> Vec<(Vec<f64>, usize)> {
        let mut out: Vec<(Vec<f64>, usize)> = Vec::new();
        for p in &self.probes {
            match out.iter_mut().find(|(x, _)| *x == p.point) {
                Some(entry) => entry.1 = entry.1.max(p.order()),
                None => out.push((p.point.clone(), p.order())),
            }
        }
        out
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.probes.iter().any(|p| p.point == x)
    }
}

fn spec_id(domain: &BoxDomain, probes: &[Probe]) -> String {
    let doc = serde_json::to_vec(&(domain, probes)).expect("probe list serializes");
    Sha256::digest(&doc).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
    pub spec_id: String,
}

pub fn measure(net: &MlpNetwork, spec: &MeasurementSpec) -> Result<MeasurementVector> {
    measure_with_tolerance(net, spec, DEFAULT_KINK_TOLERANCE)
}

pub fn measure_with_tolerance(net: &MlpNetwork, spec: &MeasurementSpec, kink_tolerance: f64) -> Result<MeasurementVector> {
    if net.input_dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: net.input_dim() });
    }
    let probes = spec.probes();
    let mut values = Vec::with_capacity(probes.len());
    let mut layouts: Vec<Option<JetLayout>> = Vec::new();
    let mut i = 0;
    while i < probes.len() {
        let point = &probes[i].point;
        let mut j = i;
        let mut order = 0;
        while j < probes.len() && probes[j].point == *point && probes[j].is_trace() == probes[i].is_trace() {
            order = order.max(probes[j].order());
            j += 1;
        }
        if layouts.len() <= order {
            layouts.resize(order + 1, None);
        }
        let layout = layouts[order].get_or_insert_with(|| JetLayout::new(spec.dim(), order));
        let coeffs = jet_coefficients(net, point, layout, kink_tolerance)?;
        for p in &probes[i..j] {
            let beta = p.beta();
            values.push(coeffs[layout.position(&beta).expect("multi-index within order")] * beta.factorial());
        }
        i = j;
    }
    Ok(MeasurementVector { values, spec_id: spec.id.clone() })
}

/// Outer map `G: R^m → R` of a finite-measurement loss.
pub trait Aggregator {
    fn eval(&self, m: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> Aggregator for F {
    fn eval(&self, m: &[f64]) -> f64 {
        self(m)
    }
}

pub fn loss_eval<G: Aggregator + ?Sized>(g: &G, net: &MlpNetwork, spec: &MeasurementSpec) -> Result<f64> {
    Ok(g.eval(&measure(net, spec)?.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;

    #[test]
    fn canonical_order() {
        let dom = BoxDomain::unit(2);
        let spec = MeasurementSpec::new(
            dom,
            vec![
                Probe::trace(vec![0.0, 0.5]),
                Probe::partial(vec![0.5, 0.5], MultiIndex(vec![0, 1])),
                Probe::partial(vec![0.5, 0.5], MultiIndex(vec![1, 0])),
                Probe::value(vec![0.5, 0.5]),
                Probe::value(vec![0.25, 0.75]),
            ],
        )
        .unwrap();
        let kinds: Vec<String> = spec.probes().iter().map(|p| format!("{:?}{:?}", p.point, p.beta().0)).collect();
        assert_eq!(
            kinds,
            vec!["[0.25, 0.75][0, 0]", "[0.5, 0.5][0, 0]", "[0.5, 0.5][1, 0]", "[0.5, 0.5][0, 1]", "[0.0, 0.5][0, 0]"]
        );
    }

    #[test]
    fn placement_is_validated() {
        let dom = BoxDomain::unit(1);
        assert!(MeasurementSpec::new(dom.clone(), vec![Probe::trace(vec![0.5])]).is_err());
        assert!(MeasurementSpec::new(dom.clone(), vec![Probe::value(vec![1.0])]).is_err());
        assert!(MeasurementSpec::new(dom.clone(), vec![Probe::value(vec![0.5]), Probe::value(vec![0.5])]).is_err());
        assert!(MeasurementSpec::new(dom, vec![Probe::partial(vec![0.5], MultiIndex(vec![0]))]).is_err());
    }

    #[test]
    fn dimensions_of_standard_specs() {
        let dom = BoxDomain::unit(2);
        let interior = vec![vec![0.25, 0.5], vec![0.75, 0.5]];
        let boundary = vec![vec![0.0, 0.5], vec![1.0, 0.5], vec![0.5, 1.0]];
        assert_eq!(MeasurementSpec::deep_ritz(dom.clone(), &interior, &boundary).unwrap().len(), 2 * 3 + 3);
        assert_eq!(MeasurementSpec::pointwise(dom, &interior, 2).unwrap().len(), 2 * (5 + 1));
    }

    #[test]
    fn constant_and_affine_measurements() {
        let dom = BoxDomain::unit(1);
        let c = MlpNetwork::constant(Activation::Tanh, &[2], 1, 2.5);
        let spec = MeasurementSpec::values(dom.clone(), &[vec![0.2], vec![0.4], vec![0.6]]).unwrap();
        assert_eq!(measure(&c, &spec).unwrap().values, vec![2.5; 3]);
        let a = MlpNetwork::affine(Activation::Identity, vec![2.0], 1.0);
        let spec = MeasurementSpec::pointwise(dom, &[vec![0.5]], 1).unwrap();
        assert_eq!(measure(&a, &spec).unwrap().values, vec![2.0, 2.0]);
    }

    #[test]
    fn aggregators_from_closures() {
        let sum = |m: &[f64]| m.iter().sum::<f64>();
        assert_eq!(sum.eval(&[1.0, 2.0, 3.0]), 6.0);
        let sq = |m: &[f64]| m.iter().map(|v| v * v).sum::<f64>();
        let dom = BoxDomain::unit(1);
        let spec = MeasurementSpec::values(dom, &[vec![0.5]]).unwrap();
        let z = MlpNetwork::constant(Activation::Relu, &[1], 1, 0.0);
        assert_eq!(loss_eval(&sq, &z, &spec).unwrap(), 0.0);
    }

    #[test]
    fn spec_id_depends_on_probes() {
        let dom = BoxDomain::unit(1);
        let a = MeasurementSpec::values(dom.clone(), &[vec![0.5]]).unwrap();
        let b = MeasurementSpec::values(dom, &[vec![0.25]]).unwrap();
        assert_ne!(a.id(), b.id());
        assert_eq!(a.id().len(), 16);
    }
}
