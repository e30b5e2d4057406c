//! Pointwise integrands `R` acting on the derivative tuple `(D^β u(x))_{1≤|β|≤m}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multi_index::{eta, of_order};

pub const DEFAULT_EPSILON: f64 = 1e-3;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_kappa() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularizerKind {
    /// `|∇u|_2^p`
    Tikhonov { p: u32 },
    /// `|∇u|_ν`, anisotropic for ν = 1, isotropic for ν = 2.
    Tv { nu: u32 },
    /// Frobenius norm of the Hessian.
    Hessian,
    /// `ρ|∇²u| + (1 − ρ)|∇u|_2`; `rho` holds one weight per node, or a single weight for all nodes.
    MixedTvHessian { rho: Vec<f64> },
    /// `ρ1|∇²u| + ρ2 w(|∇u|_ε)(Δu)²` with edge weight `w(t) = 1/(1 + (t/κ)²)`.
    TvLaplacian {
        rho1: f64,
        rho2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    /// `(ρ1 + ρ2 k_ε²)|∇u|_2` with smoothed curvature `k_ε = div(∇u/|∇u|_ε)`.
    Elastica {
        rho1: f64,
        rho2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    /// `|∇u|_2^p` with `0 < p < 1`.
    NonconvexP { p: f64 },
}

/// A catalog regularizer on `dim`-dimensional inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    #[serde(flatten)]
    pub kind: RegularizerKind,
}

/// Gradient and Hessian views of a derivative tuple in graded-lexicographic order.
struct Tuple<'a> {
    dim: usize,
    t: &'a [f64],
}

impl Tuple<'_> {
    fn grad(&self) -> &[f64] {
        &self.t[..self.dim]
    }

    fn grad_norm(&self) -> f64 {
        self.grad().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `(i, j, entry)` for `i ≤ j` in the order of the second-order block.
    fn hessian_entries(&self) -> Vec<(usize, usize, f64)> {
        of_order(self.dim, 2)
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let axes: Vec<usize> = (0..self.dim).flat_map(|a| std::iter::repeat_n(a, b.0[a] as usize)).collect();
                (axes[0], axes[1], self.t[self.dim + k])
            })
            .collect()
    }

    fn hessian_norm(&self) -> f64 {
        self.hessian_entries()
            .iter()
            .map(|&(i, j, h)| if i == j { h * h } else { 2.0 * h * h })
            .sum::<f64>()
            .sqrt()
    }

    fn laplacian(&self) -> f64 {
        self.hessian_entries().iter().filter(|e| e.0 == e.1).map(|e| e.2).sum()
    }

    /// `gᵀ H g`
    fn hessian_form(&self) -> f64 {
        let g = self.grad();
        self.hessian_entries()
            .iter()
            .map(|&(i, j, h)| if i == j { h * g[i] * g[i] } else { 2.0 * h * g[i] * g[j] })
            .sum()
    }
}

fn pow_int(x: f64, p: u32) -> f64 {
    x.powi(p as i32)
}

impl RegularizerSpec {
    pub fn new(kind: RegularizerKind) -> Result<Self> {
        let spec = RegularizerSpec { kind };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Precondition(m.to_string()));
        match &self.kind {
            RegularizerKind::Tikhonov { p } if *p == 0 => bad("Tikhonov exponent must be a positive integer"),
            RegularizerKind::Tv { nu } if *nu != 1 && *nu != 2 => bad("TV needs ν ∈ {1, 2}"),
            RegularizerKind::MixedTvHessian { rho } if rho.is_empty() || rho.iter().any(|r| !(0.0..=1.0).contains(r)) => {
                bad("mixed weights must lie in [0, 1]")
            }
            RegularizerKind::TvLaplacian { rho1, rho2, epsilon, kappa }
                if !(*rho1 >= 0.0 && *rho2 >= 0.0 && *epsilon > 0.0 && *kappa > 0.0) =>
            {
                bad("TV-Laplacian needs ρ1, ρ2 ≥ 0 and ε, κ > 0")
            }
            RegularizerKind::Elastica { rho1, rho2, epsilon } if !(*rho1 >= 0.0 && *rho2 >= 0.0 && *epsilon > 0.0) => {
                bad("elastica needs ρ1, ρ2 ≥ 0 and ε > 0")
            }
            RegularizerKind::NonconvexP { p } if !(*p > 0.0 && *p < 1.0) => bad("nonconvex exponent must lie in (0, 1)"),
            _ => Ok(()),
        }
    }

    /// Highest derivative order entering `R`.
    pub fn order(&self) -> usize {
        match self.kind {
            RegularizerKind::Tikhonov { .. } | RegularizerKind::Tv { .. } | RegularizerKind::NonconvexP { .. } => 1,
            _ => 2,
        }
    }

    pub fn is_convex(&self) -> bool {
        matches!(
            self.kind,
            RegularizerKind::Tikhonov { .. }
                | RegularizerKind::Tv { .. }
                | RegularizerKind::Hessian
                | RegularizerKind::MixedTvHessian { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            RegularizerKind::Tikhonov { .. } => "tikhonov",
            RegularizerKind::Tv { .. } => "tv",
            RegularizerKind::Hessian => "hessian",
            RegularizerKind::MixedTvHessian { .. } => "mixed_tv_hessian",
            RegularizerKind::TvLaplacian { .. } => "tv_laplacian",
            RegularizerKind::Elastica { .. } => "elastica",
            RegularizerKind::NonconvexP { .. } => "nonconvex_p",
        }
    }

    /// Length η of the derivative tuple in `dim` variables.
    pub fn tuple_len(&self, dim: usize) -> usize {
        eta(dim, self.order())
    }

    /// Same kind with a different smoothing parameter (kinds without one are returned unchanged).
    pub fn with_epsilon(&self, eps: f64) -> Self {
        let mut out = self.clone();
        match &mut out.kind {
            RegularizerKind::TvLaplacian { epsilon, .. } | RegularizerKind::Elastica { epsilon, .. } => *epsilon = eps,
            _ => {}
        }
        out
    }

    fn rho_at(rho: &[f64], node: usize) -> f64 {
        if rho.len() == 1 {
            rho[0]
        } else {
            rho[node]
        }
    }

    /// `R(t)` for the tuple `t` at grid node `node`.
    pub fn eval(&self, t: &[f64], dim: usize, node: usize) -> f64 {
        let t = Tuple { dim, t };
        match &self.kind {
            RegularizerKind::Tikhonov { p: 2 } => t.grad().iter().map(|v| v * v).sum(),
            RegularizerKind::Tikhonov { p } => pow_int(t.grad_norm(), *p),
            RegularizerKind::Tv { nu: 1 } => t.grad().iter().map(|v| v.abs()).sum(),
            RegularizerKind::Tv { .. } => t.grad_norm(),
            RegularizerKind::Hessian => t.hessian_norm(),
            RegularizerKind::MixedTvHessian { rho } => {
                let r = Self::rho_at(rho, node);
                r * t.hessian_norm() + (1.0 - r) * t.grad_norm()
            }
            RegularizerKind::TvLaplacian { rho1, rho2, epsilon, kappa } => {
                let s = (t.grad().iter().map(|v| v * v).sum::<f64>() + epsilon * epsilon).sqrt() / kappa;
                let lap = t.laplacian();
                rho1 * t.hessian_norm() + rho2 * lap * lap / (1.0 + s * s)
            }
            RegularizerKind::Elastica { rho1, rho2, epsilon } => {
                let g2 = t.grad().iter().map(|v| v * v).sum::<f64>();
                let s2 = g2 + epsilon * epsilon;
                let curvature = (t.laplacian() * s2 - t.hessian_form()) / (s2 * s2.sqrt());
                (rho1 + rho2 * curvature * curvature) * g2.sqrt()
            }
            RegularizerKind::NonconvexP { p } => t.grad_norm().powf(*p),
        }
    }

    /// An element of the subdifferential of a convex `R` at `t`.
    pub fn subgradient(&self, t: &[f64], dim: usize, node: usize) -> Result<Vec<f64>> {
        let tuple = Tuple { dim, t };
        let mut out = vec![0.0; t.len()];
        let unit_grad = |out: &mut [f64], scale: f64| {
            let n = tuple.grad_norm();
            if n > 0.0 {
                for (o, g) in out.iter_mut().zip(tuple.grad()) {
                    *o += scale * g / n;
                }
            }
        };
        let unit_hessian = |out: &mut [f64], scale: f64| {
            let n = tuple.hessian_norm();
            if n > 0.0 {
                for (k, (i, j, h)) in tuple.hessian_entries().into_iter().enumerate() {
                    out[dim + k] += scale * if i == j { h / n } else { 2.0 * h / n };
                }
            }
        };
        match &self.kind {
            RegularizerKind::Tikhonov { p } => {
                let n = tuple.grad_norm();
                let f = if *p == 1 { if n > 0.0 { 1.0 / n } else { 0.0 } } else { f64::from(*p) * pow_int(n, p - 2) };
                for (o, g) in out.iter_mut().zip(tuple.grad()) {
                    *o = f * g;
                }
            }
            RegularizerKind::Tv { nu: 1 } => {
                for (o, g) in out.iter_mut().zip(tuple.grad()) {
                    *o = if *g == 0.0 { 0.0 } else { g.signum() };
                }
            }
            RegularizerKind::Tv { .. } => unit_grad(&mut out, 1.0),
            RegularizerKind::Hessian => unit_hessian(&mut out, 1.0),
            RegularizerKind::MixedTvHessian { rho } => {
                let r = Self::rho_at(rho, node);
                unit_hessian(&mut out, r);
                unit_grad(&mut out, 1.0 - r);
            }
            _ => return Err(Error::Refused(format!("{} is not convex", self.name()))),
        }
        Ok(out)
    }
}

/// One representative of each catalog kind, with ε-smoothing `epsilon` for the smoothed kinds.
pub fn catalog(epsilon: f64) -> Vec<RegularizerSpec> {
    [
        RegularizerKind::Tikhonov { p: 2 },
        RegularizerKind::Tv { nu: 2 },
        RegularizerKind::Hessian,
        RegularizerKind::MixedTvHessian { rho: vec![0.5] },
        RegularizerKind::TvLaplacian { rho1: 1.0, rho2: 1.0, epsilon, kappa: 1.0 },
        RegularizerKind::Elastica { rho1: 1.0, rho2: 1.0, epsilon },
        RegularizerKind::NonconvexP { p: 0.5 },
    ]
    .into_iter()
    .map(|kind| RegularizerSpec { kind })
    .collect()
}
