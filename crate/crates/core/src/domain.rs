use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `Π [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Precondition("box bounds must be nonempty and of equal length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Precondition("box must have positive extent on every axis".into()));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    pub fn unit(dim: usize) -> Self {
        BoxDomain { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    pub fn symmetric(dim: usize, radius: f64) -> Self {
        BoxDomain { lo: vec![-radius; dim], hi: vec![radius; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Strictly inside the open box.
    pub fn is_interior(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a < *v && *v < *b)
    }

    pub fn is_boundary(&self, x: &[f64]) -> bool {
        self.contains(x) && !self.is_interior(x)
    }

    /// ∞-norm distance from an interior point to the boundary.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| (v - a).min(b - v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Cell midpoints of a uniform tensor grid with `cells` cells per axis, with the common cell volume.
    pub fn midpoints(&self, cells: usize) -> (Vec<Vec<f64>>, f64) {
        let d = self.dim();
        let steps: Vec<f64> = (0..d).map(|k| (self.hi[k] - self.lo[k]) / cells as f64).collect();
        let total = cells.pow(d as u32);
        let mut pts = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                let i = rem % cells;
                rem /= cells;
                p[k] = self.lo[k] + (i as f64 + 0.5) * steps[k];
            }
            pts.push(p);
        }
        (pts, steps.iter().product())
    }
}
