//! Reference solver for the convex fully discrete problem.

use serde::{Deserialize, Serialize};

use super::fd::FdObjective;
use super::{FidelityConfig, GridSpec, RegularizerKind, RegularizerSpec};
use crate::error::{Error, Result};

/// Iterations without a best-objective improvement above the tolerance before stopping.
pub const STAGNATION_WINDOW: usize = 10_000;
pub const MAX_ITERATIONS: usize = 20_000_000;
/// Oracle step at which refinement stops.
pub const ORACLE_FINEST_STEP: f64 = 1e-9;
pub const ORACLE_MAX_NODES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub field: Vec<f64>,
    pub objective: f64,
    pub final_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdSolution {
    pub field: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub stagnated: bool,
    pub oracle: Option<OracleResult>,
}

fn soft(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// Proximal subgradient descent with steps `t_k = t0/(k + 1)`, `t0 = 1/(α2 min ω_D)`:
/// a subgradient step on the regularizer followed by the exact prox of the fidelity.
pub fn fd_reference_solve(
    reg: &RegularizerSpec,
    fid: &FidelityConfig,
    grid: &GridSpec,
    tolerance: f64,
) -> Result<FdSolution> {
    if !reg.is_convex() {
        return Err(Error::Refused(format!("{} is not convex; no optimality certificate", reg.name())));
    }
    if !(fid.alpha2 > 0.0) {
        return Err(Error::Precondition("the reference solver needs α2 > 0".into()));
    }
    let small = match grid.dim() {
        1 => grid.len() <= 64,
        2 => grid.counts.iter().all(|&n| n <= 16),
        _ => false,
    };
    if !small {
        return Err(Error::Refused("reference solves are limited to 64 nodes in 1D and 16×16 in 2D".into()));
    }
    let objective = FdObjective::new(reg, fid, grid)?;
    let n = grid.len();
    let w_min = fid.data_weights.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(w_min > 0.0) {
        return Err(Error::Precondition("the reference solver needs positive data weights".into()));
    }
    let t0 = 1.0 / (fid.alpha2 * w_min);
    let mut u = fid.data.clone();
    let mut best = (objective.value(&u), u.clone());
    let mut last_improvement = 0usize;
    let mut reference = best.0;
    let mut s = vec![0.0; n];
    let mut k = 0usize;
    let mut stagnated = false;
    while k < MAX_ITERATIONS {
        s.iter_mut().for_each(|v| *v = 0.0);
        objective.regularizer_subgradient(&u, &mut s)?;
        let t = t0 / (k + 1) as f64;
        for i in 0..n {
            let w = fid.data_weights[i];
            let v = u[i] - t * s[i] - fid.data[i];
            u[i] = fid.data[i] + soft(v, t * fid.alpha1 * w) / (1.0 + 2.0 * t * fid.alpha2 * w);
        }
        k += 1;
        let f = objective.value(&u);
        if f < best.0 {
            best = (f, u.clone());
        }
        if best.0 < reference - tolerance {
            reference = best.0;
            last_improvement = k;
        } else if k - last_improvement >= STAGNATION_WINDOW {
            stagnated = true;
            break;
        }
    }
    let oracle = if n <= ORACLE_MAX_NODES && matches!(reg.kind, RegularizerKind::Tv { .. }) {
        Some(grid_search_oracle(&objective, fid)?)
    } else {
        None
    };
    Ok(FdSolution { field: best.1, objective: best.0, iterations: k, stagnated, oracle })
}

/// Coarse-to-fine grid search over `[min g, max g]^N`, which contains a TV minimiser
/// because clipping to the data range lowers both fidelity and total variation.
pub fn grid_search_oracle(objective: &FdObjective<'_>, fid: &FidelityConfig) -> Result<OracleResult> {
    let n = fid.data.len();
    if n > ORACLE_MAX_NODES {
        return Err(Error::Refused(format!("grid search over {n} unknowns")));
    }
    let lo = fid.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = fid.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(OracleResult { field: fid.data.clone(), objective: objective.value(&fid.data), final_step: 0.0 });
    }
    let mut step = (hi - lo) / 64.0;
    let mut center = vec![0.5 * (lo + hi); n];
    let mut half = 32i64;
    let mut best = (f64::INFINITY, center.clone());
    loop {
        let side = (2 * half + 1) as usize;
        let mut idx = vec![0usize; n];
        let mut u = vec![0.0; n];
        'outer: loop {
            for i in 0..n {
                u[i] = center[i] + (idx[i] as i64 - half) as f64 * step;
            }
            let f = objective.value(&u);
            if f < best.0 {
                best = (f, u.clone());
            }
            for i in 0..n {
                idx[i] += 1;
                if idx[i] < side {
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
        if step <= ORACLE_FINEST_STEP {
            break;
        }
        center = best.1.clone();
        step /= 4.0;
        half = 8;
    }
    Ok(OracleResult { field: best.1, objective: best.0, final_step: step })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv() -> RegularizerSpec {
        RegularizerSpec::new(RegularizerKind::Tv { nu: 1 }).unwrap()
    }

    #[test]
    fn three_node_tv_matches_oracle() {
        let grid = GridSpec::unit(vec![3]).unwrap();
        let fid = FidelityConfig::new(0.0, 1.0, vec![0.0, 1.0, 0.0]).unwrap().with_reg_weight(1.0);
        let sol = fd_reference_solve(&tv(), &fid, &grid, 1e-12).unwrap();
        let oracle = sol.oracle.clone().unwrap();
        assert!((sol.objective - oracle.objective).abs() <= 1e-6, "{} vs {}", sol.objective, oracle.objective);
        assert!((oracle.objective - 2.0 / 9.0).abs() <= 1e-9);
        assert!((sol.field[0] - sol.field[2]).abs() <= 1e-8);
    }

    #[test]
    fn vanishing_regularization_returns_data() {
        let grid = GridSpec::unit(vec![4]).unwrap();
        let fid = FidelityConfig::new(0.0, 1.0, vec![0.3, -0.2, 0.9, 0.1]).unwrap().with_reg_weight(0.0);
        let sol = fd_reference_solve(&tv(), &fid, &grid, 1e-12).unwrap();
        assert_eq!(sol.field, fid.data);
    }

    #[test]
    fn nonconvex_kinds_are_refused() {
        let grid = GridSpec::unit(vec![3]).unwrap();
        let fid = FidelityConfig::new(0.0, 1.0, vec![0.0, 1.0, 0.0]).unwrap();
        let r = RegularizerSpec::new(RegularizerKind::NonconvexP { p: 0.5 }).unwrap();
        assert!(matches!(fd_reference_solve(&r, &fid, &grid, 1e-9), Err(Error::Refused(_))));
    }

    #[test]
    fn tikhonov_matches_linear_solve() {
        // (I·2α2ω + 2ω_R DᵀD) u = 2α2ω g
        let grid = GridSpec::unit(vec![4]).unwrap();
        let fid = FidelityConfig::new(0.0, 1.0, vec![0.0, 1.0, 0.5, 2.0]).unwrap().with_reg_weight(0.01);
        let r = RegularizerSpec::new(RegularizerKind::Tikhonov { p: 2 }).unwrap();
        let sol = fd_reference_solve(&r, &fid, &grid, 1e-14).unwrap();
        let obj = FdObjective::new(&r, &fid, &grid).unwrap();
        let h = 0.25;
        let mut a = nalgebra::DMatrix::<f64>::zeros(4, 4);
        for i in 0..4 {
            a[(i, i)] += 2.0 * 0.25;
        }
        for i in 0..3 {
            let c = 2.0 * 0.01 / (h * h);
            a[(i, i)] += c;
            a[(i + 1, i + 1)] += c;
            a[(i, i + 1)] -= c;
            a[(i + 1, i)] -= c;
        }
        let b = nalgebra::DVector::from_vec(fid.data.iter().map(|g| 0.5 * g).collect());
        let exact: Vec<f64> = a.lu().solve(&b).unwrap().iter().cloned().collect();
        assert!(sol.objective - obj.value(&exact) <= 1e-8);
    }
}
