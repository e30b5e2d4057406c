use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const GAP_FLOOR: f64 = 1e-6;
pub const MAX_ATTEMPTS: usize = 1000;

fn projections(points: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    points.iter().map(|x| x.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// True iff the projections `v·x_i` are pairwise separated by at least `GAP_FLOOR` times their spread.
pub fn separates(points: &[Vec<f64>], v: &[f64]) -> bool {
    let mut p = projections(points, v);
    if p.len() < 2 {
        return true;
    }
    p.sort_by(f64::total_cmp);
    let spread = p[p.len() - 1] - p[0];
    let gap = p.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    spread > 0.0 && gap >= GAP_FLOOR * spread
}

/// Unit vector whose projections keep the points apart; deterministic in `seed`.
pub fn separating_direction(points: &[Vec<f64>], seed: u64) -> Result<Vec<f64>> {
    let d = points.first().map_or(1, Vec::len);
    for (i, a) in points.iter().enumerate() {
        if a.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: a.len() });
        }
        if points[..i].iter().any(|b| b == a) {
            return Err(Error::Precondition(format!("repeated point {a:?}")));
        }
    }
    if d == 1 {
        return Ok(vec![1.0]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= n);
        if separates(points, &v) {
            return Ok(v);
        }
    }
    Err(Error::NoSeparatingDirection { attempts: MAX_ATTEMPTS })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimension_uses_identity() {
        assert_eq!(separating_direction(&[vec![0.3], vec![-1.0]], 9).unwrap(), vec![1.0]);
    }

    #[test]
    fn diagonal_direction_is_rejected() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(!separates(&pts, &[s, -s]));
        let v = separating_direction(&pts, 1).unwrap();
        assert!(separates(&pts, &v));
    }

    #[test]
    fn deterministic_in_seed() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()]).collect();
        let a = separating_direction(&pts, 42).unwrap();
        assert_eq!(a, separating_direction(&pts, 42).unwrap());
        let p = projections(&pts, &a);
        for i in 0..p.len() {
            for j in 0..i {
                assert!(p[i] != p[j]);
            }
        }
    }

    #[test]
    fn repeated_points_rejected() {
        assert!(separating_direction(&[vec![1.0, 2.0], vec![1.0, 2.0]], 0).is_err());
    }
}
