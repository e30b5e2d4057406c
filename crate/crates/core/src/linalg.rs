use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let s = a.singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// LU solve followed by two steps of iterative refinement.
pub fn solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    let mut x = lu.solve(b).ok_or_else(|| Error::Precondition("singular linear system".into()))?;
    for _ in 0..2 {
        let r = b - a * &x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
    }
    Ok(x)
}

/// Unit right-singular vector belonging to the smallest singular value of a (possibly wide) matrix,
/// with the singular values of the square-padded matrix.
pub fn smallest_right_singular_vector(a: &DMatrix<f64>) -> (DVector<f64>, Vec<f64>) {
    let (rows, cols) = a.shape();
    let mut square = DMatrix::zeros(rows.max(cols), cols);
    square.view_mut((0, 0), (rows, cols)).copy_from(a);
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &s)| if s < bv { (i, s) } else { (bi, bv) });
    let mut v: DVector<f64> = v_t.row(k).transpose();
    // Fix the sign so the largest-magnitude entry is positive.
    let (imax, _) = v.iter().enumerate().fold((0, 0.0), |(bi, bv), (i, &x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) });
    if v[imax] < 0.0 {
        v = -v;
    }
    let n = v.norm();
    (v / n, svd.singular_values.iter().copied().collect())
}
