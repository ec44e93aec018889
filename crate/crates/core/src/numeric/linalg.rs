//! Dense linear algebra for the small (d <= 3) matrices used by the
//! parametric families: Cholesky factorization, solves, quadratic forms.

// index loops keep the i/j/k symmetry of the formulas visible
#![allow(clippy::needless_range_loop)]

use crate::error::{PragmaError, Result};

pub type Matrix = Vec<Vec<f64>>;

pub fn is_square(m: &Matrix) -> bool {
    let n = m.len();
    n > 0 && m.iter().all(|row| row.len() == n)
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    if !is_square(m) {
        return false;
    }
    let n = m.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[i][j] - m[j][i]).abs() > tol * m[i][j].abs().max(m[j][i].abs()).max(1.0) {
                return false;
            }
        }
    }
    true
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    if !is_square(m) {
        return Err(PragmaError::Config("matrix is not square".into()));
    }
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(PragmaError::numeric(format!(
                        "matrix is not positive definite (pivot {i} = {sum})"
                    )));
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Solve L z = b for lower-triangular L.
pub fn forward_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    z
}

/// x^T A^{-1} x given the Cholesky factor L of A.
pub fn quad_form_inv(l: &Matrix, x: &[f64]) -> f64 {
    forward_solve(l, x).iter().map(|z| z * z).sum()
}

/// x^T S x.
pub fn quad_form(s: &Matrix, x: &[f64]) -> f64 {
    let n = s.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += x[i] * s[i][j] * x[j];
        }
    }
    total
}

/// ln det(A) given the Cholesky factor L of A.
pub fn log_det_from_chol(l: &Matrix) -> f64 {
    2.0 * l.iter().enumerate().map(|(i, row)| row[i].ln()).sum::<f64>()
}

pub fn trace(m: &Matrix) -> f64 {
    m.iter().enumerate().map(|(i, row)| row[i]).sum()
}

/// tr(S Sigma) for square S and Sigma of equal size.
pub fn trace_product(s: &Matrix, sigma: &Matrix) -> f64 {
    let n = s.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += s[i][j] * sigma[j][i];
        }
    }
    total
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_and_quad_form_inverse() {
        let m = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let l = cholesky(&m).unwrap();
        // det = 8, inverse = [[3,-2],[-2,4]]/8
        let x = [1.0, -1.0];
        let expect = (3.0 + 2.0 + 2.0 + 4.0) / 8.0;
        assert!((quad_form_inv(&l, &x) - expect).abs() < 1e-12);
        assert!((log_det_from_chol(&l) - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let m = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(cholesky(&m).is_err());
    }

    #[test]
    fn trace_product_matches_direct() {
        let s = vec![vec![1.0, 0.5], vec![0.5, 2.0]];
        let sigma = vec![vec![3.0, 1.0], vec![1.0, 4.0]];
        // tr(S Sigma) = sum_ij S_ij Sigma_ji
        let expect = 1.0 * 3.0 + 0.5 * 1.0 + 0.5 * 1.0 + 2.0 * 4.0;
        assert!((trace_product(&s, &sigma) - expect).abs() < 1e-12);
    }
}
