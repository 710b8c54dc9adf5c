//! Thomas algorithm for scalar and 3x3 block tridiagonal systems.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

const PIVOT_FLOOR: f64 = 1e-300;

/// Solves `lower[k] x[k-1] + diag[k] x[k] + upper[k] x[k+1] = rhs[k]` in place.
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
) -> Result<()> {
    let n = rhs.len();
    assert!(lower.len() == n && diag.len() == n && upper.len() == n);
    if n == 0 {
        return Ok(());
    }
    let mut c = vec![0.0; n];
    let mut piv = diag[0];
    if !(piv.abs() > PIVOT_FLOOR) {
        return Err(Error::SingularSystem { row: 0, pivot: piv });
    }
    c[0] = upper[0] / piv;
    rhs[0] /= piv;
    for k in 1..n {
        piv = diag[k] - lower[k] * c[k - 1];
        if !(piv.abs() > PIVOT_FLOOR) || !piv.is_finite() {
            return Err(Error::SingularSystem { row: k, pivot: piv });
        }
        c[k] = upper[k] / piv;
        rhs[k] = (rhs[k] - lower[k] * rhs[k - 1]) / piv;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= c[k] * rhs[k + 1];
    }
    Ok(())
}

/// Block version with 3x3 blocks.
pub fn solve_block_tridiagonal(
    lower: &[Matrix3<f64>],
    diag: &[Matrix3<f64>],
    upper: &[Matrix3<f64>],
    rhs: &mut [Vector3<f64>],
) -> Result<()> {
    let n = rhs.len();
    assert!(lower.len() == n && diag.len() == n && upper.len() == n);
    if n == 0 {
        return Ok(());
    }
    let mut c: Vec<Matrix3<f64>> = vec![Matrix3::zeros(); n];
    let inv = |m: Matrix3<f64>, row: usize| -> Result<Matrix3<f64>> {
        let det = m.determinant();
        if !(det.abs() > PIVOT_FLOOR) || !det.is_finite() {
            return Err(Error::SingularSystem { row, pivot: det });
        }
        m.try_inverse()
            .ok_or(Error::SingularSystem { row, pivot: det })
    };
    let mut piv_inv = inv(diag[0], 0)?;
    c[0] = piv_inv * upper[0];
    rhs[0] = piv_inv * rhs[0];
    for k in 1..n {
        piv_inv = inv(diag[k] - lower[k] * c[k - 1], k)?;
        c[k] = piv_inv * upper[k];
        rhs[k] = piv_inv * (rhs[k] - lower[k] * rhs[k - 1]);
    }
    for k in (0..n - 1).rev() {
        let next = rhs[k + 1];
        rhs[k] -= c[k] * next;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_matches_dense_product() {
        let n = 9;
        let lower: Vec<f64> = (0..n).map(|k| -0.3 - 0.01 * k as f64).collect();
        let upper: Vec<f64> = (0..n).map(|k| -0.7 + 0.02 * k as f64).collect();
        let diag: Vec<f64> = (0..n).map(|k| 2.0 + 0.1 * k as f64).collect();
        let x: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|k| {
                let mut s = diag[k] * x[k];
                if k > 0 {
                    s += lower[k] * x[k - 1];
                }
                if k + 1 < n {
                    s += upper[k] * x[k + 1];
                }
                s
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut b).unwrap();
        for k in 0..n {
            assert!((b[k] - x[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_is_reported() {
        let mut b = vec![1.0, 1.0];
        let e = solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &mut b).unwrap_err();
        assert!(matches!(e, Error::SingularSystem { row: 0, .. }));
    }

    #[test]
    fn block_matches_dense_product() {
        let n = 6;
        let mk =
            |k: usize, s: f64| Matrix3::from_fn(|r, c| s * (((r * 3 + c + k) as f64) * 0.37).sin());
        let lower: Vec<_> = (0..n).map(|k| mk(k, 0.2)).collect();
        let upper: Vec<_> = (0..n).map(|k| mk(k + 7, 0.2)).collect();
        let diag: Vec<_> = (0..n)
            .map(|k| Matrix3::identity() * 3.0 + mk(k + 3, 0.3))
            .collect();
        let x: Vec<Vector3<f64>> = (0..n)
            .map(|k| Vector3::new(k as f64, (k as f64).cos(), 1.0 - k as f64 * 0.5))
            .collect();
        let mut b: Vec<Vector3<f64>> = (0..n)
            .map(|k| {
                let mut s = diag[k] * x[k];
                if k > 0 {
                    s += lower[k] * x[k - 1];
                }
                if k + 1 < n {
                    s += upper[k] * x[k + 1];
                }
                s
            })
            .collect();
        solve_block_tridiagonal(&lower, &diag, &upper, &mut b).unwrap();
        for k in 0..n {
            assert!((b[k] - x[k]).norm() < 1e-12);
        }
    }
}
