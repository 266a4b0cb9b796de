//! Dense numeric kernel: eigenvalues with residual checks, complex solves,
//! matrix exponentials and small symmetric eigenproblems.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Residual tolerance on `sigma_min(A - lambda I)` relative to `max(|A|, 1)`.
pub const EIG_RESIDUAL_TOL: f64 = 1e-8;

const SCHUR_MAX_ITER: usize = 10_000;

pub fn norm_fro(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// Eigenvalues of a real square matrix via the real Schur form.
///
/// Every eigenvalue is checked by `sigma_min(A - lambda I) <= tol * max(|A|, 1)`,
/// which is equivalent to the existence of a unit vector with a small residual.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!(
            "eigenvalues of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric {
            what: "non-finite matrix entry".into(),
            residual: f64::NAN,
        });
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or_else(|| {
        Error::Numeric {
            what: "Schur iteration did not converge".into(),
            residual: f64::NAN,
        }
    })?;
    let eigs: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();

    let scale = norm_fro(a).max(1.0);
    let ac = to_complex(a);
    for &lam in &eigs {
        let mut shifted = ac.clone();
        for i in 0..n {
            shifted[(i, i)] -= lam;
        }
        let sv = shifted.singular_values();
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(smin <= EIG_RESIDUAL_TOL * scale) {
            return Err(Error::Numeric {
                what: format!("eigenvalue {lam} failed the residual check"),
                residual: smin / scale,
            });
        }
    }
    Ok(eigs)
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Solves `M X = B` for complex `M`; `None` when `M` is numerically singular.
pub fn solve_complex(m: DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let lu = m.lu();
    // Reject pivots that are tiny relative to the matrix scale.
    let u = lu.u();
    let min_pivot = (0..u.nrows())
        .map(|i| u[(i, i)].norm())
        .fold(f64::INFINITY, f64::min);
    if u.nrows() > 0 && min_pivot <= 1e-13 * scale {
        return None;
    }
    lu.solve(b)
}

/// Matrix exponential `exp(A t)`.
pub fn expm(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    (a * t).exp()
}

/// Discretizes `x' = A x + B u` over a step `t` with `u` held constant,
/// returning `(Phi, Gamma)` from the augmented exponential `exp([[A, B], [0, 0]] t)`.
pub fn zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, m)).copy_from(b);
    let e = expm(&aug, t);
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

/// Largest eigenvalue of a symmetric matrix (the upper triangle is mirrored first).
pub fn max_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest singular value of a complex matrix.
pub fn sigma_max(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

pub fn column(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_rotation_are_imaginary_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let mut e = eigenvalues(&a).unwrap();
        e.sort_by(|x, y| x.im.partial_cmp(&y.im).unwrap());
        assert!((e[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((e[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn zoh_of_scalar_integrator() {
        let a = DMatrix::from_element(1, 1, 0.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        let (phi, gamma) = zoh(&a, &b, 0.5);
        assert!((phi[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((gamma[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zoh_of_first_order_lag() {
        let a = DMatrix::from_element(1, 1, -2.0);
        let b = DMatrix::from_element(1, 1, 3.0);
        let (phi, gamma) = zoh(&a, &b, 0.7);
        assert!((phi[(0, 0)] - (-1.4f64).exp()).abs() < 1e-14);
        assert!((gamma[(0, 0)] - 1.5 * (1.0 - (-1.4f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn singular_complex_solve_is_rejected() {
        let m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        let b = DMatrix::from_element(2, 1, Complex64::new(1.0, 0.0));
        assert!(solve_complex(m, &b).is_none());
    }
}
