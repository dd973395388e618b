//! Small dense helpers shared by the estimators and the SEM lab.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Gram matrices with reciprocal condition below this are treated as singular.
pub const RCOND_MIN: f64 = 1e-12;

/// Relative floor applied to eigenvalues before taking symmetric roots.
pub const EIG_FLOOR: f64 = 1e-14;

/// Ratio of smallest to largest absolute eigenvalue of a symmetric matrix.
/// For a Gram matrix this is the reciprocal 2-norm condition number.
pub fn rcond_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for v in eig.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if !(hi > 0.0) || !lo.is_finite() {
        return 0.0;
    }
    lo / hi
}

pub fn check_gram(m: &DMatrix<f64>, which: &'static str) -> Result<f64> {
    let rc = rcond_sym(m);
    if rc < RCOND_MIN {
        return Err(Error::SingularGram { which, rcond: rc });
    }
    Ok(rc)
}

fn sym_power(m: &DMatrix<f64>, power: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(*v));
    let floor = EIG_FLOOR * top;
    let vals = eig.eigenvalues.map(|v| v.max(floor).powf(power));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// S with S S = M^{-1}, eigenvalues floored at `EIG_FLOOR * max`.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_power(m, -0.5)
}

pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_power(m, 0.5)
}

/// Solves a square system after a conditioning check on the (symmetric) matrix.
pub fn solve_checked(m: &DMatrix<f64>, b: &DVector<f64>, which: &'static str) -> Result<DVector<f64>> {
    check_gram(m, which)?;
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    m.clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularGram { which, rcond: 0.0 })
}

/// Columns of `m` minus their least-squares projection on the columns of `a`.
/// With no columns in `a` this is `m` itself.
pub fn residualize(a: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    if a.ncols() == 0 {
        return m.clone();
    }
    let q = a.clone().qr().q();
    m - &q * (q.transpose() * m)
}

/// Smallest eigenvalue of the pencil (w1, w), i.e. of w^{-1} w1, for symmetric
/// `w1` and positive definite `w`.
pub fn min_generalized_eigenvalue(w1: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<f64> {
    if w.nrows() != w1.nrows() || w.ncols() != w1.ncols() || w.nrows() != w.ncols() {
        return Err(Error::DimensionMismatch("pencil matrices must be square and equal-sized".into()));
    }
    check_gram(w, "W")?;
    let chol = w
        .clone()
        .cholesky()
        .ok_or(Error::SingularGram { which: "W", rcond: 0.0 })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::SingularGram { which: "W", rcond: 0.0 })?;
    let mut c = &linv * w1 * linv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c).eigenvalues;
    Ok(eig.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Symmetric part, to wash out rounding asymmetry before eigen-decompositions.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Moore-Penrose pseudo-inverse with singular values below `tol * max` dropped.
pub fn pinv(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let top = svd.singular_values.iter().fold(0.0_f64, |a, v| a.max(*v));
    let cut = tol * top;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let inv = svd.singular_values.map(|s| if s > cut { 1.0 / s } else { 0.0 });
    vt.transpose() * DMatrix::from_diagonal(&inv) * u.transpose()
}
