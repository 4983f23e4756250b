//! Dense complex linear-algebra helpers shared by the channel, estimation and
//! combining stages. Everything here is a thin layer over nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{numeric, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn cplx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// (A + A^H)/2. Covariance assemblies accumulate rounding asymmetry; the
/// eigensolver expects an exactly self-adjoint input.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * cplx(0.5)
}

pub fn max_hermitian_asymmetry(a: &CMat) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermitian square root with negative eigenvalues clipped at zero.
///
/// Correlated RIS covariances are rank-deficient by construction, so tiny
/// negative eigenvalues are expected; anything materially negative relative
/// to the trace is rejected.
pub fn hermitian_sqrt(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let eig = SymmetricEigen::new(hermitize(a));
    let trace = eig.eigenvalues.iter().sum::<f64>().max(0.0);
    let floor = -1e-8 * (trace / n as f64).max(1e-300) - 1e-12;
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < floor {
            return Err(numeric(format!(
                "covariance eigenvalue {lambda:.3e} below tolerance {floor:.3e}"
            )));
        }
        let s = cplx(lambda.max(0.0).sqrt());
        scaled.column_mut(j).scale_mut(1.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(&scaled * eig.eigenvectors.adjoint())
}

/// Symmetric square root of a real covariance, with one retry after adding
/// diagonal jitter (1e-10) when the plain factorization fails.
pub fn real_sym_sqrt_jittered(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    for jitter in [0.0, 1e-10] {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        let sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let trace: f64 = eig.eigenvalues.iter().sum();
        if min < -1e-8 * trace.abs().max(1.0) {
            continue;
        }
        let mut scaled = eig.eigenvectors.clone();
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            let s = lambda.max(0.0).sqrt();
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= s;
            }
        }
        return Ok(&scaled * eig.eigenvectors.transpose());
    }
    Err(numeric("shadow-fading covariance not PSD after jitter"))
}

/// Solves A X = B for Hermitian positive-definite A without forming A^{-1}.
pub fn hpd_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    let chol = Cholesky::new(hermitize(a))
        .ok_or_else(|| numeric("Cholesky failed: matrix not positive definite"))?;
    Ok(chol.solve(b))
}

pub fn hpd_solve_vec(a: &CMat, b: &CVec) -> Result<CVec> {
    let chol = Cholesky::new(hermitize(a))
        .ok_or_else(|| numeric("Cholesky failed: matrix not positive definite"))?;
    Ok(chol.solve(b))
}

/// log2 det(A) for Hermitian positive-definite A.
pub fn log2_det_hpd(a: &CMat) -> Result<f64> {
    let chol = Cholesky::new(hermitize(a))
        .ok_or_else(|| numeric("Cholesky failed in log-det"))?;
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        acc += chol.l_dirty()[(i, i)].re.ln();
    }
    Ok(2.0 * acc / std::f64::consts::LN_2)
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    SymmetricEigen::new(hermitize(a))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// tr(A B) without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex64::default();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// x^H A y.
pub fn quad_form(x: &CVec, a: &CMat, y: &CVec) -> Complex64 {
    (x.adjoint() * a * y)[(0, 0)]
}

pub fn trace(a: &CMat) -> Complex64 {
    let mut acc = Complex64::default();
    for i in 0..a.nrows() {
        acc += a[(i, i)];
    }
    acc
}

/// Identity scaled by `s`.
pub fn scaled_identity(n: usize, s: f64) -> CMat {
    CMat::from_diagonal_element(n, n, cplx(s))
}
