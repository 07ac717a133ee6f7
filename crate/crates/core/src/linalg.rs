//! Small dense symmetric-matrix helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const JITTER_RETRIES: usize = 3;

/// Replaces `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky factorization with a diagonal-jitter fallback.
///
/// A failed factorization is retried with `1e-9 · trace / d` added to the
/// diagonal, growing tenfold per retry, at most three times.
pub fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let d = m.nrows().max(1) as f64;
    let mut jitter = 1e-9 * (m.trace().abs() / d).max(f64::MIN_POSITIVE);
    for _ in 0..JITTER_RETRIES {
        let mut shifted = m.clone();
        for i in 0..m.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(shifted) {
            log::debug!("cholesky needed diagonal jitter {jitter:e}");
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::Conditioning(format!(
        "{}x{} matrix is not positive definite",
        m.nrows(),
        m.ncols()
    )))
}

/// ln |A| from a Cholesky factor.
pub fn ln_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Inverse of an SPD matrix, re-symmetrized.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut inv = cholesky(m)?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// True when `m` is symmetric and admits a plain Cholesky factorization.
pub fn is_spd(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return false;
            }
        }
    }
    Cholesky::new(m.clone()).is_some()
}

/// Row-major flattening, the storage used for matrix blocks of natural
/// parameters and sufficient statistics.
pub fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn unflatten(values: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, values)
}

/// xᵀ A x
pub fn quad_form(a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(a * x))
}
