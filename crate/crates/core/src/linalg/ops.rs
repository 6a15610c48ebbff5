//! Structural operations: Kronecker products, column-major vec/reshape and
//! the block rearrangement that turns a nearest-Kronecker-product problem
//! into a rank-1 approximation.

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::linalg::matrix::CMatrix;
use crate::scalar::Real;

/// Kronecker product `A ⊗ B`.
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<CMatrix<T>> {
    let rows = a
        .rows()
        .checked_mul(b.rows())
        .ok_or_else(|| invalid("Kronecker row count overflows"))?;
    let cols = a
        .cols()
        .checked_mul(b.cols())
        .ok_or_else(|| invalid("Kronecker column count overflows"))?;
    rows.checked_mul(cols)
        .ok_or_else(|| invalid("Kronecker entry count overflows"))?;
    let (br, bc) = (b.rows(), b.cols());
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    }))
}

/// Kronecker product of two vectors, `a ⊗ b`.
pub fn kron_vec<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Column-major stacking of the columns of `m`.
pub fn vec<T: Real>(m: &CMatrix<T>) -> Vec<Complex<T>> {
    let mut out = Vec::with_capacity(m.rows() * m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vec`]: fills an `n1 x n2` matrix column by column.
pub fn reshape<T: Real>(h: &[Complex<T>], n1: usize, n2: usize) -> Result<CMatrix<T>> {
    if n1 == 0 || n2 == 0 || n1.checked_mul(n2) != Some(h.len()) {
        return Err(invalid(format!(
            "cannot reshape a length-{} vector into {n1}x{n2}",
            h.len()
        )));
    }
    Ok(CMatrix::from_fn(n1, n2, |i, j| h[i + j * n1]))
}

fn check_blocks<T: Real>(r: &CMatrix<T>, n1: usize, n2: usize) -> Result<()> {
    if !r.is_square() || n1 == 0 || n2 == 0 || n1.checked_mul(n2) != Some(r.rows()) {
        return Err(invalid(format!(
            "a {}x{} matrix cannot be split into {n2}x{n2} blocks of size {n1}x{n1}",
            r.rows(),
            r.cols()
        )));
    }
    Ok(())
}

/// Rearranges an `n1*n2` square matrix, viewed as `n2 x n2` blocks `R_ij`
/// of size `n1 x n1`, into the `n2² x n1²` matrix whose rows are
/// `vec(R_11)ᵀ, vec(R_21)ᵀ, …, vec(R_{n2,n2})ᵀ` (block-column-major).
///
/// For `R = B ⊗ C` the result is exactly `vec(B) vec(C)ᵀ`.
pub fn rearrange<T: Real>(r: &CMatrix<T>, n1: usize, n2: usize) -> Result<CMatrix<T>> {
    check_blocks(r, n1, n2)?;
    let mut out = CMatrix::zeros(n2 * n2, n1 * n1);
    for bj in 0..n2 {
        for bi in 0..n2 {
            let row = bi + bj * n2;
            for c in 0..n1 {
                for a in 0..n1 {
                    out[(row, a + c * n1)] = r[(bi * n1 + a, bj * n1 + c)];
                }
            }
        }
    }
    Ok(out)
}

/// Inverse index map of [`rearrange`].
pub fn unrearrange<T: Real>(rt: &CMatrix<T>, n1: usize, n2: usize) -> Result<CMatrix<T>> {
    if rt.rows() != n2 * n2 || rt.cols() != n1 * n1 {
        return Err(invalid(format!(
            "expected a {}x{} rearranged matrix, got {}x{}",
            n2 * n2,
            n1 * n1,
            rt.rows(),
            rt.cols()
        )));
    }
    let n = n1 * n2;
    Ok(CMatrix::from_fn(n, n, |i, j| {
        let (bi, a) = (i / n1, i % n1);
        let (bj, c) = (j / n1, j % n1);
        rt[(bi + bj * n2, a + c * n1)]
    }))
}
