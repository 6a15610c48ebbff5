use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{invalid, Error, Result};
use crate::linalg::matrix::{fix_phase, norm, CMatrix};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 80;
const POWER_MAX_ITERS: usize = 10_000;
/// Matrices whose smaller side reaches this size use power iteration in
/// [`dominant_triplet`] instead of a full Gram eigendecomposition.
pub const POWER_ITERATION_THRESHOLD: usize = 256;

/// Hermitian positive semidefinite matrix.
///
/// Conjugate symmetry holds within `Real::structure_tol()` relative to the
/// largest entry and the smallest eigenvalue is no lower than
/// `-structure_tol() * largest`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hermitian<T>(CMatrix<T>);

impl<T: Real> Hermitian<T> {
    /// Validates `m` and stores its exact Hermitian part.
    pub fn new(m: CMatrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(invalid(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(invalid("matrix contains non-finite entries"));
        }
        let tol = T::structure_tol();
        let scale = m.max_abs();
        if m.hermitian_defect() > tol * scale {
            return Err(invalid("matrix is not conjugate symmetric"));
        }
        let h = m.hermitian_part();
        let values = jacobi_eigen(&h, false)?.0;
        let largest = values.first().copied().unwrap_or_else(T::zero);
        let smallest = values.last().copied().unwrap_or_else(T::zero);
        if smallest < -tol * largest.abs().max(scale) {
            return Err(invalid(format!(
                "matrix is not positive semidefinite (smallest eigenvalue {smallest})"
            )));
        }
        Ok(Self(h))
    }

    /// Symmetrises and, if needed, clamps negative eigenvalues to zero.
    pub fn project(m: &CMatrix<T>) -> Result<Self> {
        if !m.is_square() || !m.is_finite() {
            return Err(invalid("projection needs a finite square matrix"));
        }
        let h = m.hermitian_part();
        let (values, vectors) = jacobi_eigen(&h, true)?;
        if values.iter().all(|&w| w >= T::zero()) {
            return Ok(Self(h));
        }
        let clamped: Vec<T> = values.iter().map(|&w| w.max(T::zero())).collect();
        Ok(Self(reconstruct(&vectors, &clamped)))
    }

    /// Wraps a matrix that is PSD by construction (sum of outer products,
    /// congruence of a PSD matrix), symmetrising away rounding.
    pub(crate) fn from_construction(m: CMatrix<T>) -> Self {
        debug_assert!(m.is_square());
        Self(m.hermitian_part())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.0
    }

    pub fn trace(&self) -> T {
        self.0.trace().re
    }
}

/// Eigendecomposition `A = Q diag(w) Q^H` with `w` descending.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianEig<T> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

/// Cyclic complex Jacobi eigendecomposition of a Hermitian PSD matrix.
///
/// Eigenvalues are sorted descending and every eigenvector column has its
/// first entry of largest modulus made real and nonnegative.
pub fn hermitian_eig<T: Real>(a: &Hermitian<T>) -> Result<HermitianEig<T>> {
    let (values, vectors) = jacobi_eigen(a.matrix(), true)?;
    Ok(HermitianEig { values, vectors })
}

/// Principal square root; negative eigenvalues are clamped to zero.
pub fn psd_sqrt<T: Real>(a: &Hermitian<T>) -> Result<Hermitian<T>> {
    let eig = hermitian_eig(a)?;
    let roots: Vec<T> = eig.values.iter().map(|&w| w.max(T::zero()).sqrt()).collect();
    Ok(Hermitian::from_construction(reconstruct(&eig.vectors, &roots)))
}

/// `Q diag(w) Q^H`.
pub fn reconstruct<T: Real>(q: &CMatrix<T>, w: &[T]) -> CMatrix<T> {
    assert_eq!(q.cols(), w.len());
    let n = q.rows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &wk) in w.iter().enumerate() {
        if wk == T::zero() {
            continue;
        }
        for i in 0..n {
            let qi = q[(i, k)].scale(wk);
            for j in 0..n {
                out[(i, j)] = out[(i, j)] + qi * q[(j, k)].conj();
            }
        }
    }
    out.hermitian_part()
}

/// Leading singular triplet `M ~ sigma * u * v^H`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularTriplet<T> {
    pub sigma: T,
    pub u: Vec<Complex<T>>,
    pub v: Vec<Complex<T>>,
}

/// Largest singular value with its left/right singular vectors.
///
/// The phase of `u` is fixed like an eigenvector; `v = M^H u / sigma`
/// follows from it.
pub fn dominant_triplet<T: Real>(m: &CMatrix<T>) -> Result<SingularTriplet<T>> {
    if !m.is_finite() {
        return Err(invalid("matrix contains non-finite entries"));
    }
    let (rows, cols) = (m.rows(), m.cols());
    if m.max_abs() == T::zero() {
        return Ok(SingularTriplet {
            sigma: T::zero(),
            u: unit_vector(rows, 0),
            v: unit_vector(cols, 0),
        });
    }
    let mut u = if rows.min(cols) < POWER_ITERATION_THRESHOLD {
        if rows <= cols {
            let gram = m.matmul(&m.adjoint());
            jacobi_eigen(&gram.hermitian_part(), true)?.1.column(0)
        } else {
            let gram = m.adjoint_mul(m);
            let v = jacobi_eigen(&gram.hermitian_part(), true)?.1.column(0);
            m.matvec(&v)
        }
    } else {
        let v = power_iteration(m)?;
        m.matvec(&v)
    };
    let un = norm(&u);
    if !(un > T::zero()) {
        return Err(Error::NumericalFailure("leading singular vector vanished".into()));
    }
    u.iter_mut().for_each(|z| *z = z.unscale(un));
    fix_phase(&mut u);
    let mut v = m.adjoint_matvec(&u);
    let sigma = norm(&v);
    v.iter_mut().for_each(|z| *z = z.unscale(sigma));
    Ok(SingularTriplet { sigma, u, v })
}

fn unit_vector<T: Real>(n: usize, k: usize) -> Vec<Complex<T>> {
    let mut e = vec![Complex::zero(); n];
    e[k] = Complex::one();
    e
}

/// Power iteration on `M^H M`, returning the unit right singular vector.
fn power_iteration<T: Real>(m: &CMatrix<T>) -> Result<Vec<Complex<T>>> {
    // Start from the conjugate of the heaviest row: it has a nonzero
    // component along the dominant right singular vector unless that row is
    // orthogonal to it.
    let heaviest = (0..m.rows())
        .max_by(|&a, &b| norm(m.row(a)).partial_cmp(&norm(m.row(b))).unwrap())
        .unwrap_or(0);
    let mut v: Vec<Complex<T>> = m.row(heaviest).iter().map(|z| z.conj()).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|z| *z = z.unscale(n0));
    let tol = T::lit(1e-12);
    for _ in 0..POWER_MAX_ITERS {
        let mut next = m.adjoint_matvec(&m.matvec(&v));
        let nn = norm(&next);
        if !(nn > T::zero()) {
            return Err(Error::NumericalFailure("power iteration collapsed".into()));
        }
        next.iter_mut().for_each(|z| *z = z.unscale(nn));
        // Phase-aligned step length; `1 - |<v, next>|` cannot resolve
        // angles much below sqrt(eps).
        let ov = crate::linalg::matrix::inner(&v, &next);
        let phase = if ov.norm() > T::zero() {
            ov.unscale(ov.norm())
        } else {
            Complex::new(T::one(), T::zero())
        };
        let step = v
            .iter()
            .zip(&next)
            .map(|(&a, &b)| (b - a * phase).norm_sqr())
            .sum::<T>()
            .sqrt();
        v = next;
        if step < tol {
            return Ok(v);
        }
    }
    Err(Error::NumericalFailure(format!(
        "power iteration did not converge in {POWER_MAX_ITERS} iterations"
    )))
}

/// Cholesky factor `A = L L^H` of a Hermitian positive definite matrix.
///
/// A pivot at or below `rel_tol * max(diag)` reports [`Error::RankDeficient`].
pub fn cholesky<T: Real>(a: &CMatrix<T>, rel_tol: T) -> Result<CMatrix<T>> {
    if !a.is_square() {
        return Err(invalid("cholesky needs a square matrix"));
    }
    let n = a.rows();
    let max_diag = (0..n).map(|i| a[(i, i)].re).fold(T::zero(), T::max);
    let floor = rel_tol * max_diag;
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d = d - l[(j, k)].norm_sqr();
        }
        if !(d > floor) {
            return Err(Error::RankDeficient);
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex::new(djj, T::zero());
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s.unscale(djj);
        }
    }
    Ok(l)
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn solve_hpd<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>, rel_tol: T) -> Result<CMatrix<T>> {
    let l = cholesky(a, rel_tol)?;
    let n = a.rows();
    if b.rows() != n {
        return Err(invalid("right-hand side row count mismatch"));
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s = s - l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        // backward: L^H x = y
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s = s - l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Jacobi eigen-solver on a Hermitian matrix (the strict lower triangle is
/// taken as the conjugate of the upper one).
///
/// Returns eigenvalues descending and, when `want_vectors`, phase-fixed
/// eigenvectors as columns.
pub(crate) fn jacobi_eigen<T: Real>(h: &CMatrix<T>, want_vectors: bool) -> Result<(Vec<T>, CMatrix<T>)> {
    if !h.is_finite() {
        return Err(invalid("matrix contains non-finite entries"));
    }
    let n = h.rows();
    let mut a = h.clone();
    let mut q = if want_vectors {
        CMatrix::identity(n)
    } else {
        CMatrix::zeros(0, 0)
    };
    let eps = T::epsilon();
    let floor = eps * eps * a.frobenius_norm();
    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for r in (p + 1)..n {
                let apq = a[(p, r)];
                let mag = apq.norm();
                if mag <= floor || mag <= eps * (a[(p, p)].re * a[(r, r)].re).abs().sqrt() {
                    continue;
                }
                rotated = true;
                rotate(&mut a, &mut q, p, r, apq, mag, want_vectors);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.partial_cmp(&a[(i, i)].re).unwrap());
    let values: Vec<T> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = if want_vectors {
        let mut sorted = CMatrix::zeros(n, n);
        for (k, &src) in order.iter().enumerate() {
            let mut col = q.column(src);
            fix_phase(&mut col);
            sorted.set_column(k, &col);
        }
        sorted
    } else {
        q
    };
    Ok((values, vectors))
}

/// One complex Jacobi rotation annihilating `a[p][r]`.
///
/// With `w = a_pr / |a_pr|` the rotation is `J = diag(1, conj(w)) * G`,
/// where `G` is the real Jacobi rotation of the 2x2 block
/// `[[a_pp, |a_pr|], [|a_pr|, a_rr]]`.
fn rotate<T: Real>(
    a: &mut CMatrix<T>,
    q: &mut CMatrix<T>,
    p: usize,
    r: usize,
    apr: Complex<T>,
    mag: T,
    want_vectors: bool,
) {
    let n = a.rows();
    let two = T::lit(2.0);
    let w = apr.unscale(mag);
    let wc = w.conj();
    let theta = (a[(r, r)].re - a[(p, p)].re) / (two * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;

    // A <- A J: columns p and r.
    for i in 0..n {
        let aip = a[(i, p)];
        let air = a[(i, r)];
        a[(i, p)] = aip.scale(c) - (wc * air).scale(s);
        a[(i, r)] = aip.scale(s) + (wc * air).scale(c);
    }
    // A <- J^H A: rows p and r.
    for j in 0..n {
        let apj = a[(p, j)];
        let arj = a[(r, j)];
        a[(p, j)] = apj.scale(c) - (w * arj).scale(s);
        a[(r, j)] = apj.scale(s) + (w * arj).scale(c);
    }
    a[(p, r)] = Complex::zero();
    a[(r, p)] = Complex::zero();
    a[(p, p)] = Complex::new(a[(p, p)].re, T::zero());
    a[(r, r)] = Complex::new(a[(r, r)].re, T::zero());

    if want_vectors {
        for i in 0..n {
            let qip = q[(i, p)];
            let qir = q[(i, r)];
            q[(i, p)] = qip.scale(c) - (wc * qir).scale(s);
            q[(i, r)] = qip.scale(s) + (wc * qir).scale(c);
        }
    }
}
