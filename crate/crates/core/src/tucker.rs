//! Tucker-structured rotation matrix `R̂ = (U⊗V) diag(λ) (U⊗V)^H`.
//!
//! The closed form proceeds in two stages:
//!
//! 1. With the core constrained to `λ = λ₁⊗λ₂`, `R̂ = B⊗C` and the best
//!    `B⊗C` in Frobenius norm comes from the leading singular triplet
//!    `(ϱ², u, v)` of the block rearrangement of `R`: `vec(B) = ϱu`,
//!    `vec(C) = ϱ conj(v)` (the conjugate because the triplet is returned as
//!    `σ u v^H` while the rearrangement of `B⊗C` is `vec(B) vec(C)ᵀ`).
//!    `U` and `V` are the eigenbases of `B` and `C`.
//! 2. For these `U`, `V` the unconstrained optimal core is the diagonal of
//!    `(U⊗V)^H R (U⊗V)`; the off-diagonal part is the irreducible residual.
//!
//! `V` is `n1 x n1`, `U` is `n2 x n2`, and `n1 * n2` is the dimension of `R`.

use num_complex::Complex;

use crate::correlation::CorrelationEstimate;
use crate::error::{invalid, Error, Result};
use crate::linalg::{dominant_triplet, hermitian_eig, kron, rearrange, reshape, CMatrix, Hermitian};
use crate::scalar::Real;

/// The three feedback units `(V, U, λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerRotation<T> {
    /// Horizontal-direction unitary, `n1 x n1`.
    pub v: CMatrix<T>,
    /// Vertical-direction unitary, `n2 x n2`.
    pub u: CMatrix<T>,
    /// Nonnegative core, length `n1 * n2`.
    pub lambda: Vec<T>,
}

fn unitarity_residual<T: Real>(q: &CMatrix<T>) -> T {
    (&q.adjoint_mul(q) - &CMatrix::identity(q.cols())).frobenius_norm()
}

impl<T: Real> TuckerRotation<T> {
    /// Checks shapes, unitarity (1e-9 in double precision) and `λ ⪰ 0`.
    pub fn new(v: CMatrix<T>, u: CMatrix<T>, lambda: Vec<T>) -> Result<Self> {
        if !v.is_square() || !u.is_square() {
            return Err(invalid("U and V must be square"));
        }
        if lambda.len() != v.rows() * u.rows() {
            return Err(invalid(format!(
                "core has length {}, expected {}",
                lambda.len(),
                v.rows() * u.rows()
            )));
        }
        let tol = T::lit(1e-9).max(T::structure_tol());
        if unitarity_residual(&v) > tol || unitarity_residual(&u) > tol {
            return Err(invalid("U and V must be unitary"));
        }
        if lambda.iter().any(|&l| !(l >= T::zero()) || !l.is_finite()) {
            return Err(invalid("core entries must be finite and nonnegative"));
        }
        Ok(Self { v, u, lambda })
    }

    pub fn n1(&self) -> usize {
        self.v.rows()
    }

    pub fn n2(&self) -> usize {
        self.u.rows()
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Real numbers needed to transmit the three units.
    pub fn stored_reals(&self) -> usize {
        2 * self.n1() * self.n1() + 2 * self.n2() * self.n2() + self.dim()
    }

    /// Real numbers needed to transmit the full `n_t x n_t` complex matrix.
    pub fn full_matrix_reals(&self) -> usize {
        2 * self.dim() * self.dim()
    }

    fn basis(&self) -> CMatrix<T> {
        kron(&self.u, &self.v).expect("factor sizes are small")
    }
}

/// `B⊗C` factors of the nearest Kronecker product.
#[derive(Clone, Debug, PartialEq)]
pub struct KronFactors<T> {
    /// `n2 x n2`, paired with `U`.
    pub factor_b: Hermitian<T>,
    /// `n1 x n1`, paired with `V`; scaled so that `trace(C) = n1`.
    pub factor_c: Hermitian<T>,
    /// `ϱ`, the square root of the leading singular value of the
    /// rearranged matrix.
    pub sigma: T,
}

fn check_split<T: Real>(est: &CorrelationEstimate<T>, n1: usize, n2: usize) -> Result<()> {
    if n1 == 0 || n2 == 0 || n1.checked_mul(n2) != Some(est.dim()) {
        return Err(invalid(format!("{n1} x {n2} does not factor dimension {}", est.dim())));
    }
    Ok(())
}

/// Frobenius-nearest `B⊗C` to `R` via rearrangement and a rank-1 SVD.
pub fn nkp_decompose<T: Real>(est: &CorrelationEstimate<T>, n1: usize, n2: usize) -> Result<KronFactors<T>> {
    check_split(est, n1, n2)?;
    let rt = rearrange(est.matrix(), n1, n2)?;
    let triplet = dominant_triplet(&rt)?;
    let rho = triplet.sigma.sqrt();
    if !(rho > T::zero()) {
        return Err(Error::NumericalFailure("rearranged matrix is zero".into()));
    }
    let vec_b: Vec<Complex<T>> = triplet.u.iter().map(|z| z.scale(rho)).collect();
    let vec_c: Vec<Complex<T>> = triplet.v.iter().map(|z| z.conj().scale(rho)).collect();
    let mut b = reshape(&vec_b, n2, n2)?;
    let mut c = reshape(&vec_c, n1, n1)?;

    // The triplet fixes B⊗C only up to B -> zB, C -> C/z. Choose z so that
    // trace(B) is real positive, then move the scale so that trace(C) = n1.
    let tb = b.trace();
    if tb.norm() == T::zero() {
        return Err(Error::NumericalFailure("Kronecker factor has zero trace".into()));
    }
    let phase = tb.conj().unscale(tb.norm());
    b = b.scale(phase);
    c = c.scale(phase.conj());
    let tc = c.trace().re;
    if !(tc > T::zero()) {
        return Err(Error::NumericalFailure("Kronecker factor is not positive".into()));
    }
    let alpha = T::lit(n1 as f64) / tc;
    let c = c.scale_real(alpha);
    let b = b.scale_real(T::one() / alpha);

    let to_psd = |m: CMatrix<T>| {
        Hermitian::new(m.hermitian_part()).map_err(|e| Error::NumericalFailure(format!("Kronecker factor: {e}")))
    };
    Ok(KronFactors {
        factor_b: to_psd(b)?,
        factor_c: to_psd(c)?,
        sigma: rho,
    })
}

/// Eigendecompositions of the two factors.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorBases<T> {
    /// Eigenvectors of `factor_b`.
    pub u: CMatrix<T>,
    /// Eigenvectors of `factor_c`.
    pub v: CMatrix<T>,
    /// Eigenvalues of `factor_b` (λ₁), descending.
    pub lambda_b: Vec<T>,
    /// Eigenvalues of `factor_c` (λ₂), descending.
    pub lambda_c: Vec<T>,
}

impl<T: Real> FactorBases<T> {
    /// Kronecker-structured core `λ₁⊗λ₂`, for which the rotation equals
    /// `B⊗C` exactly.
    pub fn structured_core(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.lambda_b.len() * self.lambda_c.len());
        for &b in &self.lambda_b {
            out.extend(self.lambda_c.iter().map(|&c| (b * c).max(T::zero())));
        }
        out
    }
}

pub fn factors_to_unitaries<T: Real>(f: &KronFactors<T>) -> Result<FactorBases<T>> {
    let eb = hermitian_eig(&f.factor_b)?;
    let ec = hermitian_eig(&f.factor_c)?;
    Ok(FactorBases {
        u: eb.vectors,
        v: ec.vectors,
        lambda_b: eb.values,
        lambda_c: ec.values,
    })
}

/// Minimiser over `λ` of `||R - (U⊗V) diag(λ) (U⊗V)^H||` for fixed `U`, `V`:
/// the real diagonal of `(U⊗V)^H R (U⊗V)`, clamped at zero.
pub fn optimal_core<T: Real>(est: &CorrelationEstimate<T>, u: &CMatrix<T>, v: &CMatrix<T>) -> Result<Vec<T>> {
    let w = kron(u, v)?;
    if w.rows() != est.dim() {
        return Err(invalid("unitary sizes do not match the correlation dimension"));
    }
    let rw = est.matrix().matmul(&w);
    let n = w.cols();
    Ok((0..n)
        .map(|k| {
            let d = (0..w.rows()).fold(Complex::new(T::zero(), T::zero()), |s, i| {
                s + w[(i, k)].conj() * rw[(i, k)]
            });
            d.re.max(T::zero())
        })
        .collect())
}

/// `R̂ = (U⊗V) diag(λ) (U⊗V)^H`.
pub fn build_rotation<T: Real>(t: &TuckerRotation<T>) -> Hermitian<T> {
    Hermitian::from_construction(crate::linalg::reconstruct(&t.basis(), &t.lambda))
}

/// `R̂^{1/2} = (U⊗V) diag(√λ) (U⊗V)^H`, read off the known eigenstructure.
pub fn rotation_sqrt<T: Real>(t: &TuckerRotation<T>) -> Hermitian<T> {
    let roots: Vec<T> = t.lambda.iter().map(|l| l.sqrt()).collect();
    Hermitian::from_construction(crate::linalg::reconstruct(&t.basis(), &roots))
}

/// Frobenius distance between a correlation matrix and a rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mismatch<T> {
    pub absolute: T,
    /// `absolute / ||R||`.
    pub relative: T,
}

pub fn mismatch<T: Real>(est: &CorrelationEstimate<T>, t: &TuckerRotation<T>) -> Result<Mismatch<T>> {
    if t.dim() != est.dim() {
        return Err(invalid("rotation and correlation dimensions differ"));
    }
    let r_hat = build_rotation(t);
    let absolute = (est.matrix() - r_hat.matrix()).frobenius_norm();
    let norm = est.matrix().frobenius_norm();
    Ok(Mismatch {
        absolute,
        relative: absolute / norm,
    })
}

/// Nearest Kronecker product, factor eigenbases, then the optimal core.
pub fn tucker_pipeline<T: Real>(est: &CorrelationEstimate<T>, n1: usize, n2: usize) -> Result<TuckerRotation<T>> {
    let factors = nkp_decompose(est, n1, n2)?;
    let bases = factors_to_unitaries(&factors)?;
    let lambda = optimal_core(est, &bases.u, &bases.v)?;
    TuckerRotation::new(bases.v, bases.u, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::CorrelationMethod;
    use crate::linalg::{hermitian_eig, HermitianEig};
    use crate::rng::{stream, StreamRng};
    use rand::Rng;

    type C = Complex<f64>;

    fn random_matrix(rng: &mut StreamRng, r: usize, c: usize) -> CMatrix<f64> {
        CMatrix::from_fn(r, c, |_, _| {
            C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn random_psd(rng: &mut StreamRng, n: usize) -> CMatrix<f64> {
        let x = random_matrix(rng, n, n);
        x.matmul(&x.adjoint())
    }

    fn random_unitary(rng: &mut StreamRng, n: usize) -> CMatrix<f64> {
        let HermitianEig { vectors, .. } = hermitian_eig(&Hermitian::new(random_psd(rng, n)).unwrap()).unwrap();
        vectors
    }

    fn estimate(m: CMatrix<f64>) -> CorrelationEstimate<f64> {
        CorrelationEstimate::new(Hermitian::new(m).unwrap(), 1, CorrelationMethod::Analytic).unwrap()
    }

    #[test]
    fn separable_input_is_recovered() {
        let mut rng = stream(1, &[]);
        let b0 = random_psd(&mut rng, 2);
        let c0 = random_psd(&mut rng, 2);
        let r = kron(&b0, &c0).unwrap();
        let f = nkp_decompose(&estimate(r.clone()), 2, 2).unwrap();
        let bc = kron(f.factor_b.matrix(), f.factor_c.matrix()).unwrap();
        assert!((&bc - &r).frobenius_norm() < 1e-10 * r.frobenius_norm());
        assert!((f.factor_c.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identity_factors_to_identity() {
        let f = nkp_decompose(&estimate(CMatrix::identity(6)), 2, 3).unwrap();
        let bc = kron(f.factor_b.matrix(), f.factor_c.matrix()).unwrap();
        assert!((&bc - &CMatrix::identity(6)).frobenius_norm() < 1e-10);
        assert!(nkp_decompose(&estimate(CMatrix::identity(6)), 4, 2).is_err());
    }

    #[test]
    fn diagonal_factor_gives_sorted_identity_basis() {
        let b = CMatrix::from_real_diag(&[1.0, 3.0, 2.0]);
        let f = KronFactors {
            factor_b: Hermitian::new(b).unwrap(),
            factor_c: Hermitian::new(CMatrix::identity(2)).unwrap(),
            sigma: 1.0,
        };
        let bases = factors_to_unitaries(&f).unwrap();
        let perm = CMatrix::from_fn(3, 3, |i, j| {
            if [1, 2, 0][j] == i {
                C::new(1.0, 0.0)
            } else {
                C::new(0.0, 0.0)
            }
        });
        assert_eq!(bases.u, perm);
        assert_eq!(bases.lambda_b, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn factor_bases_reconstruct_factors() {
        let mut rng = stream(2, &[]);
        let r = random_psd(&mut rng, 6);
        let f = nkp_decompose(&estimate(r), 3, 2).unwrap();
        let bases = factors_to_unitaries(&f).unwrap();
        for q in [&bases.u, &bases.v] {
            assert!(unitarity_residual(q) < 1e-9);
        }
        let back = crate::linalg::reconstruct(&bases.u, &bases.lambda_b);
        assert!((&back - f.factor_b.matrix()).frobenius_norm() < 1e-9);
        // Structured core reproduces B⊗C exactly.
        let t = TuckerRotation::new(bases.v.clone(), bases.u.clone(), bases.structured_core()).unwrap();
        let bc = kron(f.factor_b.matrix(), f.factor_c.matrix()).unwrap();
        assert!((build_rotation(&t).matrix() - &bc).frobenius_norm() < 1e-12 * bc.frobenius_norm());
    }

    #[test]
    fn core_of_identity_is_all_ones() {
        let mut rng = stream(3, &[]);
        let u = random_unitary(&mut rng, 2);
        let v = random_unitary(&mut rng, 3);
        let lambda = optimal_core(&estimate(CMatrix::identity(6)), &u, &v).unwrap();
        assert!(lambda.iter().all(|l| (l - 1.0).abs() < 1e-12));
    }

    #[test]
    fn core_of_diagonal_with_identity_bases() {
        let r = CMatrix::from_real_diag(&[5.0, 1.0, 2.0, 0.5]);
        let lambda = optimal_core(&estimate(r), &CMatrix::identity(2), &CMatrix::identity(2)).unwrap();
        assert_eq!(lambda, vec![5.0, 1.0, 2.0, 0.5]);
    }

    /// Direct objective scan: coordinate perturbations of λ never help.
    #[test]
    fn core_is_coordinatewise_minimal() {
        let mut rng = stream(4, &[]);
        let est = estimate(random_psd(&mut rng, 4));
        let u = random_unitary(&mut rng, 2);
        let v = random_unitary(&mut rng, 2);
        let lambda = optimal_core(&est, &u, &v).unwrap();
        let obj = |l: &[f64]| {
            mismatch(
                &est,
                &TuckerRotation {
                    v: v.clone(),
                    u: u.clone(),
                    lambda: l.to_vec(),
                },
            )
            .unwrap()
            .absolute
        };
        let best = obj(&lambda);
        for k in 0..4 {
            for step in [-1e-2, -1e-4, 1e-4, 1e-2] {
                let mut l = lambda.clone();
                l[k] += step;
                assert!(obj(&l) >= best - 1e-12);
            }
        }
    }

    #[test]
    fn rotation_of_identity_and_its_spectrum() {
        let t = TuckerRotation::new(CMatrix::identity(2), CMatrix::identity(2), vec![1.0; 4]).unwrap();
        assert_eq!(build_rotation(&t).matrix(), &CMatrix::identity(4));

        let mut rng = stream(5, &[]);
        let t = TuckerRotation::new(
            random_unitary(&mut rng, 2),
            random_unitary(&mut rng, 3),
            vec![0.5, 4.0, 1.0, 0.0, 2.0, 3.0],
        )
        .unwrap();
        let r_hat = build_rotation(&t);
        let eig = hermitian_eig(&r_hat).unwrap();
        for (a, b) in eig.values.iter().zip([4.0, 3.0, 2.0, 1.0, 0.5, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let s = rotation_sqrt(&t);
        assert!((&s.matrix().matmul(s.matrix()) - r_hat.matrix()).frobenius_norm() < 1e-10);
    }

    #[test]
    fn rotation_validation() {
        let bad_u = CMatrix::from_real_diag(&[1.0, 2.0]);
        assert!(TuckerRotation::new(CMatrix::identity(2), bad_u, vec![1.0; 4]).is_err());
        assert!(TuckerRotation::new(
            CMatrix::<f64>::identity(2),
            CMatrix::identity(2),
            vec![1.0, -1.0, 1.0, 1.0]
        )
        .is_err());
        assert!(TuckerRotation::new(CMatrix::<f64>::identity(2), CMatrix::identity(2), vec![1.0; 3]).is_err());
    }

    #[test]
    fn mismatch_vanishes_on_exact_rotation() {
        let mut rng = stream(6, &[]);
        let t = TuckerRotation::new(
            random_unitary(&mut rng, 3),
            random_unitary(&mut rng, 2),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        )
        .unwrap();
        let est = estimate(build_rotation(&t).into_matrix());
        assert!(mismatch(&est, &t).unwrap().absolute < 1e-10);
        let id = TuckerRotation::new(CMatrix::identity(2), CMatrix::identity(2), vec![1.0; 4]).unwrap();
        assert_eq!(mismatch(&estimate(CMatrix::identity(4)), &id).unwrap().absolute, 0.0);
    }

    #[test]
    fn pipeline_exact_on_independent_gains() {
        let mut rng = stream(7, &[]);
        let w = kron(&random_unitary(&mut rng, 3), &random_unitary(&mut rng, 2)).unwrap();
        let d: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 3.0).collect();
        let est = estimate(w.matmul(&CMatrix::from_real_diag(&d)).matmul(&w.adjoint()));
        let t = tucker_pipeline(&est, 2, 3).unwrap();
        assert!(mismatch(&est, &t).unwrap().relative < 1e-9);
    }

    #[test]
    fn pipeline_exact_on_separable_input() {
        let mut rng = stream(8, &[]);
        let r = kron(&random_psd(&mut rng, 3), &random_psd(&mut rng, 2)).unwrap();
        let est = estimate(r);
        let t = tucker_pipeline(&est, 2, 3).unwrap();
        assert!(mismatch(&est, &t).unwrap().relative < 1e-9);
        assert!((t.lambda.iter().sum::<f64>() - est.r.trace()).abs() < 1e-10 * est.r.trace());
    }

    #[test]
    fn pipeline_is_deterministic() {
        let mut rng = stream(9, &[]);
        let est = estimate(random_psd(&mut rng, 8));
        assert_eq!(
            tucker_pipeline(&est, 2, 4).unwrap(),
            tucker_pipeline(&est, 2, 4).unwrap()
        );
    }

    #[test]
    fn parameter_count_for_256_antennas() {
        let t = TuckerRotation::new(CMatrix::<f64>::identity(16), CMatrix::identity(16), vec![1.0; 256]).unwrap();
        assert_eq!(t.stored_reals(), 1280);
        assert_eq!(t.full_matrix_reals(), 131_072);
    }
}
