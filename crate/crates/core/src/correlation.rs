//! Spatial correlation `R = E{h h^H}`, its left/right directional
//! contractions `R_h = E{H H^H}`, `R_v = E{Hᵀ H*}` (with `H` the column-major
//! reshape of `h`), and the projected-gain correlation used to form the
//! core vector.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;

use crate::channel::{
    array_response_into, for_each_ray, ArrayGeometry, ChannelProfile, ChannelRealization, UserGeometry,
};
use crate::error::{invalid, Result};
use crate::linalg::{hermitian_eig, kron, reshape, CMatrix, Hermitian};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrelationMethod {
    /// Gains integrated out; ray offsets averaged over independent draws.
    Analytic,
    /// Sample mean of `h h^H` over channel realizations.
    SampleAverage,
}

/// A correlation matrix with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationEstimate<T> {
    pub r: Hermitian<T>,
    pub sample_count: usize,
    pub method: CorrelationMethod,
}

impl<T: Real> CorrelationEstimate<T> {
    pub fn new(r: Hermitian<T>, sample_count: usize, method: CorrelationMethod) -> Result<Self> {
        if !(r.trace() > T::zero()) {
            return Err(invalid("correlation matrix must have positive trace"));
        }
        Ok(Self {
            r,
            sample_count,
            method,
        })
    }

    pub fn dim(&self) -> usize {
        self.r.dim()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        self.r.matrix()
    }
}

/// Accumulates the upper triangle of `a a^H` into the row-major `acc`.
#[inline]
fn accumulate_outer<T: Real>(acc: &mut [Complex<T>], a: &[Complex<T>]) {
    let n = a.len();
    for (i, &ai) in a.iter().enumerate() {
        let row = &mut acc[i * n + i..(i + 1) * n];
        for (r, &aj) in row.iter_mut().zip(&a[i..]) {
            *r = *r + ai * aj.conj();
        }
    }
}

/// Fills the strict lower triangle from the upper one and scales.
fn finish_upper<T: Real>(mut acc: Vec<Complex<T>>, n: usize, scale: T) -> CMatrix<T> {
    for i in 0..n {
        acc[i * n + i] = Complex::new(acc[i * n + i].re * scale, T::zero());
        for j in (i + 1)..n {
            let v = acc[i * n + j].scale(scale);
            acc[i * n + j] = v;
            acc[j * n + i] = v.conj();
        }
    }
    CMatrix::new(n, n, acc).expect("accumulated correlation is finite")
}

/// `(1/S) Σ h_s h_s^H`, symmetrised and projected onto the PSD cone.
pub fn correlation_sample_average<T: Real>(channels: &[ChannelRealization<T>]) -> Result<CorrelationEstimate<T>> {
    let first = channels
        .first()
        .ok_or_else(|| invalid("sample average needs at least one channel"))?;
    let n = first.h.len();
    if channels.iter().any(|c| c.h.len() != n) {
        return Err(invalid("channel realizations have different lengths"));
    }
    let mut acc = vec![Complex::zero(); n * n];
    for c in channels {
        accumulate_outer(&mut acc, &c.h);
    }
    let m = finish_upper(acc, n, T::one() / T::lit(channels.len() as f64));
    CorrelationEstimate::new(
        Hermitian::project(&m)?,
        channels.len(),
        CorrelationMethod::SampleAverage,
    )
}

/// Correlation of `user`'s channel with the gains integrated out:
/// `var_g * E_offsets{Σ_{n,m} a_{n,m} a_{n,m}^H}`, the expectation taken as
/// an average over `ray_draws` independent sets of ray offsets (a single set
/// when offsets are identically zero).
pub fn correlation_analytic<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    geom: &ArrayGeometry,
    profile: &ChannelProfile,
    user: &UserGeometry,
    ray_draws: usize,
) -> Result<CorrelationEstimate<T>> {
    if ray_draws == 0 {
        return Err(invalid("ray_draws must be at least 1"));
    }
    if user.cluster_dev_h.len() != profile.n_clusters || user.cluster_dev_v.len() != profile.n_clusters {
        return Err(invalid("user geometry does not match the profile's cluster count"));
    }
    let draws = if profile.ray_offset_rms == 0.0 { 1 } else { ray_draws };
    let n = geom.n_t();
    let mut acc = vec![Complex::zero(); n * n];
    let mut a = Vec::with_capacity(n);
    for _ in 0..draws {
        for_each_ray(rng, profile, user, |_, theta, phi| {
            array_response_into(geom, theta, phi, &mut a);
            accumulate_outer(&mut acc, &a);
        });
    }
    let scale = T::lit(profile.gain_variance() / draws as f64);
    let m = finish_upper(acc, n, scale);
    CorrelationEstimate::new(Hermitian::from_construction(m), draws, CorrelationMethod::Analytic)
}

/// Left/right correlations and their eigenbases.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalStats<T> {
    /// `E{H H^H}`, `n1 x n1`.
    pub r_h: Hermitian<T>,
    /// `E{Hᵀ H*}`, `n2 x n2`.
    pub r_v: Hermitian<T>,
    /// Eigenvectors of `r_h`.
    pub v: CMatrix<T>,
    /// Eigenvectors of `r_v`.
    pub u: CMatrix<T>,
    pub lambda_h: Vec<T>,
    pub lambda_v: Vec<T>,
}

fn check_split(n: usize, n1: usize, n2: usize) -> Result<()> {
    if n1 == 0 || n2 == 0 || n1.checked_mul(n2) != Some(n) {
        return Err(invalid(format!("{n1} x {n2} does not factor dimension {n}")));
    }
    Ok(())
}

fn finish_directional<T: Real>(r_h: CMatrix<T>, r_v: CMatrix<T>) -> Result<DirectionalStats<T>> {
    let r_h = Hermitian::project(&r_h)?;
    let r_v = Hermitian::project(&r_v)?;
    let eh = hermitian_eig(&r_h)?;
    let ev = hermitian_eig(&r_v)?;
    Ok(DirectionalStats {
        r_h,
        r_v,
        v: eh.vectors,
        u: ev.vectors,
        lambda_h: eh.values.into_iter().map(|w| w.max(T::zero())).collect(),
        lambda_v: ev.values.into_iter().map(|w| w.max(T::zero())).collect(),
    })
}

/// Block-trace contractions of `R` (column-major reshape convention):
/// `R_h[a,b] = Σ_k R[a + k n1, b + k n1]`, `R_v[c,d] = Σ_p R[p + c n1, p + d n1]`.
pub fn directional_correlations<T: Real>(r: &CMatrix<T>, n1: usize, n2: usize) -> Result<(CMatrix<T>, CMatrix<T>)> {
    check_split(r.rows(), n1, n2)?;
    let r_h = CMatrix::from_fn(n1, n1, |a, b| {
        (0..n2).fold(Complex::zero(), |s, k| s + r[(a + k * n1, b + k * n1)])
    });
    let r_v = CMatrix::from_fn(n2, n2, |c, d| {
        (0..n1).fold(Complex::zero(), |s, p| s + r[(p + c * n1, p + d * n1)])
    });
    Ok((r_h, r_v))
}

/// Directional statistics contracted from a full correlation matrix.
pub fn directional_stats<T: Real>(est: &CorrelationEstimate<T>, n1: usize, n2: usize) -> Result<DirectionalStats<T>> {
    let (r_h, r_v) = directional_correlations(est.matrix(), n1, n2)?;
    finish_directional(r_h, r_v)
}

/// Directional statistics as sample averages of the reshaped channels.
pub fn directional_stats_from_channels<T: Real>(
    channels: &[ChannelRealization<T>],
    n1: usize,
    n2: usize,
) -> Result<DirectionalStats<T>> {
    if channels.is_empty() {
        return Err(invalid("need at least one channel"));
    }
    let mut r_h = CMatrix::zeros(n1, n1);
    let mut r_v = CMatrix::zeros(n2, n2);
    for c in channels {
        check_split(c.h.len(), n1, n2)?;
        let h = reshape(&c.h, n1, n2)?;
        r_h = &r_h + &h.matmul(&h.adjoint());
        r_v = &r_v + &h.transpose().matmul(&h.conj());
    }
    let s = T::one() / T::lit(channels.len() as f64);
    finish_directional(r_h.scale_real(s), r_v.scale_real(s))
}

/// Projected-gain correlation `R_g = (U⊗V)^H R (U⊗V)` and its diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct GainStats<T> {
    pub r_g: Hermitian<T>,
    pub core: Vec<T>,
}

/// `vec(V^H H U*) = (U⊗V)^H vec(H)`, hence `R_g = (U⊗V)^H R (U⊗V)`.
pub fn gain_stats<T: Real>(est: &CorrelationEstimate<T>, v: &CMatrix<T>, u: &CMatrix<T>) -> Result<GainStats<T>> {
    let w = kron(u, v)?;
    if w.rows() != est.dim() || !w.is_square() {
        return Err(invalid(format!(
            "unitaries of sizes {} and {} do not match dimension {}",
            v.rows(),
            u.rows(),
            est.dim()
        )));
    }
    let r_g = w.adjoint_mul(&est.matrix().matmul(&w));
    let core = r_g.diagonal().iter().map(|z| z.re.max(T::zero())).collect();
    Ok(GainStats {
        r_g: Hermitian::from_construction(r_g),
        core,
    })
}
