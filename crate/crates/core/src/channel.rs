//! Clustered 3D MIMO channel synthesis for rectangular (URA) and concentric
//! circular (UCCA) base-station arrays.
//!
//! A channel is a sum over `N` clusters of `M` rays, each contributing an
//! i.i.d. complex Gaussian gain times the array response at the ray's
//! horizontal/vertical angle. Ray angles are
//! `center + cluster deviation + per-ray offset`, where the centre and the
//! cluster deviations belong to a user ([`UserGeometry`]) and the per-ray
//! Laplacian offsets and the gains are redrawn for every realization.
//!
//! Angles are in degrees at this API surface.

use num_complex::Complex;
use rand::distr::{Distribution, Open01};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::linalg::normalized;
use crate::scalar::Real;

/// Base-station antenna array. Spacings and radii are in carrier wavelengths.
#[derive(Clone, Debug, PartialEq)]
pub enum ArrayGeometry {
    /// `n_h` columns by `n_v` rows; the response is `a_v(φ) ⊗ a_h(θ)`.
    Ura {
        n_h: usize,
        n_v: usize,
        spacing_h: f64,
        spacing_v: f64,
    },
    /// `rings` concentric rings with `per_ring` antennas each. Antenna
    /// `(j, l)` sits at index `j + l * rings`.
    Ucca {
        rings: usize,
        per_ring: usize,
        radii: Vec<f64>,
    },
}

impl ArrayGeometry {
    pub fn ura(n_h: usize, n_v: usize, spacing_h: f64, spacing_v: f64) -> Result<Self> {
        let g = Self::Ura {
            n_h,
            n_v,
            spacing_h,
            spacing_v,
        };
        g.validate()?;
        Ok(g)
    }

    /// Half-wavelength URA.
    pub fn ura_half_wavelength(n_h: usize, n_v: usize) -> Result<Self> {
        Self::ura(n_h, n_v, 0.5, 0.5)
    }

    pub fn ucca(rings: usize, per_ring: usize, radii: Vec<f64>) -> Result<Self> {
        let g = Self::Ucca { rings, per_ring, radii };
        g.validate()?;
        Ok(g)
    }

    /// UCCA with ring radii `0.5 * j` wavelengths, `j = 1..=rings`.
    pub fn ucca_default_radii(rings: usize, per_ring: usize) -> Result<Self> {
        Self::ucca(rings, per_ring, (1..=rings).map(|j| 0.5 * j as f64).collect())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Ura {
                n_h,
                n_v,
                spacing_h,
                spacing_v,
            } => {
                if *n_h == 0 || *n_v == 0 {
                    return Err(invalid("URA needs at least one antenna per direction"));
                }
                if !(*spacing_h > 0.0 && spacing_h.is_finite() && *spacing_v > 0.0 && spacing_v.is_finite()) {
                    return Err(invalid("URA spacings must be positive and finite"));
                }
            }
            Self::Ucca { rings, per_ring, radii } => {
                if *rings == 0 || *per_ring == 0 {
                    return Err(invalid("UCCA needs at least one ring and one antenna per ring"));
                }
                if radii.len() != *rings {
                    return Err(invalid(format!("UCCA has {rings} rings but {} radii", radii.len())));
                }
                if !radii.iter().all(|r| *r > 0.0 && r.is_finite()) {
                    return Err(invalid("UCCA radii must be positive and finite"));
                }
                if !radii.windows(2).all(|w| w[0] < w[1]) {
                    return Err(invalid("UCCA radii must be strictly increasing"));
                }
            }
        }
        Ok(())
    }

    /// Total antenna count.
    pub fn n_t(&self) -> usize {
        match self {
            Self::Ura { n_h, n_v, .. } => n_h * n_v,
            Self::Ucca { rings, per_ring, .. } => rings * per_ring,
        }
    }

    /// Reshape split `(n1, n2)` natural for the array: `(n_h, n_v)` for a
    /// URA and `(rings, per_ring)` for a UCCA.
    pub fn natural_split(&self) -> (usize, usize) {
        match self {
            Self::Ura { n_h, n_v, .. } => (*n_h, *n_v),
            Self::Ucca { rings, per_ring, .. } => (*rings, *per_ring),
        }
    }

    /// Compact, comma-free description, e.g. `ura:8x8:0.5:0.5` or
    /// `ucca:4x4:0.5;1;1.5;2`.
    pub fn label(&self) -> String {
        match self {
            Self::Ura {
                n_h,
                n_v,
                spacing_h,
                spacing_v,
            } => format!("ura:{n_h}x{n_v}:{spacing_h}:{spacing_v}"),
            Self::Ucca { rings, per_ring, radii } => {
                let r: Vec<String> = radii.iter().map(|r| r.to_string()).collect();
                format!("ucca:{rings}x{per_ring}:{}", r.join(";"))
            }
        }
    }
}

/// Horizontal half-range of the uniformly drawn cluster centre, degrees.
pub const CENTER_RANGE_H_DEG: f64 = 60.0;
/// Vertical half-range of the uniformly drawn cluster centre, degrees.
pub const CENTER_RANGE_V_DEG: f64 = 45.0;

/// Angular statistics and gain model of the clustered channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelProfile {
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
    /// Centres are uniform in `(-center_range_h, center_range_h)`.
    pub center_range_h: f64,
    /// Centres are uniform in `(-center_range_v, center_range_v)`.
    pub center_range_v: f64,
    /// RMS of the Gaussian cluster deviations (σ), degrees.
    pub cluster_rms: f64,
    /// RMS of the Laplacian per-ray offsets, degrees.
    pub ray_offset_rms: f64,
    /// Per-ray complex gain variance; `None` means `1 / (N * M)`.
    pub gain_variance: Option<f64>,
}

impl Default for ChannelProfile {
    fn default() -> Self {
        Self {
            n_clusters: 12,
            rays_per_cluster: 20,
            center_range_h: CENTER_RANGE_H_DEG,
            center_range_v: CENTER_RANGE_V_DEG,
            cluster_rms: 5.0,
            ray_offset_rms: 1.0,
            gain_variance: None,
        }
    }
}

impl ChannelProfile {
    pub fn with_cluster_rms(mut self, sigma_deg: f64) -> Self {
        self.cluster_rms = sigma_deg;
        self
    }

    pub fn gain_variance(&self) -> f64 {
        self.gain_variance
            .unwrap_or(1.0 / (self.n_clusters * self.rays_per_cluster) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.rays_per_cluster == 0 {
            return Err(invalid("profile needs at least one cluster and one ray"));
        }
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        if !nonneg(self.cluster_rms) || !nonneg(self.ray_offset_rms) {
            return Err(invalid("angular RMS values must be finite and nonnegative"));
        }
        if !nonneg(self.center_range_h) || !nonneg(self.center_range_v) {
            return Err(invalid("centre ranges must be finite and nonnegative"));
        }
        let g = self.gain_variance();
        if !(g > 0.0 && g.is_finite()) {
            return Err(invalid("gain variance must be positive"));
        }
        Ok(())
    }
}

/// Per-user cluster geometry, fixed across that user's channel realizations.
#[derive(Clone, Debug, PartialEq)]
pub struct UserGeometry {
    pub center_h: f64,
    pub center_v: f64,
    pub cluster_dev_h: Vec<f64>,
    pub cluster_dev_v: Vec<f64>,
}

/// One channel vector together with its direction `h / ||h||`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization<T> {
    pub h: Vec<Complex<T>>,
    pub cdi: Vec<Complex<T>>,
}

impl<T: Real> ChannelRealization<T> {
    pub fn new(h: Vec<Complex<T>>) -> Result<Self> {
        let cdi = normalized(&h).ok_or_else(|| invalid("channel vector has zero norm"))?;
        Ok(Self { h, cdi })
    }
}

/// Array response at horizontal angle `theta_deg` and vertical angle
/// `phi_deg`.
///
/// For a UCCA the angles enter exactly as
/// `exp(-j 2π d_j cos(φ - φ_l) cos θ)` with `φ_l = 2πl/L`, `l = 1..=L`.
pub fn array_response<T: Real>(geom: &ArrayGeometry, theta_deg: f64, phi_deg: f64) -> Vec<Complex<T>> {
    let mut out = Vec::with_capacity(geom.n_t());
    array_response_into(geom, theta_deg, phi_deg, &mut out);
    out
}

pub(crate) fn array_response_into<T: Real>(
    geom: &ArrayGeometry,
    theta_deg: f64,
    phi_deg: f64,
    out: &mut Vec<Complex<T>>,
) {
    out.clear();
    let two_pi = T::TAU();
    let theta = T::lit(theta_deg).to_radians();
    let phi = T::lit(phi_deg).to_radians();
    match geom {
        ArrayGeometry::Ura {
            n_h,
            n_v,
            spacing_h,
            spacing_v,
        } => {
            let kh = two_pi * T::lit(*spacing_h) * theta.cos();
            let kv = two_pi * T::lit(*spacing_v) * phi.cos();
            let wh = Complex::from_polar(T::one(), -kh);
            let mut z = Complex::new(T::one(), T::zero());
            for _ in 0..*n_h {
                out.push(z);
                z = z * wh;
            }
            for q in 1..*n_v {
                let av = Complex::from_polar(T::one(), -kv * T::lit(q as f64));
                for p in 0..*n_h {
                    let ah = out[p];
                    out.push(av * ah);
                }
            }
        }
        ArrayGeometry::Ucca { per_ring, radii, .. } => {
            let cos_theta = theta.cos();
            let l_total = T::lit(*per_ring as f64);
            // equally spaced radii d_j = d_0 + j*s: one phasor per ring, then a recurrence
            let step = match radii.as_slice() {
                [a, b, ..] if radii.windows(2).all(|w| ((w[1] - w[0]) - (b - a)).abs() < 1e-12) => Some(b - a),
                _ => None,
            };
            for l in 1..=*per_ring {
                let phi_l = two_pi * T::lit(l as f64) / l_total;
                let k = two_pi * (phi - phi_l).cos() * cos_theta;
                match step {
                    Some(s) => {
                        let mut z = Complex::from_polar(T::one(), -k * T::lit(radii[0]));
                        let w = Complex::from_polar(T::one(), -k * T::lit(s));
                        for _ in radii {
                            out.push(z);
                            z = z * w;
                        }
                    }
                    None => out.extend(radii.iter().map(|&d| Complex::from_polar(T::one(), -k * T::lit(d)))),
                }
            }
        }
    }
}

/// Inverse CDF of the zero-mean Laplace law with standard deviation `rms`,
/// evaluated at `p` in `(0, 1)`.
pub fn laplace_quantile(p: f64, rms: f64) -> f64 {
    let scale = rms / std::f64::consts::SQRT_2;
    let u = p - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Zero-mean Laplacian draw with standard deviation `rms` (degrees).
pub fn laplacian_sample<R: Rng + ?Sized>(rng: &mut R, rms: f64) -> f64 {
    let p: f64 = Open01.sample(rng);
    if rms == 0.0 {
        return 0.0;
    }
    laplace_quantile(p, rms)
}

/// Draws a user's cluster centre and per-cluster deviations.
///
/// Draw order: horizontal centre, vertical centre, `N` horizontal
/// deviations, `N` vertical deviations.
pub fn draw_user<R: Rng + ?Sized>(rng: &mut R, profile: &ChannelProfile) -> UserGeometry {
    let center_h = (rng.random::<f64>() * 2.0 - 1.0) * profile.center_range_h;
    let center_v = (rng.random::<f64>() * 2.0 - 1.0) * profile.center_range_v;
    let sigma = profile.cluster_rms;
    let gauss = |rng: &mut R| {
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    };
    let cluster_dev_h = (0..profile.n_clusters).map(|_| gauss(rng)).collect();
    let cluster_dev_v = (0..profile.n_clusters).map(|_| gauss(rng)).collect();
    UserGeometry {
        center_h,
        center_v,
        cluster_dev_h,
        cluster_dev_v,
    }
}

fn check_user(profile: &ChannelProfile, user: &UserGeometry) -> Result<()> {
    if user.cluster_dev_h.len() != profile.n_clusters || user.cluster_dev_v.len() != profile.n_clusters {
        return Err(invalid(format!(
            "user has {}/{} cluster deviations, profile expects {}",
            user.cluster_dev_h.len(),
            user.cluster_dev_v.len(),
            profile.n_clusters
        )));
    }
    Ok(())
}

/// Horizontal and vertical angles of every ray for one fresh set of
/// Laplacian offsets, in cluster-major order.
pub(crate) fn for_each_ray<R: Rng + ?Sized>(
    rng: &mut R,
    profile: &ChannelProfile,
    user: &UserGeometry,
    mut f: impl FnMut(&mut R, f64, f64),
) {
    let rms = profile.ray_offset_rms;
    for n in 0..profile.n_clusters {
        let base_h = user.center_h + user.cluster_dev_h[n];
        let base_v = user.center_v + user.cluster_dev_v[n];
        for _ in 0..profile.rays_per_cluster {
            let dh = laplacian_sample(rng, rms);
            let dv = laplacian_sample(rng, rms);
            f(rng, base_h + dh, base_v + dv);
        }
    }
}

/// Draws one channel realization for `user`: fresh ray offsets and fresh
/// complex Gaussian gains.
pub fn sample_channel<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    geom: &ArrayGeometry,
    profile: &ChannelProfile,
    user: &UserGeometry,
) -> Result<ChannelRealization<T>> {
    check_user(profile, user)?;
    let n_t = geom.n_t();
    let std = (profile.gain_variance() / 2.0).sqrt();
    let mut h = vec![Complex::new(T::zero(), T::zero()); n_t];
    let mut a = Vec::with_capacity(n_t);
    for_each_ray(rng, profile, user, |rng, theta, phi| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let g = Complex::new(T::lit(std * re), T::lit(std * im));
        array_response_into(geom, theta, phi, &mut a);
        for (hi, &ai) in h.iter_mut().zip(&a) {
            *hi = *hi + g * ai;
        }
    });
    ChannelRealization::new(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron_vec, norm};
    use crate::rng::stream;

    type C = Complex<f64>;

    fn assert_close(a: &[C], b: &[C], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).norm() < tol, "{x} vs {y}");
        }
    }

    #[test]
    fn broadside_ura_is_all_ones() {
        let g = ArrayGeometry::ura_half_wavelength(2, 2).unwrap();
        assert_close(&array_response::<f64>(&g, 90.0, 90.0), &[C::new(1.0, 0.0); 4], 1e-15);
    }

    #[test]
    fn endfire_ula_alternates_sign() {
        let g = ArrayGeometry::ura_half_wavelength(2, 1).unwrap();
        assert_close(
            &array_response::<f64>(&g, 0.0, 30.0),
            &[C::new(1.0, 0.0), C::new(-1.0, 0.0)],
            1e-15,
        );
    }

    #[test]
    fn ucca_at_ninety_degrees_is_all_ones() {
        let g = ArrayGeometry::ucca(1, 4, vec![0.5]).unwrap();
        assert_close(&array_response::<f64>(&g, 90.0, 17.0), &[C::new(1.0, 0.0); 4], 1e-15);
    }

    #[test]
    fn ura_response_is_kron_of_direct_ula_factors() {
        let g = ArrayGeometry::ura(3, 4, 0.5, 0.7).unwrap();
        let (theta, phi) = (23.0f64, -41.0f64);
        let a_h: Vec<C> = (0..3)
            .map(|p| {
                C::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * 0.5 * p as f64 * theta.to_radians().cos(),
                )
            })
            .collect();
        let a_v: Vec<C> = (0..4)
            .map(|q| {
                C::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * 0.7 * q as f64 * phi.to_radians().cos(),
                )
            })
            .collect();
        assert_close(&array_response(&g, theta, phi), &kron_vec(&a_v, &a_h), 1e-13);
    }

    #[test]
    fn ucca_index_layout() {
        let g = ArrayGeometry::ucca(2, 3, vec![0.5, 1.25]).unwrap();
        let (theta, phi) = (12.0f64, 70.0f64);
        let a = array_response::<f64>(&g, theta, phi);
        for l in 1..=3usize {
            let phi_l = 2.0 * std::f64::consts::PI * l as f64 / 3.0;
            for (j, d) in [0.5, 1.25].iter().enumerate() {
                let phase =
                    -2.0 * std::f64::consts::PI * d * (phi.to_radians() - phi_l).cos() * theta.to_radians().cos();
                assert!((a[j + (l - 1) * 2] - C::from_polar(1.0, phase)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::ura(0, 2, 0.5, 0.5).is_err());
        assert!(ArrayGeometry::ura(2, 2, 0.0, 0.5).is_err());
        assert!(ArrayGeometry::ucca(2, 4, vec![1.0, 0.5]).is_err());
        assert!(ArrayGeometry::ucca(2, 4, vec![0.5]).is_err());
        let g = ArrayGeometry::ucca_default_radii(8, 8).unwrap();
        assert_eq!(g.n_t(), 64);
        assert_eq!(g.label(), "ucca:8x8:0.5;1;1.5;2;2.5;3;3.5;4");
    }

    #[test]
    fn zero_sigma_gives_zero_deviations() {
        let p = ChannelProfile::default().with_cluster_rms(0.0);
        let u = draw_user(&mut stream(1, &[]), &p);
        assert!(u.cluster_dev_h.iter().chain(&u.cluster_dev_v).all(|&d| d == 0.0));
        assert!(u.center_h.abs() < 60.0 && u.center_v.abs() < 45.0);
    }

    #[test]
    fn user_draw_is_deterministic() {
        let p = ChannelProfile::default();
        assert_eq!(draw_user(&mut stream(4, &[1]), &p), draw_user(&mut stream(4, &[1]), &p));
    }

    #[test]
    fn cluster_deviation_rms_matches_sigma() {
        let p = ChannelProfile {
            n_clusters: 1,
            ..ChannelProfile::default()
        };
        let mut rng = stream(5, &[]);
        let draws = 100_000;
        let ms: f64 = (0..draws)
            .map(|_| draw_user(&mut rng, &p).cluster_dev_h[0].powi(2))
            .sum::<f64>()
            / draws as f64;
        assert!((ms.sqrt() - 5.0).abs() < 0.02 * 5.0, "rms {}", ms.sqrt());
    }

    #[test]
    fn laplacian_zero_rms() {
        assert_eq!(laplacian_sample(&mut stream(1, &[]), 0.0), 0.0);
    }

    #[test]
    fn laplacian_std_matches_rms() {
        let mut rng = stream(6, &[]);
        let n = 1_000_000;
        let ms: f64 = (0..n).map(|_| laplacian_sample(&mut rng, 1.0).powi(2)).sum::<f64>() / n as f64;
        assert!((ms.sqrt() - 1.0).abs() < 0.01, "std {}", ms.sqrt());
    }

    #[test]
    fn laplace_quantile_matches_analytic_formula() {
        // Lower quartile of Laplace(0, b) is b ln(1/2).
        let b = 2.0 / std::f64::consts::SQRT_2;
        assert!((laplace_quantile(0.25, 2.0) - b * 0.5f64.ln()).abs() < 1e-15);
        assert!((laplace_quantile(0.75, 2.0) + b * 0.5f64.ln()).abs() < 1e-15);
        // Empirical CDF at the quartile.
        let mut rng = stream(7, &[]);
        let n = 200_000;
        let below = (0..n)
            .filter(|_| laplacian_sample(&mut rng, 2.0) < b * 0.5f64.ln())
            .count();
        assert!((below as f64 / n as f64 - 0.25).abs() < 0.005);
    }

    #[test]
    fn single_ray_channel_is_scaled_response() {
        let g = ArrayGeometry::ura_half_wavelength(3, 2).unwrap();
        let p = ChannelProfile {
            n_clusters: 1,
            rays_per_cluster: 1,
            ray_offset_rms: 0.0,
            ..ChannelProfile::default()
        };
        let user = UserGeometry {
            center_h: 30.0,
            center_v: -10.0,
            cluster_dev_h: vec![0.0],
            cluster_dev_v: vec![0.0],
        };
        let ch = sample_channel::<f64, _>(&mut stream(8, &[]), &g, &p, &user).unwrap();
        let a = array_response::<f64>(&g, 30.0, -10.0);
        let an = norm(&a);
        let phase = ch.cdi[0] / (a[0] / an);
        let expected: Vec<C> = a.iter().map(|&x| x / an * phase).collect();
        assert_close(&ch.cdi, &expected, 1e-14);
        assert!((norm(&ch.cdi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gain_variance_scales_channel_energy() {
        let g = ArrayGeometry::ura_half_wavelength(2, 2).unwrap();
        let base = ChannelProfile::default();
        let scaled = ChannelProfile {
            gain_variance: Some(4.0 * base.gain_variance()),
            ..base.clone()
        };
        let user = draw_user(&mut stream(9, &[]), &base);
        let energy = |p: &ChannelProfile, seed: u64| {
            let mut rng = stream(seed, &[]);
            (0..10_000)
                .map(|_| norm(&sample_channel::<f64, _>(&mut rng, &g, p, &user).unwrap().h).powi(2))
                .sum::<f64>()
                / 10_000.0
        };
        let e_base = energy(&base, 10);
        // E||h||^2 = var * N * M * n_t = n_t for the default variance.
        assert!((e_base - 4.0).abs() < 0.05 * 4.0, "energy {e_base}");
        let ratio = energy(&scaled, 13) / e_base;
        assert!((ratio - 4.0).abs() < 0.05 * 4.0, "ratio {ratio}");
    }

    #[test]
    fn channel_sampling_is_deterministic() {
        let g = ArrayGeometry::ucca_default_radii(2, 3).unwrap();
        let p = ChannelProfile::default();
        let user = draw_user(&mut stream(11, &[]), &p);
        let a = sample_channel::<f64, _>(&mut stream(12, &[]), &g, &p, &user).unwrap();
        let b = sample_channel::<f64, _>(&mut stream(12, &[]), &g, &p, &user).unwrap();
        assert_eq!(a, b);
    }
}
