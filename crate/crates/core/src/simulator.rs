//! Multi-user zero-forcing downlink with limited CDI feedback.
//!
//! Every trial draws `K` users (fresh cluster geometry each), builds each
//! user's correlation and codebook(s), draws one channel per user,
//! quantizes its direction, zero-forces on the fed-back codewords and
//! records the sum rate. All randomness comes from sub-streams keyed by
//! `(trial, attempt, purpose, user)`, so results do not depend on thread
//! count and several schemes can be evaluated on identical draws.

use std::cell::OnceCell;

use num_complex::Complex;
use rayon::prelude::*;

use crate::channel::{draw_user, sample_channel, ArrayGeometry, ChannelProfile, ChannelRealization};
use crate::codebook::{iqc_quantize, quantize, rotate_resampling, rvq_codebook, split_bits, Codebook, CodebookKind};
use crate::correlation::{correlation_analytic, directional_correlations, CorrelationEstimate};
use crate::error::{invalid, Error, Result};
use crate::linalg::{inner, psd_sqrt, solve_hpd, CMatrix, Hermitian};
use crate::rng::{derive_seed, stream};
use crate::scalar::Real;
use crate::tucker::{rotation_sqrt, tucker_pipeline};

/// Rank-deficient redraws allowed per trial before it is aborted.
pub const MAX_REDRAWS: usize = 100;
/// Relative pivot floor for the feedback Gram matrix.
pub const ZF_RANK_TOL: f64 = 1e-10;
pub const DEFAULT_RAY_DRAWS: usize = 1000;

mod purpose {
    pub const SCHEDULE: u64 = 1;
    pub const USER: u64 = 2;
    pub const CORRELATION: u64 = 3;
    pub const CHANNEL: u64 = 4;
    pub const BASE: u64 = 5;
    pub const BASE_H: u64 = 6;
    pub const BASE_V: u64 = 7;
    pub const RESAMPLE: u64 = 8;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Base codebook rotated by the full `R^{1/2}`.
    Rc,
    /// Base codebook rotated by the Tucker approximation `R̂^{1/2}`.
    Tdc,
    /// Independent horizontal/vertical quantization with a product codeword.
    Iqc,
    /// Unquantized channel directions.
    PerfectCdi,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Rc, Scheme::Tdc, Scheme::Iqc, Scheme::PerfectCdi];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rc => "RC",
            Self::Tdc => "TDC",
            Self::Iqc => "IQC",
            Self::PerfectCdi => "perfect_cdi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "rc" => Self::Rc,
            "tdc" => Self::Tdc,
            "iqc" => Self::Iqc,
            "perfect_cdi" | "perfect" => Self::PerfectCdi,
            _ => return None,
        })
    }

    fn needs_correlation(self) -> bool {
        !matches!(self, Self::PerfectCdi)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub geometry: ArrayGeometry,
    pub profile: ChannelProfile,
    /// Users available for scheduling; `K` of them are served each trial.
    pub users_pool: usize,
    pub scheduled_k: usize,
    pub snr_db: f64,
    /// Feedback bits per user (`2B`); IQC splits them across directions.
    pub total_bits: u32,
    pub scheme: Scheme,
    pub n1: usize,
    pub n2: usize,
    pub trials: usize,
    pub seed: u64,
    /// Independent ray-offset sets averaged into each user's correlation.
    pub ray_draws: usize,
    /// Draw a separate base codebook per user instead of one per run.
    pub per_user_base: bool,
}

impl SimConfig {
    /// Defaults for `geometry`: `K = 4`, 10 dB, 8 bits, RC, natural split.
    pub fn new(geometry: ArrayGeometry) -> Self {
        let (n1, n2) = geometry.natural_split();
        Self {
            geometry,
            profile: ChannelProfile::default(),
            users_pool: 4,
            scheduled_k: 4,
            snr_db: 10.0,
            total_bits: 8,
            scheme: Scheme::Rc,
            n1,
            n2,
            trials: 1000,
            seed: 0,
            ray_draws: DEFAULT_RAY_DRAWS,
            per_user_base: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.profile.validate()?;
        let n_t = self.geometry.n_t();
        if self.scheduled_k == 0 || self.scheduled_k > n_t {
            return Err(invalid(format!(
                "scheduled_k = {} must lie in 1..={n_t}",
                self.scheduled_k
            )));
        }
        if self.users_pool < self.scheduled_k {
            return Err(invalid(format!(
                "users_pool = {} is smaller than scheduled_k = {}",
                self.users_pool, self.scheduled_k
            )));
        }
        if self.n1 == 0 || self.n1.checked_mul(self.n2) != Some(n_t) {
            return Err(invalid(format!(
                "n1 x n2 = {} x {} does not factor n_t = {n_t}",
                self.n1, self.n2
            )));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.ray_draws == 0 {
            return Err(invalid("ray_draws must be at least 1"));
        }
        if !self.snr_db.is_finite() {
            return Err(invalid("snr_db must be finite"));
        }
        if self.total_bits > crate::codebook::MAX_CODEBOOK_BITS {
            return Err(Error::ResourceLimit(format!(
                "total_bits = {} exceeds {}",
                self.total_bits,
                crate::codebook::MAX_CODEBOOK_BITS
            )));
        }
        Ok(())
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SumRateResult {
    pub mean_sum_rate: f64,
    pub std_error: f64,
    pub per_trial: Vec<f64>,
    /// Rank-deficient redraws over all trials.
    pub redraws: usize,
    pub config_echo: SimConfig,
}

impl SumRateResult {
    fn from_trials(per_trial: Vec<f64>, redraws: usize, config_echo: SimConfig) -> Self {
        let n = per_trial.len() as f64;
        let mean = per_trial.iter().sum::<f64>() / n;
        let std_error = if per_trial.len() > 1 {
            let var = per_trial.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self {
            mean_sum_rate: mean,
            std_error,
            per_trial,
            redraws,
            config_echo,
        }
    }
}

/// Zero-forcing beamformers `W = Ĝ^H (Ĝ Ĝ^H)^{-1}` with unit-norm columns,
/// where row `k` of `Ĝ` is `ĥ_k^H`; returned per user.
pub fn zf_beamformers<T: Real>(cdis: &[Vec<Complex<T>>]) -> Result<Vec<Vec<Complex<T>>>> {
    let k = cdis.len();
    let n = cdis.first().map_or(0, Vec::len);
    if k == 0 || n == 0 || cdis.iter().any(|c| c.len() != n) {
        return Err(invalid(
            "zero-forcing needs at least one nonempty, equal-length direction",
        ));
    }
    if k > n {
        return Err(Error::RankDeficient);
    }
    let gram = CMatrix::from_fn(k, k, |i, j| inner(&cdis[i], &cdis[j]));
    let x = solve_hpd(&gram, &CMatrix::identity(k), T::lit(ZF_RANK_TOL))?;
    (0..k)
        .map(|col| {
            let mut w = vec![Complex::new(T::zero(), T::zero()); n];
            for (j, c) in cdis.iter().enumerate() {
                let coef = x[(j, col)];
                for (wi, &ci) in w.iter_mut().zip(c) {
                    *wi = *wi + ci * coef;
                }
            }
            crate::linalg::normalized(&w).ok_or(Error::RankDeficient)
        })
        .collect()
}

/// `Σ_k log₂(1 + (ρ/K)|h_k^H w_k|² / (1 + (ρ/K) Σ_{j≠k} |h_k^H w_j|²))`.
pub fn sum_rate<T: Real>(channels: &[Vec<Complex<T>>], w: &[Vec<Complex<T>>], snr_linear: T) -> T {
    let k = channels.len();
    assert_eq!(k, w.len(), "one beamformer per user");
    if k == 0 {
        return T::zero();
    }
    let p = snr_linear / T::lit(k as f64);
    channels
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let mut signal = T::zero();
            let mut interference = T::zero();
            for (j, wj) in w.iter().enumerate() {
                let g = inner(h, wj).norm_sqr();
                if i == j {
                    signal = g;
                } else {
                    interference = interference + g;
                }
            }
            (T::one() + p * signal / (T::one() + p * interference)).log2()
        })
        .sum()
}

/// Base codebooks shared by every user of a run.
struct SharedBases<T> {
    full: Option<Codebook<T>>,
    h: Option<Codebook<T>>,
    v: Option<Codebook<T>>,
}

struct UserDraw<T> {
    channel: ChannelRealization<T>,
    correlation: OnceCell<CorrelationEstimate<T>>,
    user_seed_path: [u64; 3],
    user: crate::channel::UserGeometry,
}

struct Runner<'a, T> {
    cfg: &'a SimConfig,
    bases: SharedBases<T>,
}

impl<'a, T: Real> Runner<'a, T> {
    fn new(cfg: &'a SimConfig, schemes: &[Scheme]) -> Result<Self> {
        let wants = |s: Scheme| schemes.contains(&s) && !cfg.per_user_base;
        let full = if wants(Scheme::Rc) || wants(Scheme::Tdc) {
            Some(rvq_codebook(
                derive_seed(cfg.seed, &[purpose::BASE]),
                cfg.geometry.n_t(),
                cfg.total_bits,
            )?)
        } else {
            None
        };
        let (h, v) = if wants(Scheme::Iqc) {
            let (bh, bv) = split_bits(cfg.total_bits);
            (
                Some(rvq_codebook(derive_seed(cfg.seed, &[purpose::BASE_H]), cfg.n1, bh)?),
                Some(rvq_codebook(derive_seed(cfg.seed, &[purpose::BASE_V]), cfg.n2, bv)?),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            cfg,
            bases: SharedBases { full, h, v },
        })
    }

    fn draw(&self, trial: usize, attempt: usize) -> Result<Vec<UserDraw<T>>> {
        let cfg = self.cfg;
        let (t, a) = (trial as u64, attempt as u64);
        let scheduled: Vec<usize> = if cfg.users_pool == cfg.scheduled_k {
            (0..cfg.scheduled_k).collect()
        } else {
            let mut rng = stream(cfg.seed, &[t, a, purpose::SCHEDULE]);
            rand::seq::index::sample(&mut rng, cfg.users_pool, cfg.scheduled_k).into_vec()
        };
        scheduled
            .into_iter()
            .map(|u| {
                let path = [t, a, u as u64];
                let user = draw_user(&mut stream(cfg.seed, &[t, a, purpose::USER, u as u64]), &cfg.profile);
                let channel = sample_channel(
                    &mut stream(cfg.seed, &[t, a, purpose::CHANNEL, u as u64]),
                    &cfg.geometry,
                    &cfg.profile,
                    &user,
                )?;
                Ok(UserDraw {
                    channel,
                    correlation: OnceCell::new(),
                    user_seed_path: path,
                    user,
                })
            })
            .collect()
    }

    fn correlation<'d>(&self, d: &'d UserDraw<T>) -> Result<&'d CorrelationEstimate<T>> {
        if let Some(c) = d.correlation.get() {
            return Ok(c);
        }
        let [t, a, u] = d.user_seed_path;
        let c = correlation_analytic(
            &mut stream(self.cfg.seed, &[t, a, purpose::CORRELATION, u]),
            &self.cfg.geometry,
            &self.cfg.profile,
            &d.user,
            self.cfg.ray_draws,
        )?;
        Ok(d.correlation.get_or_init(|| c))
    }

    fn base(
        &self,
        shared: &Option<Codebook<T>>,
        id: u64,
        dim: usize,
        bits: u32,
        path: [u64; 3],
    ) -> Result<Codebook<T>> {
        match shared {
            Some(cb) => Ok(cb.clone()),
            None => rvq_codebook(derive_seed(self.cfg.seed, &[path[0], path[1], id, path[2]]), dim, bits),
        }
    }

    fn resample_seed(&self, path: [u64; 3], which: u64) -> u64 {
        derive_seed(self.cfg.seed, &[path[0], path[1], purpose::RESAMPLE, path[2], which])
    }

    fn feedback(&self, scheme: Scheme, d: &UserDraw<T>) -> Result<Vec<Complex<T>>> {
        let cfg = self.cfg;
        let path = d.user_seed_path;
        let cdi = &d.channel.cdi;
        Ok(match scheme {
            Scheme::PerfectCdi => cdi.clone(),
            Scheme::Rc | Scheme::Tdc => {
                let est = self.correlation(d)?;
                let (s, kind) = if scheme == Scheme::Rc {
                    (psd_sqrt(&est.r)?, CodebookKind::Rotated)
                } else {
                    (
                        rotation_sqrt(&tucker_pipeline(est, cfg.n1, cfg.n2)?),
                        CodebookKind::TuckerRotated,
                    )
                };
                let base = self.base(
                    &self.bases.full,
                    purpose::BASE,
                    cfg.geometry.n_t(),
                    cfg.total_bits,
                    path,
                )?;
                let cb = rotate_resampling(&base, &s, kind, self.resample_seed(path, 0))?;
                quantize(cdi, &cb)?.codeword
            }
            Scheme::Iqc => {
                let est = self.correlation(d)?;
                let (r_h, r_v) = directional_correlations(est.matrix(), cfg.n1, cfg.n2)?;
                let (bh, bv) = split_bits(cfg.total_bits);
                let base_h = self.base(&self.bases.h, purpose::BASE_H, cfg.n1, bh, path)?;
                let base_v = self.base(&self.bases.v, purpose::BASE_V, cfg.n2, bv, path)?;
                let s_h = psd_sqrt(&Hermitian::project(&r_h)?)?;
                let s_v = psd_sqrt(&Hermitian::project(&r_v)?)?;
                let cb_h = rotate_resampling(&base_h, &s_h, CodebookKind::Rotated, self.resample_seed(path, 1))?;
                let cb_v = rotate_resampling(&base_v, &s_v, CodebookKind::Rotated, self.resample_seed(path, 2))?;
                iqc_quantize(cdi, &cb_h, &cb_v)?.codeword
            }
        })
    }

    fn rate(&self, scheme: Scheme, draws: &[UserDraw<T>]) -> Result<T> {
        let fed_back = draws
            .iter()
            .map(|d| self.feedback(scheme, d))
            .collect::<Result<Vec<_>>>()?;
        let w = zf_beamformers(&fed_back)?;
        let channels: Vec<Vec<Complex<T>>> = draws.iter().map(|d| d.channel.h.clone()).collect();
        Ok(sum_rate(&channels, &w, T::lit(self.cfg.snr_linear())))
    }

    /// Rate and redraw count of every scheme for one trial. Attempt `a` of
    /// the trial is drawn once and shared by all schemes that reach it.
    fn trial(&self, trial: usize, schemes: &[Scheme]) -> Result<Vec<(f64, usize)>> {
        let mut attempts: Vec<Vec<UserDraw<T>>> = Vec::new();
        schemes
            .iter()
            .map(|&scheme| {
                for attempt in 0..=MAX_REDRAWS {
                    if attempts.len() <= attempt {
                        attempts.push(self.draw(trial, attempt)?);
                    }
                    match self.rate(scheme, &attempts[attempt]) {
                        Ok(r) => return Ok((r.as_f64(), attempt)),
                        Err(Error::RankDeficient) => continue,
                        Err(e) => return Err(e),
                    }
                }
                Err(Error::AbortTrial {
                    trial,
                    attempts: MAX_REDRAWS + 1,
                })
            })
            .collect()
    }
}

/// Correlation of pool user `user` in attempt `attempt` of `trial`, exactly
/// as the simulator builds it.
pub fn user_correlation<T: Real>(
    cfg: &SimConfig,
    trial: usize,
    attempt: usize,
    user: usize,
) -> Result<CorrelationEstimate<T>> {
    cfg.validate()?;
    if user >= cfg.users_pool {
        return Err(invalid(format!(
            "user {user} is outside the pool of {}",
            cfg.users_pool
        )));
    }
    let (t, a, u) = (trial as u64, attempt as u64, user as u64);
    let geometry = draw_user(&mut stream(cfg.seed, &[t, a, purpose::USER, u]), &cfg.profile);
    correlation_analytic(
        &mut stream(cfg.seed, &[t, a, purpose::CORRELATION, u]),
        &cfg.geometry,
        &cfg.profile,
        &geometry,
        cfg.ray_draws,
    )
}

/// Runs `cfg.trials` trials of `cfg.scheme`.
pub fn run_trials<T: Real>(cfg: &SimConfig) -> Result<SumRateResult> {
    Ok(run_trials_multi::<T>(cfg, &[cfg.scheme])?.remove(0))
}

/// Runs several schemes on the same per-trial draws; `cfg.scheme` is
/// ignored. Each result equals what [`run_trials`] gives for that scheme.
pub fn run_trials_multi<T: Real>(cfg: &SimConfig, schemes: &[Scheme]) -> Result<Vec<SumRateResult>> {
    cfg.validate()?;
    if schemes.is_empty() {
        return Err(invalid("no schemes requested"));
    }
    if schemes.iter().any(|s| s.needs_correlation()) && cfg.geometry.n_t() == 0 {
        return Err(invalid("empty array"));
    }
    let runner = Runner::<T>::new(cfg, schemes)?;
    let outcomes: Vec<Result<Vec<(f64, usize)>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| runner.trial(t, schemes))
        .collect();
    let mut per_scheme = vec![(Vec::with_capacity(cfg.trials), 0usize); schemes.len()];
    for outcome in outcomes {
        for (slot, (rate, redraws)) in per_scheme.iter_mut().zip(outcome?) {
            slot.0.push(rate);
            slot.1 += redraws;
        }
    }
    Ok(per_scheme
        .into_iter()
        .zip(schemes)
        .map(|((rates, redraws), &scheme)| {
            SumRateResult::from_trials(rates, redraws, SimConfig { scheme, ..cfg.clone() })
        })
        .collect())
}

/// Feedback codeword of `scheme` for direction `cdi`, given the user's
/// correlation and the base codebooks (`base` for RC/TDC, `base_h`/`base_v`
/// for IQC).
pub fn scheme_codeword<T: Real>(
    scheme: Scheme,
    cdi: &[Complex<T>],
    est: &CorrelationEstimate<T>,
    n1: usize,
    n2: usize,
    base: &Codebook<T>,
    base_iqc: Option<(&Codebook<T>, &Codebook<T>)>,
) -> Result<Vec<Complex<T>>> {
    Ok(match scheme {
        Scheme::PerfectCdi => cdi.to_vec(),
        Scheme::Rc => {
            quantize(
                cdi,
                &crate::codebook::rotate(base, &psd_sqrt(&est.r)?, CodebookKind::Rotated)?,
            )?
            .codeword
        }
        Scheme::Tdc => {
            let s = rotation_sqrt(&tucker_pipeline(est, n1, n2)?);
            quantize(cdi, &crate::codebook::rotate(base, &s, CodebookKind::TuckerRotated)?)?.codeword
        }
        Scheme::Iqc => {
            let (bh, bv) = base_iqc.ok_or_else(|| invalid("IQC needs horizontal and vertical base codebooks"))?;
            let (r_h, r_v) = directional_correlations(est.matrix(), n1, n2)?;
            let cb_h = crate::codebook::rotate(bh, &psd_sqrt(&Hermitian::project(&r_h)?)?, CodebookKind::Rotated)?;
            let cb_v = crate::codebook::rotate(bv, &psd_sqrt(&Hermitian::project(&r_v)?)?, CodebookKind::Rotated)?;
            iqc_quantize(cdi, &cb_h, &cb_v)?.codeword
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::CorrelationMethod;
    use crate::linalg::{hermitian_eig, kron, normalized, reconstruct};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    type C = Complex<f64>;

    fn gauss_vec(rng: &mut impl Rng, n: usize) -> Vec<C> {
        (0..n)
            .map(|_| C::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect()
    }

    fn small_cfg(scheme: Scheme, k: usize, trials: usize) -> SimConfig {
        let mut cfg = SimConfig::new(ArrayGeometry::ura_half_wavelength(4, 4).unwrap());
        cfg.profile.n_clusters = 4;
        cfg.profile.rays_per_cluster = 5;
        cfg.scheme = scheme;
        cfg.scheduled_k = k;
        cfg.users_pool = k;
        cfg.total_bits = 4;
        cfg.trials = trials;
        cfg.ray_draws = 20;
        cfg.seed = 77;
        cfg
    }

    fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix<f64> {
        let x = CMatrix::from_fn(n, n, |_, _| {
            C::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng))
        });
        hermitian_eig(&Hermitian::new(x.matmul(&x.adjoint())).unwrap())
            .unwrap()
            .vectors
    }

    #[test]
    fn single_user_zf_is_matched_filter() {
        let h = normalized(&[C::new(1.0, 2.0), C::new(0.0, -1.0)]).unwrap();
        let w = zf_beamformers(std::slice::from_ref(&h)).unwrap();
        for (a, b) in w[0].iter().zip(&h) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn orthonormal_feedback_is_its_own_zf() {
        let q = random_unitary(&mut stream(1, &[]), 4);
        let cols: Vec<Vec<C>> = (0..3).map(|j| q.column(j)).collect();
        let w = zf_beamformers(&cols).unwrap();
        for (wj, cj) in w.iter().zip(&cols) {
            for (a, b) in wj.iter().zip(cj) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zf_cross_terms_vanish() {
        let mut rng = stream(2, &[]);
        for _ in 0..20 {
            let cdis: Vec<Vec<C>> = (0..4).map(|_| normalized(&gauss_vec(&mut rng, 6)).unwrap()).collect();
            let w = zf_beamformers(&cdis).unwrap();
            for (j, c) in cdis.iter().enumerate() {
                for (k, wk) in w.iter().enumerate() {
                    let g = inner(c, wk).norm();
                    if j != k {
                        assert!(g < 1e-10, "{g}");
                    }
                }
                assert!((norm_of(&w[j]) - 1.0).abs() < 1e-12);
            }
        }
    }

    fn norm_of(v: &[C]) -> f64 {
        crate::linalg::norm(v)
    }

    #[test]
    fn duplicate_feedback_is_rank_deficient() {
        let h = normalized(&[C::new(1.0, 0.0), C::new(1.0, 1.0)]).unwrap();
        assert_eq!(zf_beamformers(&[h.clone(), h]), Err(Error::RankDeficient));
        let three: Vec<Vec<C>> = (0..3).map(|_| vec![C::new(1.0, 0.0), C::new(0.0, 0.0)]).collect();
        assert_eq!(zf_beamformers(&three), Err(Error::RankDeficient));
    }

    #[test]
    fn closed_form_rates() {
        let h = vec![C::new(1.0, 0.0), C::new(0.0, 0.0)];
        assert!((sum_rate(std::slice::from_ref(&h), std::slice::from_ref(&h), 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(sum_rate(std::slice::from_ref(&h), std::slice::from_ref(&h), 0.0), 0.0);
    }

    #[test]
    fn perfect_cdi_zf_is_interference_free() {
        let mut rng = stream(3, &[]);
        let hs: Vec<Vec<C>> = (0..2).map(|_| gauss_vec(&mut rng, 4)).collect();
        let cdis: Vec<Vec<C>> = hs.iter().map(|h| normalized(h).unwrap()).collect();
        let w = zf_beamformers(&cdis).unwrap();
        let rho = 10.0;
        let mut expected = 0.0;
        for (k, h) in hs.iter().enumerate() {
            let s = inner(h, &w[k]).norm_sqr();
            let i = inner(h, &w[1 - k]).norm_sqr();
            assert!(i < 1e-10 * s);
            expected += (1.0 + rho / 2.0 * s).log2();
        }
        assert!((sum_rate(&hs, &w, rho) - expected).abs() < 1e-10);
    }

    #[test]
    fn rate_ignores_per_user_phase() {
        let mut rng = stream(4, &[]);
        let hs: Vec<Vec<C>> = (0..3).map(|_| gauss_vec(&mut rng, 4)).collect();
        let w = zf_beamformers(&hs.iter().map(|h| normalized(h).unwrap()).collect::<Vec<_>>()).unwrap();
        let rotated: Vec<Vec<C>> = hs
            .iter()
            .enumerate()
            .map(|(k, h)| h.iter().map(|&z| z * C::from_polar(1.0, 0.3 + k as f64)).collect())
            .collect();
        assert!((sum_rate(&hs, &w, 5.0) - sum_rate(&rotated, &w, 5.0)).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg(Scheme::Rc, 2, 1);
        assert!(cfg.validate().is_ok());
        cfg.scheduled_k = 17;
        cfg.users_pool = 17;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(Scheme::Rc, 2, 0);
        assert!(cfg.validate().is_err());
        cfg.trials = 1;
        cfg.n1 = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_trial_is_bit_reproducible() {
        let cfg = small_cfg(Scheme::Tdc, 2, 1);
        let a = run_trials::<f64>(&cfg).unwrap();
        let b = run_trials::<f64>(&cfg).unwrap();
        assert_eq!(a.per_trial[0].to_bits(), b.per_trial[0].to_bits());
        assert_eq!(a.std_error, 0.0);
    }

    #[test]
    fn multi_scheme_matches_single_runs_and_ceiling() {
        let cfg = small_cfg(Scheme::Rc, 2, 12);
        let multi = run_trials_multi::<f64>(&cfg, &Scheme::ALL).unwrap();
        for r in &multi {
            let single = run_trials::<f64>(&SimConfig {
                scheme: r.config_echo.scheme,
                ..cfg.clone()
            })
            .unwrap();
            assert_eq!(single.per_trial, r.per_trial);
            let lo = r.per_trial.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = r.per_trial.iter().cloned().fold(0.0, f64::max);
            assert!(lo >= 0.0 && lo <= r.mean_sum_rate && r.mean_sum_rate <= hi);
        }
        let perfect = multi[3].mean_sum_rate;
        assert!(multi[..3].iter().all(|r| r.mean_sum_rate <= perfect));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = small_cfg(Scheme::Iqc, 2, 8);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_trials::<f64>(&cfg)).unwrap();
        let b = four.install(|| run_trials::<f64>(&cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_user_perfect_cdi_matches_direct_replay() {
        let cfg = small_cfg(Scheme::PerfectCdi, 1, 50);
        let res = run_trials::<f64>(&cfg).unwrap();
        let rho = cfg.snr_linear();
        let direct: f64 = (0..cfg.trials as u64)
            .map(|t| {
                let user = draw_user(&mut stream(cfg.seed, &[t, 0, purpose::USER, 0]), &cfg.profile);
                let ch: ChannelRealization<f64> = sample_channel(
                    &mut stream(cfg.seed, &[t, 0, purpose::CHANNEL, 0]),
                    &cfg.geometry,
                    &cfg.profile,
                    &user,
                )
                .unwrap();
                (1.0 + rho * crate::linalg::norm(&ch.h).powi(2)).log2()
            })
            .sum::<f64>()
            / cfg.trials as f64;
        assert!((res.mean_sum_rate - direct).abs() < 1e-12);
    }

    #[test]
    fn larger_pool_schedules_subset() {
        let mut cfg = small_cfg(Scheme::PerfectCdi, 2, 5);
        cfg.users_pool = 6;
        let r = run_trials::<f64>(&cfg).unwrap();
        assert_eq!(r.per_trial.len(), 5);
    }

    #[test]
    fn per_user_bases_run() {
        let mut cfg = small_cfg(Scheme::Rc, 2, 3);
        cfg.per_user_base = true;
        let r = run_trials_multi::<f64>(&cfg, &[Scheme::Rc, Scheme::Iqc]).unwrap();
        assert!(r.iter().all(|x| x.mean_sum_rate > 0.0));
    }

    #[test]
    fn exported_user_correlation_matches_simulation() {
        let cfg = small_cfg(Scheme::Rc, 2, 1);
        let runner = Runner::<f64>::new(&cfg, &[Scheme::Rc]).unwrap();
        let draws = runner.draw(3, 0).unwrap();
        let inside = runner.correlation(&draws[1]).unwrap();
        assert_eq!(&user_correlation::<f64>(&cfg, 3, 0, 1).unwrap(), inside);
    }

    #[test]
    fn tdc_equals_rc_on_separable_diagonal_core() {
        let mut rng = stream(5, &[]);
        let (n1, n2) = (2, 3);
        let w = kron(&random_unitary(&mut rng, n2), &random_unitary(&mut rng, n1)).unwrap();
        let d: Vec<f64> = (0..6).map(|_| rng.random::<f64>() + 0.1).collect();
        let r = Hermitian::new(reconstruct(&w, &d)).unwrap();
        let est = CorrelationEstimate::new(r, 1, CorrelationMethod::Analytic).unwrap();
        let base = rvq_codebook::<f64>(6, 6, 6).unwrap();
        for _ in 0..20 {
            let cdis: Vec<Vec<C>> = (0..3).map(|_| normalized(&gauss_vec(&mut rng, 6)).unwrap()).collect();
            let hs = cdis.clone();
            let fb = |s| {
                cdis.iter()
                    .map(|c| scheme_codeword(s, c, &est, n1, n2, &base, None).unwrap())
                    .collect::<Vec<_>>()
            };
            let (rc, tdc) = (fb(Scheme::Rc), fb(Scheme::Tdc));
            for (a, b) in rc.iter().zip(&tdc) {
                assert!(inner(a, b).norm() > 1.0 - 1e-9);
            }
            match (zf_beamformers(&rc), zf_beamformers(&tdc)) {
                (Ok(wa), Ok(wb)) => assert!((sum_rate(&hs, &wa, 10.0) - sum_rate(&hs, &wb, 10.0)).abs() < 1e-9),
                (Err(a), Err(b)) => assert_eq!(a, b),
                _ => panic!("schemes disagree on rank"),
            }
        }
    }
}
