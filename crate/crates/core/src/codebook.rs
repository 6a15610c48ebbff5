//! Base RVQ codebooks, correlation-rotated codebooks and codeword selection.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{inner, kron_vec, norm, normalized, reshape, Hermitian};
use crate::rng::stream;
use crate::scalar::Real;

/// Largest accepted `bits` for a single codebook.
pub const MAX_CODEBOOK_BITS: u32 = 20;
/// Codebooks at least this large are scanned in parallel chunks.
const PARALLEL_SCAN_MIN: usize = 4096;
const RESAMPLE_ATTEMPTS: u64 = 16;
const RESAMPLE_STREAM: u64 = 0x7265_7361_6d70;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CodebookKind {
    BaseRvq,
    Rotated,
    TuckerRotated,
    ProductIqc,
}

impl CodebookKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BaseRvq => "base_rvq",
            Self::Rotated => "rotated",
            Self::TuckerRotated => "tucker_rotated",
            Self::ProductIqc => "product_iqc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "base_rvq" => Self::BaseRvq,
            "rotated" => Self::Rotated,
            "tucker_rotated" => Self::TuckerRotated,
            "product_iqc" => Self::ProductIqc,
            _ => return None,
        })
    }
}

/// `2^bits` unit-norm codewords of length `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook<T> {
    dim: usize,
    bits: u32,
    codewords: Vec<Vec<Complex<T>>>,
    kind: CodebookKind,
}

fn unit_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(100.0))
}

impl<T: Real> Codebook<T> {
    pub fn new(dim: usize, bits: u32, codewords: Vec<Vec<Complex<T>>>, kind: CodebookKind) -> Result<Self> {
        if bits > MAX_CODEBOOK_BITS {
            return Err(Error::ResourceLimit(format!(
                "{bits} bits exceeds the {MAX_CODEBOOK_BITS}-bit limit"
            )));
        }
        if dim == 0 {
            return Err(invalid("codeword dimension must be positive"));
        }
        if codewords.len() != 1usize << bits {
            return Err(invalid(format!(
                "{bits}-bit codebook needs {} codewords, got {}",
                1usize << bits,
                codewords.len()
            )));
        }
        for (i, c) in codewords.iter().enumerate() {
            if c.len() != dim {
                return Err(invalid(format!("codeword {i} has length {}, expected {dim}", c.len())));
            }
            if (norm(c) - T::one()).abs() > unit_tol() {
                return Err(invalid(format!("codeword {i} is not unit norm")));
            }
        }
        Ok(Self {
            dim,
            bits,
            codewords,
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    pub fn codewords(&self) -> &[Vec<Complex<T>>] {
        &self.codewords
    }

    pub fn codeword(&self, i: usize) -> &[Complex<T>] {
        &self.codewords[i]
    }
}

fn gaussian_unit_vector<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Complex<T>> {
    loop {
        let v: Vec<Complex<T>> = (0..dim)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex::new(T::lit(re), T::lit(im))
            })
            .collect();
        if let Some(u) = normalized(&v) {
            return u;
        }
    }
}

/// `2^bits` normalised i.i.d. complex Gaussian vectors drawn in sequence
/// from `seed`, so a smaller codebook is a prefix of a larger one.
pub fn rvq_codebook<T: Real>(seed: u64, dim: usize, bits: u32) -> Result<Codebook<T>> {
    if bits > MAX_CODEBOOK_BITS {
        return Err(Error::ResourceLimit(format!(
            "{bits} bits exceeds the {MAX_CODEBOOK_BITS}-bit limit"
        )));
    }
    if dim == 0 {
        return Err(invalid("codeword dimension must be positive"));
    }
    let mut rng = stream(seed, &[]);
    let codewords = (0..1usize << bits)
        .map(|_| gaussian_unit_vector(&mut rng, dim))
        .collect();
    Codebook::new(dim, bits, codewords, CodebookKind::BaseRvq)
}

fn rotate_one<T: Real>(s: &Hermitian<T>, c: &[Complex<T>], floor: T) -> Option<Vec<Complex<T>>> {
    let f = s.matrix().matvec(c);
    if norm(&f) <= floor {
        return None;
    }
    normalized(&f)
}

fn degenerate_floor<T: Real>(s: &Hermitian<T>) -> T {
    T::epsilon() * T::lit(64.0) * s.matrix().frobenius_norm()
}

/// `f_i = S c_i / ||S c_i||` for a square-root rotation `S`.
///
/// A codeword mapped (numerically) into the null space of `S` is reported as
/// [`Error::DegenerateCodeword`].
pub fn rotate<T: Real>(base: &Codebook<T>, r_sqrt: &Hermitian<T>, kind: CodebookKind) -> Result<Codebook<T>> {
    if r_sqrt.dim() != base.dim {
        return Err(invalid(format!(
            "rotation is {}x{}, codewords have length {}",
            r_sqrt.dim(),
            r_sqrt.dim(),
            base.dim
        )));
    }
    let floor = degenerate_floor(r_sqrt);
    let codewords = base
        .codewords
        .iter()
        .enumerate()
        .map(|(i, c)| rotate_one(r_sqrt, c, floor).ok_or(Error::DegenerateCodeword { index: i }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Codebook {
        dim: base.dim,
        bits: base.bits,
        codewords,
        kind,
    })
}

/// Like [`rotate`], but a degenerate index is replaced by a fresh Gaussian
/// base vector drawn from a sub-stream of `seed` keyed by the index.
pub fn rotate_resampling<T: Real>(
    base: &Codebook<T>,
    r_sqrt: &Hermitian<T>,
    kind: CodebookKind,
    seed: u64,
) -> Result<Codebook<T>> {
    match rotate(base, r_sqrt, kind) {
        Err(Error::DegenerateCodeword { .. }) => {}
        other => return other,
    }
    let floor = degenerate_floor(r_sqrt);
    let codewords = base
        .codewords
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if let Some(f) = rotate_one(r_sqrt, c, floor) {
                return Ok(f);
            }
            for attempt in 0..RESAMPLE_ATTEMPTS {
                let mut rng = stream(seed, &[RESAMPLE_STREAM, i as u64, attempt]);
                let fresh = gaussian_unit_vector(&mut rng, base.dim);
                if let Some(f) = rotate_one(r_sqrt, &fresh, floor) {
                    return Ok(f);
                }
            }
            Err(Error::DegenerateCodeword { index: i })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Codebook {
        dim: base.dim,
        bits: base.bits,
        codewords,
        kind,
    })
}

/// Selected codeword and its fidelity `|f^H cdi|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizationResult<T> {
    pub index: usize,
    pub codeword: Vec<Complex<T>>,
    pub fidelity: T,
}

/// Highest `score(i)` over `0..n`; ties go to the lowest index.
fn argmax<T: Real>(n: usize, score: impl Fn(usize) -> T + Sync) -> (usize, T) {
    let scan = |range: std::ops::Range<usize>| {
        let mut best = (range.start, T::neg_infinity());
        for i in range {
            let s = score(i);
            if s > best.1 {
                best = (i, s);
            }
        }
        best
    };
    if n < PARALLEL_SCAN_MIN {
        return scan(0..n);
    }
    let chunk = PARALLEL_SCAN_MIN / 4;
    (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| scan(c * chunk..((c + 1) * chunk).min(n)))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(
            (0, T::neg_infinity()),
            |best, cand| if cand.1 > best.1 { cand } else { best },
        )
}

fn fidelity<T: Real>(f: &[Complex<T>], cdi: &[Complex<T>]) -> T {
    inner(f, cdi).norm_sqr().min(T::one())
}

/// Codeword maximising `|f_i^H cdi|²`.
pub fn quantize<T: Real>(cdi: &[Complex<T>], cb: &Codebook<T>) -> Result<QuantizationResult<T>> {
    if cdi.len() != cb.dim {
        return Err(invalid(format!(
            "CDI has length {}, codebook dimension is {}",
            cdi.len(),
            cb.dim
        )));
    }
    let (index, _) = argmax(cb.len(), |i| inner(&cb.codewords[i], cdi).norm_sqr());
    let codeword = cb.codewords[index].clone();
    let fidelity = fidelity(&codeword, cdi);
    Ok(QuantizationResult {
        index,
        codeword,
        fidelity,
    })
}

/// Bits for the horizontal and vertical books when `total` is split
/// between them; the horizontal book gets the extra bit of an odd total.
pub fn split_bits(total: u32) -> (u32, u32) {
    (total.div_ceil(2), total / 2)
}

/// Direction-wise quantization with a product codeword.
///
/// With `H` the `n1 x n2` reshape of `cdi`, `c_h` maximises `||H^H c_h||`,
/// then `c_v` maximises `|c_h^H H conj(c_v)|`. The returned codeword is
/// `vec(c_h c_vᵀ) = c_v ⊗ c_h` and its index is `i_h * |cb_v| + i_v`.
pub fn iqc_quantize<T: Real>(
    cdi: &[Complex<T>],
    cb_h: &Codebook<T>,
    cb_v: &Codebook<T>,
) -> Result<QuantizationResult<T>> {
    let (n1, n2) = (cb_h.dim, cb_v.dim);
    if n1 * n2 != cdi.len() {
        return Err(invalid(format!(
            "codebook dimensions {n1} x {n2} do not match CDI length {}",
            cdi.len()
        )));
    }
    let h = reshape(cdi, n1, n2)?;
    let (i_h, _) = argmax(cb_h.len(), |i| norm(&h.adjoint_matvec(&cb_h.codewords[i])).powi(2));
    let c_h = &cb_h.codewords[i_h];
    let conj_c_h: Vec<Complex<T>> = c_h.iter().map(|z| z.conj()).collect();
    let y = h.transpose().matvec(&conj_c_h);
    let (i_v, _) = argmax(cb_v.len(), |i| inner(&cb_v.codewords[i], &y).norm_sqr());
    let codeword = kron_vec(&cb_v.codewords[i_v], c_h);
    let fidelity = fidelity(&codeword, cdi);
    Ok(QuantizationResult {
        index: i_h * cb_v.len() + i_v,
        codeword,
        fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{psd_sqrt, CMatrix};
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn basis_codebook(n: usize, bits: u32) -> Codebook<f64> {
        let words = (0..1usize << bits)
            .map(|i| {
                let mut e = vec![C::new(0.0, 0.0); n];
                e[i % n] = C::new(1.0, 0.0);
                e
            })
            .collect();
        Codebook::new(n, bits, words, CodebookKind::BaseRvq).unwrap()
    }

    #[test]
    fn zero_bits_gives_one_unit_vector() {
        let cb = rvq_codebook::<f64>(1, 5, 0).unwrap();
        assert_eq!(cb.len(), 1);
        assert!((norm(cb.codeword(0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rvq_is_deterministic_nested_and_bounded() {
        let a = rvq_codebook::<f64>(9, 4, 6).unwrap();
        assert_eq!(a, rvq_codebook(9, 4, 6).unwrap());
        let small = rvq_codebook::<f64>(9, 4, 3).unwrap();
        assert_eq!(small.codewords(), &a.codewords()[..8]);
        assert!(matches!(rvq_codebook::<f64>(9, 4, 21), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn larger_rvq_quantizes_better() {
        let big = rvq_codebook::<f64>(2, 4, 8).unwrap();
        let small = rvq_codebook::<f64>(3, 4, 4).unwrap();
        let mut rng = stream(4, &[]);
        let (mut fb, mut fs) = (0.0, 0.0);
        for _ in 0..1000 {
            let h = gaussian_unit_vector::<f64, _>(&mut rng, 4);
            fb += quantize(&h, &big).unwrap().fidelity;
            fs += quantize(&h, &small).unwrap().fidelity;
        }
        assert!(fb > fs, "{fb} vs {fs}");
    }

    #[test]
    fn identity_rotation_is_a_no_op() {
        let base = rvq_codebook::<f64>(5, 4, 3).unwrap();
        let rot = rotate(
            &base,
            &Hermitian::new(CMatrix::identity(4)).unwrap(),
            CodebookKind::Rotated,
        )
        .unwrap();
        for (a, b) in rot.codewords().iter().zip(base.codewords()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).norm() < 1e-15);
            }
        }
        assert_eq!(rot.kind(), CodebookKind::Rotated);
    }

    #[test]
    fn rank_one_rotation_collapses_onto_direction() {
        let q = normalized(&[C::new(1.0, 0.5), C::new(-0.3, 0.2), C::new(0.0, 1.0)]).unwrap();
        let r = CMatrix::from_fn(3, 3, |i, j| q[i] * q[j].conj());
        let s = psd_sqrt(&Hermitian::new(r).unwrap()).unwrap();
        let cb = rotate(&rvq_codebook(6, 3, 4).unwrap(), &s, CodebookKind::Rotated).unwrap();
        for c in cb.codewords() {
            assert!((inner(c, &q).norm() - 1.0).abs() < 1e-9);
        }
        assert!((quantize(&q, &cb).unwrap().fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn null_space_codeword_is_reported_and_resampled() {
        let s = Hermitian::new(CMatrix::from_real_diag(&[1.0, 0.0])).unwrap();
        let words = vec![
            vec![C::new(0.0, 0.0), C::new(1.0, 0.0)],
            vec![C::new(1.0, 0.0), C::new(0.0, 0.0)],
        ];
        let base = Codebook::new(2, 1, words, CodebookKind::BaseRvq).unwrap();
        assert_eq!(
            rotate(&base, &s, CodebookKind::Rotated),
            Err(Error::DegenerateCodeword { index: 0 })
        );
        let fixed = rotate_resampling(&base, &s, CodebookKind::Rotated, 3).unwrap();
        assert!((fixed.codeword(0)[0].norm() - 1.0).abs() < 1e-12);
        assert_eq!(fixed, rotate_resampling(&base, &s, CodebookKind::Rotated, 3).unwrap());
    }

    #[test]
    fn quantize_finds_contained_and_basis_vectors() {
        let cb = rvq_codebook::<f64>(7, 6, 4).unwrap();
        let r = quantize(cb.codeword(11), &cb).unwrap();
        assert_eq!(r.index, 11);
        assert!((r.fidelity - 1.0).abs() < 1e-12);
        let basis = basis_codebook(4, 2);
        let mut e = vec![C::new(0.0, 0.0); 4];
        e[2] = C::new(1.0, 0.0);
        assert_eq!(quantize(&e, &basis).unwrap().index, 2);
        assert!(quantize(&e[..3], &basis).is_err());
    }

    #[test]
    fn quantize_ties_pick_lowest_index() {
        let cb = basis_codebook(2, 2); // e0, e1, e0, e1
        let h = vec![C::new(0.0, 0.0), C::new(0.0, 1.0)];
        assert_eq!(quantize(&h, &cb).unwrap().index, 1);
    }

    #[test]
    fn parallel_scan_matches_linear_scan() {
        let cb = rvq_codebook::<f64>(8, 3, 13).unwrap();
        let mut rng = stream(9, &[]);
        for _ in 0..5 {
            let h = gaussian_unit_vector::<f64, _>(&mut rng, 3);
            let mut best = (0, -1.0);
            for (i, c) in cb.codewords().iter().enumerate() {
                let f = inner(c, &h).norm_sqr();
                if f > best.1 {
                    best = (i, f);
                }
            }
            assert_eq!(quantize(&h, &cb).unwrap().index, best.0);
        }
    }

    #[test]
    fn iqc_exact_on_separable_cdi() {
        let cb_h = rvq_codebook::<f64>(10, 3, 2).unwrap();
        let cb_v = rvq_codebook::<f64>(11, 2, 2).unwrap();
        let cdi = kron_vec(cb_v.codeword(3), cb_h.codeword(1));
        let r = iqc_quantize(&cdi, &cb_h, &cb_v).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-12);
        assert_eq!(r.index, 4 + 3);
        assert!(iqc_quantize(&cdi[..5], &cb_h, &cb_v).is_err());
    }

    #[test]
    fn iqc_scalar_case() {
        let cb = rvq_codebook::<f64>(12, 1, 2).unwrap();
        let cdi = vec![C::from_polar(1.0, 0.7)];
        assert!((iqc_quantize(&cdi, &cb, &cb).unwrap().fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iqc_never_beats_joint_exhaustive_pairs() {
        let cb_h = rvq_codebook::<f64>(13, 4, 4).unwrap();
        let cb_v = rvq_codebook::<f64>(14, 4, 4).unwrap();
        let mut rng = stream(15, &[]);
        let mut gap = 0.0;
        for _ in 0..50 {
            let cdi = gaussian_unit_vector::<f64, _>(&mut rng, 16);
            let seq = iqc_quantize(&cdi, &cb_h, &cb_v).unwrap().fidelity;
            let mut joint: f64 = 0.0;
            for ch in cb_h.codewords() {
                for cv in cb_v.codewords() {
                    joint = joint.max(inner(&kron_vec(cv, ch), &cdi).norm_sqr());
                }
            }
            assert!(joint >= seq - 1e-12);
            gap += joint - seq;
        }
        assert!(gap >= 0.0);
    }

    #[test]
    fn bit_split_favours_horizontal() {
        assert_eq!(split_bits(8), (4, 4));
        assert_eq!(split_bits(7), (4, 3));
        assert_eq!(split_bits(0), (0, 0));
    }

    proptest! {
        #[test]
        fn fidelity_ignores_global_phase(seed in 0u64..1000, alpha in 0.0f64..6.3) {
            let cb = rvq_codebook::<f64>(seed, 4, 5).unwrap();
            let h = gaussian_unit_vector::<f64, _>(&mut stream(seed, &[1]), 4);
            let rotated: Vec<C> = h.iter().map(|&z| z * C::from_polar(1.0, alpha)).collect();
            let a = quantize(&h, &cb).unwrap();
            let b = quantize(&rotated, &cb).unwrap();
            prop_assert_eq!(a.index, b.index);
            prop_assert!((a.fidelity - b.fidelity).abs() < 1e-12);
        }

        #[test]
        fn appending_codewords_never_hurts(seed in 0u64..1000, bits in 1u32..7) {
            let small = rvq_codebook::<f64>(seed, 4, bits - 1).unwrap();
            let big = rvq_codebook::<f64>(seed, 4, bits).unwrap();
            let h = gaussian_unit_vector::<f64, _>(&mut stream(seed, &[2]), 4);
            prop_assert!(quantize(&h, &big).unwrap().fidelity >= quantize(&h, &small).unwrap().fidelity);
        }
    }
}
