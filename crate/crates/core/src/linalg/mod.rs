//! Dense complex linear algebra used by every other module.

mod eig;
mod matrix;
mod ops;

pub use eig::{
    cholesky, dominant_triplet, hermitian_eig, psd_sqrt, reconstruct, solve_hpd, Hermitian, HermitianEig,
    SingularTriplet, POWER_ITERATION_THRESHOLD,
};
pub use matrix::{fix_phase, inner, norm, normalized, CMatrix};
pub use ops::{kron, kron_vec, rearrange, reshape, unrearrange, vec};
