//! Entropy-regularized unbalanced optimal transport (UOT) and maximum mean
//! discrepancies (MMD) between discrete measures of possibly different total
//! mass, with the kernel matrix-vector products accelerated from O(n^2) to
//! O(n log n) by an NFFT-based fast summation scheme.
//!
//! The crate also evaluates closed-form upper bounds for UOT and the
//! Hölder-type inequalities linking UOT, Wasserstein distance and MMD.

pub mod bounds;
pub mod divergences;
pub mod error;
pub mod fastsum;
pub mod fft;
pub mod io;
mod jet;
pub mod kernels;
pub mod measures;
pub mod nfft;
pub mod rng;
pub mod sinkhorn;

pub use error::OtError;
pub type Result<T> = std::result::Result<T, OtError>;
