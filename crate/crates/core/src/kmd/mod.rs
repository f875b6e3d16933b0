//! Empirical Koopman operator estimation, multi-step prediction and Koopman
//! mode decomposition of snapshot sequences.
//!
//! The observable is the raw sensor vector: a window of snapshots
//! `g_0, ..., g_n` yields the one-step operator
//!
//! ```text
//! K = K1 K2^+,   K1 = (1/n) sum g_{k+1} g_k^T,   K2 = (1/n) sum g_k g_k^T
//! ```
//!
//! and the same kernel, applied to a short window and eigendecomposed, yields
//! the modes `v_j` and eigenvalues `lambda_j` with `g_k ~ sum_j lambda_j^k v_j`.

mod eig;
mod modes;
mod operator;
mod svd;

pub use modes::{decompose_modes, ModeSet};
pub use operator::{estimate_koopman, predict, KoopmanEstimate};

use thiserror::Error;

/// Default relative singular-value cutoff for pseudo-inverses.
pub const DEFAULT_RCOND: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KmdError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("window has {len} frames, at least {min} required")]
    WindowTooShort { len: usize, min: usize },
    #[error("frame {index} is off the sample grid")]
    NonEquispaced { index: usize },
    #[error("window is identically zero")]
    DegenerateWindow,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("estimated operator is not finite")]
    NonFinite,
}

/// Knobs shared by [`estimate_koopman`] and [`decompose_modes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Singular values of `K2` at or below `rcond * sigma_max` are discarded.
    pub rcond: f64,
    /// Reject all-zero windows with [`KmdError::DegenerateWindow`] instead of
    /// returning a zero result.
    pub strict: bool,
}

impl FitOptions {
    pub fn new(rcond: f64) -> Self {
        Self { rcond, strict: false }
    }

    pub fn strict(mut self) -> Self {
        self.strict = true;
        self
    }

    pub(crate) fn validate(&self) -> Result<(), KmdError> {
        if self.rcond > 0.0 && self.rcond < 1.0 {
            Ok(())
        } else {
            Err(KmdError::InvalidParameter(format!(
                "rcond must lie in (0, 1), got {}",
                self.rcond
            )))
        }
    }
}

impl Default for FitOptions {
    fn default() -> Self {
        Self::new(DEFAULT_RCOND)
    }
}
