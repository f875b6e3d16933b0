//! Online attack identification on a sliding window of received frames.
//!
//! A window of `n + 1` frames is split into a learning part (the first
//! `n - n_tilde` frames) and a prediction part (the last `n_tilde + 1`). The
//! operator fitted on the learning part predicts the prediction part open
//! loop from the last learning frame; the prediction error is decomposed into
//! modes, and sensors are grouped by their normalized mode signatures. A
//! grouping whose between-group divergence dominates the within-group
//! divergence is an attack verdict, and the minority group is flagged.

mod step;
mod stream;

pub use step::{compute_error_sequence, detect_step, separation_ratio};
pub use stream::{detect_stream, Detector, DetectStream};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{ClusterError, DEFAULT_EPSILON};
use crate::kmd::{KmdError, DEFAULT_RCOND};

/// Floor on the within-cluster divergence in the separation ratio.
pub const INTRA_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("history has {len} frames, {needed} required")]
    InsufficientHistory { len: usize, needed: usize },
    #[error("invalid `{field}`: {message}")]
    InvalidConfig { field: &'static str, message: String },
    #[error(transparent)]
    Kmd(#[from] KmdError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    /// Total window length; the detector looks at `n + 1` frames.
    pub n: usize,
    /// Prediction window length.
    pub n_tilde: usize,
    pub rcond: f64,
    pub epsilon: f64,
    /// Number of clusters.
    pub k: usize,
    /// Separation ratio at or above which a step is an attack.
    pub tau: f64,
    /// Consecutive steps a sensor must sit in the attacked cluster before it
    /// is reported by [`Detector`].
    pub min_flag_persistence: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            n: 120,
            n_tilde: 12,
            rcond: DEFAULT_RCOND,
            epsilon: DEFAULT_EPSILON,
            k: 2,
            tau: 3.0,
            min_flag_persistence: 2,
        }
    }
}

impl WindowConfig {
    pub fn learning_len(&self) -> usize {
        self.n.saturating_sub(self.n_tilde)
    }

    pub fn history_len(&self) -> usize {
        self.n + 1
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |field, message: String| Err(DetectError::InvalidConfig { field, message });
        if self.n_tilde < 2 {
            return bad("n_tilde", format!("must be at least 2, got {}", self.n_tilde));
        }
        if self.n_tilde >= self.n {
            return bad("n_tilde", format!("must be smaller than n = {}, got {}", self.n, self.n_tilde));
        }
        if self.n - self.n_tilde < 3 {
            return bad("n", format!("learning window n - n_tilde = {} is shorter than 3", self.n - self.n_tilde));
        }
        if !(self.rcond > 0.0 && self.rcond < 1.0) {
            return bad("rcond", format!("must lie in (0, 1), got {}", self.rcond));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return bad("epsilon", format!("must be non-negative, got {}", self.epsilon));
        }
        if self.k < 2 {
            return bad("k", format!("must be at least 2, got {}", self.k));
        }
        if !(self.tau > 1.0) || !self.tau.is_finite() {
            return bad("tau", format!("must exceed 1, got {}", self.tau));
        }
        if self.min_flag_persistence < 1 {
            return bad("min_flag_persistence", "must be at least 1".into());
        }
        Ok(())
    }
}

/// Outcome of one detection step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Time of the newest frame in the window.
    pub t: f64,
    pub labels: Vec<usize>,
    pub separation: f64,
    pub attack: bool,
    /// Sensors reported as attacked, ascending. Empty iff `attack` is false.
    pub flagged: Vec<usize>,
    /// Members of the attacked cluster at this step before debouncing; empty
    /// when the separation is below `tau`.
    pub candidates: Vec<usize>,
    /// Relative reconstruction error of the mode decomposition.
    pub modes_residual: f64,
    /// Normalized mode magnitudes, one row per sensor.
    pub mode_spread: Vec<Vec<f64>>,
}
