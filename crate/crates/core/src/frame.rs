//! Time-stamped measurement vectors and contiguous windows of them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::kmd::KmdError;

/// Tolerance on the sample grid when checking that a window is equispaced.
pub const TIME_TOLERANCE: f64 = 1e-9;

/// One snapshot of all `p` sensor channels at time `t` (seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFrame {
    pub t: f64,
    pub values: Vec<f64>,
}

impl MeasurementFrame {
    pub fn new(t: f64, values: Vec<f64>) -> Self {
        Self { t, values }
    }

    pub fn zeros(t: f64, p: usize) -> Self {
        Self { t, values: vec![0.0; p] }
    }

    /// Number of sensor channels.
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// An ordered, equispaced run of frames of a common dimension.
///
/// Construction validates the invariants, so every `StreamWindow` in hand has
/// at least two frames, a fixed dimension and a constant sample interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamWindow {
    frames: Vec<MeasurementFrame>,
    dt: f64,
}

impl StreamWindow {
    /// Builds a window, inferring the sample interval from the first two frames.
    pub fn new(frames: Vec<MeasurementFrame>) -> Result<Self, KmdError> {
        if frames.len() < 2 {
            return Err(KmdError::WindowTooShort {
                len: frames.len(),
                min: 2,
            });
        }
        let dt = frames[1].t - frames[0].t;
        Self::with_dt(frames, dt)
    }

    /// Builds a window with an explicit sample interval.
    pub fn with_dt(frames: Vec<MeasurementFrame>, dt: f64) -> Result<Self, KmdError> {
        if frames.len() < 2 {
            return Err(KmdError::WindowTooShort {
                len: frames.len(),
                min: 2,
            });
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(KmdError::InvalidParameter(format!(
                "sample interval must be positive, got {dt}"
            )));
        }
        let p = frames[0].dim();
        let t0 = frames[0].t;
        for (i, f) in frames.iter().enumerate() {
            if f.dim() != p {
                return Err(KmdError::DimensionMismatch {
                    expected: p,
                    found: f.dim(),
                });
            }
            let expected = t0 + i as f64 * dt;
            if (f.t - expected).abs() > TIME_TOLERANCE.max(1e-12 * expected.abs()) {
                return Err(KmdError::NonEquispaced { index: i });
            }
        }
        Ok(Self { frames, dt })
    }

    /// Builds a window from a `p x len` matrix whose columns are snapshots.
    pub fn from_columns(t0: f64, dt: f64, data: &DMatrix<f64>) -> Result<Self, KmdError> {
        let frames = data
            .column_iter()
            .enumerate()
            .map(|(i, c)| MeasurementFrame::new(t0 + i as f64 * dt, c.iter().copied().collect()))
            .collect();
        Self::with_dt(frames, dt)
    }

    pub fn frames(&self) -> &[MeasurementFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<MeasurementFrame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frames[0].dim()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn first(&self) -> &MeasurementFrame {
        &self.frames[0]
    }

    pub fn last(&self) -> &MeasurementFrame {
        &self.frames[self.frames.len() - 1]
    }

    /// Sub-window over `range`; the result must still hold at least two frames.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self, KmdError> {
        Self::with_dt(self.frames[range].to_vec(), self.dt)
    }

    /// Snapshot matrix, one column per frame.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let p = self.dim();
        DMatrix::from_fn(p, self.len(), |r, c| self.frames[c].values[r])
    }

    /// True when every reading in the window is exactly zero.
    pub fn is_all_zero(&self) -> bool {
        self.frames
            .iter()
            .all(|f| f.values.iter().all(|&v| v == 0.0))
    }
}
