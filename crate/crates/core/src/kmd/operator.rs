use nalgebra::{DMatrix, DVector};

use super::svd::thin_svd;
use super::{FitOptions, KmdError};
use crate::frame::{MeasurementFrame, StreamWindow};

/// The `p x p` empirical Koopman operator fitted on one window.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanEstimate {
    pub operator: DMatrix<f64>,
    /// Number of singular values of `K2` kept by the pseudo-inverse.
    pub rank: usize,
    /// Absolute singular-value threshold that was applied.
    pub rcond_cutoff: f64,
    /// Sample interval of the window the operator was fitted on.
    pub dt: f64,
}

impl KoopmanEstimate {
    pub fn dim(&self) -> usize {
        self.operator.nrows()
    }
}

/// Fits `K = K1 K2^+` on every consecutive pair of frames of `window`.
///
/// The estimate is uncentered: constant offsets in the data are part of what
/// the operator has to reproduce.
pub fn estimate_koopman(
    window: &StreamWindow,
    opts: &FitOptions,
) -> Result<KoopmanEstimate, KmdError> {
    opts.validate()?;
    if window.len() < 3 {
        return Err(KmdError::WindowTooShort {
            len: window.len(),
            min: 3,
        });
    }
    let p = window.dim();
    if window.is_all_zero() {
        if opts.strict {
            return Err(KmdError::DegenerateWindow);
        }
        return Ok(KoopmanEstimate {
            operator: DMatrix::zeros(p, p),
            rank: 0,
            rcond_cutoff: 0.0,
            dt: window.dt(),
        });
    }

    let data = window.to_matrix();
    let n = window.len() - 1;
    let past = data.columns(0, n);
    let future = data.columns(1, n);
    // K1 K2^+ = Y X^+ for past snapshots X and future snapshots Y; the
    // singular values of K2 are sigma^2 / n.
    let Some(svd) = thin_svd(&past.into_owned()) else {
        return Err(KmdError::NonFinite);
    };
    let sigma_max = svd.sigma.iter().fold(0.0_f64, |a, &s| a.max(s));
    let rcond_cutoff = opts.rcond * sigma_max * sigma_max / n as f64;
    let mut pinv_t = DMatrix::zeros(n, p);
    let mut rank = 0;
    for (i, &s) in svd.sigma.iter().enumerate() {
        if s * s / n as f64 > rcond_cutoff {
            rank += 1;
            pinv_t.ger(1.0 / s, &svd.v.column(i), &svd.u.column(i), 1.0);
        }
    }
    let operator = future * pinv_t;
    if operator.iter().any(|v| !v.is_finite()) {
        return Err(KmdError::NonFinite);
    }
    Ok(KoopmanEstimate {
        operator,
        rank,
        rcond_cutoff,
        dt: window.dt(),
    })
}

/// Advances `anchor` by `1..=m` applications of the operator.
///
/// Each step is a single matrix-vector product on the previous prediction.
pub fn predict(
    estimate: &KoopmanEstimate,
    anchor: &MeasurementFrame,
    m: usize,
) -> Result<Vec<MeasurementFrame>, KmdError> {
    if anchor.dim() != estimate.dim() {
        return Err(KmdError::DimensionMismatch {
            expected: estimate.dim(),
            found: anchor.dim(),
        });
    }
    if m == 0 {
        return Err(KmdError::InvalidParameter(
            "prediction horizon must be at least 1".into(),
        ));
    }
    let mut state = DVector::from_column_slice(&anchor.values);
    let mut out = Vec::with_capacity(m);
    for step in 1..=m {
        state = &estimate.operator * state;
        out.push(MeasurementFrame::new(
            anchor.t + step as f64 * estimate.dt,
            state.iter().copied().collect(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, Matrix2};

    fn window_of(points: &[Vec<f64>], dt: f64) -> StreamWindow {
        StreamWindow::new(
            points
                .iter()
                .enumerate()
                .map(|(i, v)| MeasurementFrame::new(i as f64 * dt, v.clone()))
                .collect(),
        )
        .unwrap()
    }

    fn rotation(theta: f64) -> Matrix2<f64> {
        Matrix2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos())
    }

    fn rotation_window(steps: usize) -> StreamWindow {
        let r = rotation(0.1);
        let mut x = nalgebra::Vector2::new(1.0, 0.0);
        let mut pts = vec![vec![x[0], x[1]]];
        for _ in 0..steps {
            x = r * x;
            pts.push(vec![x[0], x[1]]);
        }
        window_of(&pts, 0.1)
    }

    #[test]
    fn constant_sequence_gives_rank_one_projector() {
        let w = window_of(&vec![vec![1.0, 0.0]; 5], 1.0);
        let k = estimate_koopman(&w, &FitOptions::default()).unwrap();
        assert_eq!(k.rank, 1);
        assert!((&k.operator - dmatrix![1.0, 0.0; 0.0, 0.0]).norm() < 1e-15);
        let image = &k.operator * DVector::from_vec(vec![1.0, 0.0]);
        assert!((image - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn rotation_is_recovered() {
        let w = rotation_window(10);
        let k = estimate_koopman(&w, &FitOptions::default()).unwrap();
        let r = rotation(0.1);
        let diff = &k.operator - DMatrix::from_column_slice(2, 2, r.as_slice());
        assert!(diff.norm() <= 1e-10, "{}", diff.norm());
        assert_eq!(k.rank, 2);
    }

    #[test]
    fn zero_window_gives_zero_operator() {
        let w = window_of(&vec![vec![0.0, 0.0]; 4], 1.0);
        let k = estimate_koopman(&w, &FitOptions::default()).unwrap();
        assert_eq!(k.rank, 0);
        assert_eq!(k.operator, DMatrix::zeros(2, 2));
        assert_eq!(
            estimate_koopman(&w, &FitOptions::default().strict()),
            Err(KmdError::DegenerateWindow)
        );
    }

    #[test]
    fn rejects_bad_rcond_and_short_windows() {
        let w = window_of(&vec![vec![1.0, 2.0]; 4], 1.0);
        assert!(matches!(
            estimate_koopman(&w, &FitOptions::new(1.0)),
            Err(KmdError::InvalidParameter(_))
        ));
        let short = window_of(&vec![vec![1.0, 2.0]; 2], 1.0);
        assert!(matches!(
            estimate_koopman(&short, &FitOptions::default()),
            Err(KmdError::WindowTooShort { len: 2, min: 3 })
        ));
    }

    fn estimate_from(op: DMatrix<f64>) -> KoopmanEstimate {
        KoopmanEstimate {
            rank: op.nrows(),
            operator: op,
            rcond_cutoff: 0.0,
            dt: 0.5,
        }
    }

    #[test]
    fn identity_prediction_repeats_anchor() {
        let k = estimate_from(DMatrix::identity(2, 2));
        let out = predict(&k, &MeasurementFrame::new(1.0, vec![3.0, -1.0]), 4).unwrap();
        assert_eq!(out.len(), 4);
        for (i, f) in out.iter().enumerate() {
            assert_eq!(f.values, vec![3.0, -1.0]);
            assert_eq!(f.t, 1.0 + (i + 1) as f64 * 0.5);
        }
    }

    #[test]
    fn diagonal_prediction_halves() {
        let k = estimate_from(DMatrix::from_diagonal_element(2, 2, 0.5));
        let out = predict(&k, &MeasurementFrame::new(0.0, vec![1.0, 1.0]), 2).unwrap();
        assert_eq!(out[0].values, vec![0.5, 0.5]);
        assert_eq!(out[1].values, vec![0.25, 0.25]);
    }

    #[test]
    fn rotation_prediction_tracks_trajectory() {
        let w = rotation_window(10);
        let k = estimate_koopman(&w, &FitOptions::default()).unwrap();
        let out = predict(&k, w.last(), 10).unwrap();
        let r = rotation(0.1);
        let mut x = nalgebra::Vector2::new(w.last().values[0], w.last().values[1]);
        for f in &out {
            x = r * x;
            assert!((f.values[0] - x[0]).abs() <= 1e-9);
            assert!((f.values[1] - x[1]).abs() <= 1e-9);
        }
    }

    #[test]
    fn prediction_rejects_bad_inputs() {
        let k = estimate_from(DMatrix::identity(2, 2));
        assert!(matches!(
            predict(&k, &MeasurementFrame::new(0.0, vec![1.0; 3]), 1),
            Err(KmdError::DimensionMismatch { expected: 2, found: 3 })
        ));
        assert!(predict(&k, &MeasurementFrame::new(0.0, vec![1.0; 2]), 0).is_err());
    }
}
