use nalgebra::DMatrix;

use super::{DetectError, DetectionReport, WindowConfig, INTRA_FLOOR};
use crate::clustering::{affinity_from_divergences, normalize_modes, spectral_cluster, symmetric_divergence_matrix, symmetric_kl};
use crate::frame::{MeasurementFrame, StreamWindow};
use crate::kmd::{decompose_modes, estimate_koopman, predict, FitOptions, KmdError};

/// `received - predicted`, frame by frame, on the received time stamps.
pub fn compute_error_sequence(received: &StreamWindow, predicted: &[MeasurementFrame]) -> Result<StreamWindow, KmdError> {
    if predicted.len() != received.len() {
        return Err(KmdError::DimensionMismatch {
            expected: received.len(),
            found: predicted.len(),
        });
    }
    let mut frames = Vec::with_capacity(received.len());
    for (r, q) in received.frames().iter().zip(predicted) {
        if q.dim() != r.dim() {
            return Err(KmdError::DimensionMismatch {
                expected: r.dim(),
                found: q.dim(),
            });
        }
        frames.push(MeasurementFrame::new(
            r.t,
            r.values.iter().zip(&q.values).map(|(a, b)| a - b).collect(),
        ));
    }
    StreamWindow::with_dt(frames, received.dt())
}

/// Mean divergence across clusters over mean divergence within clusters.
pub fn separation_ratio(divergence: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let (mut inter, mut n_inter, mut intra, mut n_intra) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            if labels[i] == labels[j] {
                intra += divergence[(i, j)];
                n_intra += 1;
            } else {
                inter += divergence[(i, j)];
                n_inter += 1;
            }
        }
    }
    if n_inter == 0 {
        return 0.0;
    }
    let intra = if n_intra == 0 { 0.0 } else { intra / n_intra as f64 };
    (inter / n_inter as f64) / intra.max(INTRA_FLOOR)
}

/// One pass of the identification loop over exactly `n + 1` frames.
pub fn detect_step(history: &StreamWindow, cfg: &WindowConfig, seed: u64) -> Result<DetectionReport, DetectError> {
    cfg.validate()?;
    if history.len() != cfg.history_len() {
        return Err(DetectError::InsufficientHistory {
            len: history.len(),
            needed: cfg.history_len(),
        });
    }
    let p = history.dim();
    if p < cfg.k {
        return Err(crate::clustering::ClusterError::InvalidClusterCount { k: cfg.k, p }.into());
    }
    let opts = FitOptions::new(cfg.rcond);
    let split = cfg.learning_len();
    let learning = history.slice(0..split)?;
    let target = history.slice(split..history.len())?;

    let estimate = estimate_koopman(&learning, &opts)?;
    let predicted = predict(&estimate, learning.last(), cfg.n_tilde + 1)?;
    let error = compute_error_sequence(&target, &predicted)?;

    let modes = decompose_modes(&error, &opts)?;
    let spread = normalize_modes(&modes, cfg.epsilon);
    let divergence = symmetric_divergence_matrix(&spread);
    let affinity = affinity_from_divergences(&divergence);
    let assignment = spectral_cluster(&affinity, cfg.k, seed)?;

    let separation = separation_ratio(&divergence, &assignment.labels);
    let attack = separation >= cfg.tau;
    let candidates = if attack {
        attacked_cluster(&assignment.sizes(), &assignment.labels, &spread.to_rows(), &spread.mean_row())
    } else {
        Vec::new()
    };
    Ok(DetectionReport {
        t: history.last().t,
        labels: assignment.labels,
        separation,
        attack,
        flagged: candidates.clone(),
        candidates,
        modes_residual: modes.residual,
        mode_spread: spread.to_rows(),
    })
}

/// Smallest cluster; among equally small ones, the one whose rows sit
/// furthest from the all-sensor mean row.
fn attacked_cluster(sizes: &[usize], labels: &[usize], rows: &[Vec<f64>], mean: &[f64]) -> Vec<usize> {
    let min = sizes.iter().copied().filter(|&s| s > 0).min().unwrap_or(0);
    let spread = |c: usize| -> f64 {
        let members: Vec<&Vec<f64>> = rows.iter().zip(labels).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
        members.iter().map(|r| symmetric_kl(r, mean).unwrap_or(0.0)).sum::<f64>() / members.len() as f64
    };
    let mut best: Option<(usize, f64)> = None;
    for c in (0..sizes.len()).filter(|&c| sizes[c] == min) {
        let s = spread(c);
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    let Some((c, _)) = best else { return Vec::new() };
    labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i).collect()
}
