use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::eig::eigenpairs;
use super::svd::thin_svd;
use super::{FitOptions, KmdError};
use crate::frame::StreamWindow;

/// Empirical Koopman eigenvalues and modes of one window.
///
/// `modes` is `p x n_modes`; column `j` is the mode paired with
/// `eigenvalues[j]`, already scaled by its amplitude so that
/// `g_k ~ sum_j eigenvalues[j]^k * modes[:, j]` with `k = 0` at the first frame.
/// Columns beyond `rank` are zero padding with eigenvalue zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub eigenvalues: Vec<Complex64>,
    pub modes: DMatrix<Complex64>,
    /// Number of genuine (non-padding) modes.
    pub rank: usize,
    /// Largest reconstruction error over the window, relative to the largest
    /// frame norm in the window.
    pub residual: f64,
}

impl ModeSet {
    /// Zero-padded mode set with `n_modes` empty columns.
    pub fn zeros(p: usize, n_modes: usize) -> Self {
        Self {
            eigenvalues: vec![Complex64::new(0.0, 0.0); n_modes],
            modes: DMatrix::zeros(p, n_modes),
            rank: 0,
            residual: 0.0,
        }
    }

    pub fn n_sensors(&self) -> usize {
        self.modes.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.ncols()
    }

    /// Sum of `lambda_j^k v_j` over all modes.
    pub fn reconstruct(&self, k: usize) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.n_sensors());
        for (j, lambda) in self.eigenvalues.iter().enumerate() {
            let weight = lambda.powu(k as u32);
            out.axpy(weight, &self.modes.column(j), Complex64::new(1.0, 0.0));
        }
        out
    }

    /// Growth rate `|lambda|` and frequency `arg(lambda) / (2 pi dt)` in Hz.
    pub fn growth_and_frequency(&self, dt: f64) -> Vec<(f64, f64)> {
        self.eigenvalues
            .iter()
            .map(|l| (l.norm(), l.arg() / (2.0 * std::f64::consts::PI * dt)))
            .collect()
    }
}

/// Koopman mode decomposition of a window of `n_modes + 1` frames.
///
/// The local one-step operator of the window is never formed explicitly: with
/// the thin SVD `X = U S V^T` of the past snapshots, it equals
/// `(Y V S^-1) U^T`, so its nonzero spectrum is that of the small matrix
/// `U^T Y V S^-1` and each eigenvector `z` lifts to `Y V S^-1 z`. Amplitudes
/// are the least-squares fit of these modes to the first frame.
pub fn decompose_modes(window: &StreamWindow, opts: &FitOptions) -> Result<ModeSet, KmdError> {
    opts.validate()?;
    if window.len() < 3 {
        return Err(KmdError::WindowTooShort {
            len: window.len(),
            min: 3,
        });
    }
    let p = window.dim();
    let n_modes = window.len() - 1;
    if window.is_all_zero() {
        if opts.strict {
            return Err(KmdError::DegenerateWindow);
        }
        return Ok(ModeSet::zeros(p, n_modes));
    }

    let data = window.to_matrix();
    let past = data.columns(0, n_modes).into_owned();
    let future = data.columns(1, n_modes).into_owned();

    let Some(svd) = thin_svd(&past) else {
        return Err(KmdError::NonFinite);
    };
    let (u, v) = (svd.u, svd.v);
    let sigma = &svd.sigma;
    let sigma_max = sigma.iter().fold(0.0_f64, |a, &s| a.max(s));
    // Same truncation as the pseudo-inverse of K2, whose singular values are
    // sigma^2 / n.
    let kept: Vec<usize> = (0..sigma.len())
        .filter(|&i| sigma[i] * sigma[i] > opts.rcond * sigma_max * sigma_max)
        .collect();
    let r = kept.len();
    if r == 0 {
        return Ok(ModeSet::zeros(p, n_modes));
    }

    let u_r = DMatrix::from_fn(p, r, |i, j| u[(i, kept[j])]);
    let v_r = DMatrix::from_fn(n_modes, r, |i, j| v[(i, kept[j])]);
    let inv_sigma = DMatrix::from_diagonal(&DVector::from_fn(r, |j, _| 1.0 / sigma[kept[j]]));
    let lifted = &future * v_r * inv_sigma;
    let reduced = u_r.transpose() * &lifted;

    let pairs = eigenpairs(&reduced);
    let spectral_scale = pairs.iter().fold(0.0_f64, |a, e| a.max(e.value.norm()));
    let lifted_c = lifted.map(|x| Complex64::new(x, 0.0));
    let u_c = u_r.map(|x| Complex64::new(x, 0.0));

    let mut basis = DMatrix::<Complex64>::zeros(p, pairs.len());
    for (j, pair) in pairs.iter().enumerate() {
        let mut w = if pair.value.norm() > 1e-12 * spectral_scale {
            &lifted_c * &pair.vector
        } else {
            &u_c * &pair.vector
        };
        let norm = w.norm();
        if norm > 0.0 {
            w /= Complex64::new(norm, 0.0);
        }
        basis.set_column(j, &w);
    }

    let first = data.column(0).map(|x| Complex64::new(x, 0.0));
    let mut amplitudes = fit_amplitudes(&basis, &first);
    for j in 1..pairs.len() {
        if pairs[j].is_conjugate_of_previous {
            amplitudes[j] = amplitudes[j - 1].conj();
        }
    }

    let mut order: Vec<(Complex64, DVector<Complex64>, f64)> = pairs
        .iter()
        .enumerate()
        .map(|(j, pair)| {
            let mode = basis.column(j) * amplitudes[j];
            let energy = mode.norm();
            (pair.value, mode, energy)
        })
        .collect();
    order.sort_by(|a, b| compare_modes(a.0, a.2, b.0, b.2));

    let mut out = ModeSet::zeros(p, n_modes);
    for (j, (lambda, mode, _)) in order.into_iter().take(n_modes).enumerate() {
        out.eigenvalues[j] = lambda;
        out.modes.set_column(j, &mode);
    }
    out.rank = r.min(n_modes);
    out.residual = residual(&out, &data);
    Ok(out)
}

/// Descending mode energy, then descending |lambda|, then descending phase.
fn compare_modes(la: Complex64, ea: f64, lb: Complex64, eb: f64) -> Ordering {
    eb.total_cmp(&ea)
        .then_with(|| lb.norm().total_cmp(&la.norm()))
        .then_with(|| lb.arg().total_cmp(&la.arg()))
}

fn fit_amplitudes(basis: &DMatrix<Complex64>, target: &DVector<Complex64>) -> Vec<Complex64> {
    let zero = vec![Complex64::new(0.0, 0.0); basis.ncols()];
    let Some(svd) = thin_svd(basis) else {
        return zero;
    };
    let sigma_max = svd.sigma.iter().fold(0.0_f64, |a, &s| a.max(s));
    let eps = sigma_max * basis.nrows().max(basis.ncols()) as f64 * f64::EPSILON;
    let mut coeffs = svd.u.adjoint() * target;
    for (c, &s) in coeffs.iter_mut().zip(svd.sigma.iter()) {
        *c = if s > eps { *c / s } else { Complex64::new(0.0, 0.0) };
    }
    let b = svd.v * coeffs;
    if b.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        b.iter().copied().collect()
    } else {
        zero
    }
}

fn residual(modes: &ModeSet, data: &DMatrix<f64>) -> f64 {
    let scale = data
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for (k, col) in data.column_iter().enumerate() {
        let recon = modes.reconstruct(k);
        let err = col
            .iter()
            .zip(recon.iter())
            .map(|(&g, z)| (Complex64::new(g, 0.0) - z).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(err / scale);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::MeasurementFrame;

    fn window(points: Vec<Vec<f64>>) -> StreamWindow {
        StreamWindow::new(
            points
                .into_iter()
                .enumerate()
                .map(|(i, v)| MeasurementFrame::new(i as f64 * 0.1, v))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_geometric_mode() {
        let w = window((0..6).map(|k| {
            let s = 0.9_f64.powi(k);
            vec![s, 2.0 * s]
        }).collect());
        let m = decompose_modes(&w, &FitOptions::default()).unwrap();
        assert_eq!(m.n_modes(), 5);
        assert_eq!(m.rank, 1);
        assert!((m.eigenvalues[0] - Complex64::new(0.9, 0.0)).norm() <= 1e-10);
        assert!((m.modes[(0, 0)] - Complex64::new(1.0, 0.0)).norm() <= 1e-10);
        assert!((m.modes[(1, 0)] - Complex64::new(2.0, 0.0)).norm() <= 1e-10);
        let sum = m.reconstruct(0);
        assert!((sum[0].re - 1.0).abs() <= 1e-10 && (sum[1].re - 2.0).abs() <= 1e-10);
        for j in 1..5 {
            assert_eq!(m.modes.column(j).norm(), 0.0);
        }
    }

    #[test]
    fn rotating_signal_gives_conjugate_pair() {
        // Re[e^{i 0.2 k} (1, i, -1)]
        let w = window((0..12).map(|k| {
            let a = 0.2 * k as f64;
            vec![a.cos(), -a.sin(), -a.cos()]
        }).collect());
        let m = decompose_modes(&w, &FitOptions::default()).unwrap();
        assert_eq!(m.rank, 2);
        let phases: Vec<f64> = m.eigenvalues[..2].iter().map(|l| l.arg()).collect();
        assert!((phases[0] - 0.2).abs() <= 1e-8, "{phases:?}");
        assert!((phases[1] + 0.2).abs() <= 1e-8, "{phases:?}");
        let a = m.modes.column(0);
        let b = m.modes.column(1);
        assert!((a.map(|z| z.conj()) - b).norm() <= 1e-9);
        assert!(m.residual < 1e-10);
    }

    #[test]
    fn constant_window_has_unit_eigenvalue() {
        let c = vec![0.3, -1.2, 2.0];
        let w = window(vec![c.clone(); 5]);
        let m = decompose_modes(&w, &FitOptions::default()).unwrap();
        assert_eq!(m.rank, 1);
        assert!((m.eigenvalues[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        for i in 0..3 {
            assert!((m.modes[(i, 0)] - Complex64::new(c[i], 0.0)).norm() < 1e-12);
        }
        assert!(m.residual < 1e-12);
    }

    #[test]
    fn zero_window() {
        let w = window(vec![vec![0.0; 3]; 4]);
        let m = decompose_modes(&w, &FitOptions::default()).unwrap();
        assert_eq!(m, ModeSet::zeros(3, 3));
        assert_eq!(
            decompose_modes(&w, &FitOptions::default().strict()),
            Err(KmdError::DegenerateWindow)
        );
    }

    #[test]
    fn padding_keeps_width_when_p_is_small() {
        let w = window((0..9).map(|k| vec![(0.3 * k as f64).sin(), 1.0]).collect());
        let m = decompose_modes(&w, &FitOptions::default()).unwrap();
        assert_eq!(m.n_modes(), 8);
        assert!(m.rank <= 2);
    }
}
