use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SimError;

/// Static description of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    /// Symmetric line susceptances (per unit); the diagonal is ignored.
    pub susceptance: DMatrix<f64>,
    /// Per-bus inertia `M_i > 0`.
    pub inertia: Vec<f64>,
    /// Per-bus damping `D_i >= 0`.
    pub damping: Vec<f64>,
    /// Per-bus nominal net injection (per unit).
    pub injection: Vec<f64>,
    /// Buses held at their nominal angle with zero frequency (infinite buses).
    pub pinned: Vec<bool>,
    /// Emit a static voltage-magnitude proxy `0.05 cos(delta_i)` per bus.
    pub magnitude_proxy: bool,
}

impl NetworkModel {
    pub fn new(
        susceptance: DMatrix<f64>,
        inertia: Vec<f64>,
        damping: Vec<f64>,
        injection: Vec<f64>,
    ) -> Result<Self, SimError> {
        let n = inertia.len();
        let model = Self {
            susceptance,
            inertia,
            damping,
            injection,
            pinned: vec![false; n],
            magnitude_proxy: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_pinned(mut self, pinned: Vec<bool>) -> Result<Self, SimError> {
        self.pinned = pinned;
        self.validate()?;
        Ok(self)
    }

    pub fn with_magnitude_proxy(mut self, on: bool) -> Self {
        self.magnitude_proxy = on;
        self
    }

    /// Ring of `n` buses with extra chords `(i, i + n/2)` on even `i`.
    pub fn ring_with_chords(
        n: usize,
        ring_b: f64,
        chord_b: f64,
        inertia: Vec<f64>,
        damping: Vec<f64>,
        injection: Vec<f64>,
    ) -> Result<Self, SimError> {
        let mut b = DMatrix::zeros(n, n);
        for i in 0..n {
            let j = (i + 1) % n;
            b[(i, j)] = ring_b;
            b[(j, i)] = ring_b;
        }
        for i in (0..n / 2).step_by(2) {
            let j = i + n / 2;
            if j != i && b[(i, j)] == 0.0 {
                b[(i, j)] = chord_b;
                b[(j, i)] = chord_b;
            }
        }
        Self::new(b, inertia, damping, injection)
    }

    pub fn n_bus(&self) -> usize {
        self.inertia.len()
    }

    /// Channels per measurement frame: angles and frequencies, plus
    /// magnitudes when the proxy is on.
    pub fn n_channels(&self) -> usize {
        if self.magnitude_proxy {
            3 * self.n_bus()
        } else {
            2 * self.n_bus()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.n_bus();
        if n < 1 {
            return Err(SimError::InvalidModel("network needs at least one bus".into()));
        }
        if self.susceptance.shape() != (n, n) {
            return Err(SimError::InvalidModel(format!(
                "susceptance is {:?}, expected {n}x{n}",
                self.susceptance.shape()
            )));
        }
        for (name, len) in [
            ("damping", self.damping.len()),
            ("injection", self.injection.len()),
            ("pinned", self.pinned.len()),
        ] {
            if len != n {
                return Err(SimError::InvalidModel(format!("{name} has {len} entries, expected {n}")));
            }
        }
        for i in 0..n {
            if !(self.inertia[i] > 0.0) || !self.inertia[i].is_finite() {
                return Err(SimError::InvalidModel(format!("inertia[{i}] must be positive")));
            }
            if !(self.damping[i] >= 0.0) || !self.damping[i].is_finite() {
                return Err(SimError::InvalidModel(format!("damping[{i}] must be non-negative")));
            }
            if !self.injection[i].is_finite() {
                return Err(SimError::InvalidModel(format!("injection[{i}] is not finite")));
            }
            for j in 0..n {
                let (a, b) = (self.susceptance[(i, j)], self.susceptance[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(SimError::InvalidModel(format!(
                        "susceptance must be finite and symmetric (entry {i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Net electrical power flowing out of each bus at absolute angles `delta`.
    pub fn line_flows(&self, delta: &[f64]) -> Vec<f64> {
        let n = self.n_bus();
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| self.susceptance[(i, j)] * (delta[i] - delta[j]).sin())
                    .sum()
            })
            .collect()
    }

    /// Nominal absolute angles: zero frequency and `P_i = sum_j B_ij sin(.)`
    /// on every free bus. Pinned buses sit at angle 0; with none pinned,
    /// bus 0 is the angle reference and injections must balance.
    pub fn operating_point(&self) -> Result<Vec<f64>, SimError> {
        let n = self.n_bus();
        let any_pinned = self.pinned.iter().any(|&p| p);
        if !any_pinned {
            let total: f64 = self.injection.iter().sum();
            if total.abs() > 1e-9 {
                return Err(SimError::NoEquilibrium(format!(
                    "injections sum to {total}, must balance without a pinned bus"
                )));
            }
        }
        let free: Vec<usize> = (0..n)
            .filter(|&i| !self.pinned[i] && (any_pinned || i != 0))
            .collect();
        let mut delta = vec![0.0; n];
        if free.is_empty() {
            return Ok(delta);
        }
        for _ in 0..100 {
            let flows = self.line_flows(&delta);
            let mismatch = DVector::from_iterator(free.len(), free.iter().map(|&i| self.injection[i] - flows[i]));
            if mismatch.amax() < 1e-13 {
                return Ok(delta);
            }
            let jac = DMatrix::from_fn(free.len(), free.len(), |a, b| {
                let (i, j) = (free[a], free[b]);
                if i == j {
                    (0..n)
                        .filter(|&m| m != i)
                        .map(|m| self.susceptance[(i, m)] * (delta[i] - delta[m]).cos())
                        .sum()
                } else {
                    -self.susceptance[(i, j)] * (delta[i] - delta[j]).cos()
                }
            });
            let step = jac
                .lu()
                .solve(&mismatch)
                .ok_or_else(|| SimError::NoEquilibrium("singular power-flow Jacobian".into()))?;
            for (a, &i) in free.iter().enumerate() {
                delta[i] += step[a];
            }
        }
        Err(SimError::NoEquilibrium("power flow did not converge".into()))
    }
}

/// Feedback gain applied to received frequency deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gain {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl Gain {
    pub fn to_matrix(&self, n: usize) -> Result<DMatrix<f64>, SimError> {
        let m = match self {
            Gain::Scalar(g) => DMatrix::from_diagonal_element(n, n, *g),
            Gain::Diagonal(d) => {
                if d.len() != n {
                    return Err(SimError::InvalidModel(format!("gain has {} entries, expected {n}", d.len())));
                }
                DMatrix::from_diagonal(&DVector::from_column_slice(d))
            }
            Gain::Matrix(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(SimError::InvalidModel(format!("gain matrix must be {n}x{n}")));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
        };
        if m.iter().any(|v| !v.is_finite()) {
            return Err(SimError::InvalidModel("gain must be finite".into()));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub gain: Gain,
    pub enabled: bool,
}

impl ControllerConfig {
    pub fn open_loop() -> Self {
        Self {
            gain: Gain::Scalar(0.0),
            enabled: false,
        }
    }

    pub fn proportional(gain: f64) -> Self {
        Self {
            gain: Gain::Scalar(gain),
            enabled: true,
        }
    }
}

/// A step change `delta_p` in the injection at `bus`, from `t_start` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub bus: usize,
    pub t_start: f64,
    pub delta_p: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_topology_is_symmetric() {
        let m = NetworkModel::ring_with_chords(10, 2.0, 1.0, vec![0.1; 10], vec![0.0; 10], vec![0.0; 10]).unwrap();
        assert_eq!(m.susceptance[(0, 1)], 2.0);
        assert_eq!(m.susceptance[(9, 0)], 2.0);
        assert_eq!(m.susceptance[(0, 5)], 1.0);
        assert_eq!(m.susceptance[(5, 0)], 1.0);
        assert_eq!(m.susceptance[(1, 6)], 0.0);
    }

    #[test]
    fn operating_point_balances_flows() {
        let inj = vec![0.5, -0.2, 0.3, -0.4, 0.1, -0.3];
        let m = NetworkModel::ring_with_chords(6, 3.0, 1.0, vec![0.1; 6], vec![0.05; 6], inj.clone()).unwrap();
        let delta = m.operating_point().unwrap();
        assert_eq!(delta[0], 0.0);
        for (f, p) in m.line_flows(&delta).iter().zip(&inj) {
            assert!((f - p).abs() < 1e-12);
        }
    }

    #[test]
    fn unbalanced_without_pin_is_rejected() {
        let m = NetworkModel::ring_with_chords(4, 1.0, 1.0, vec![0.1; 4], vec![0.0; 4], vec![0.1; 4]).unwrap();
        assert!(matches!(m.operating_point(), Err(SimError::NoEquilibrium(_))));
        let pinned = m.with_pinned(vec![false, false, false, true]).unwrap();
        assert!(pinned.operating_point().is_ok());
    }

    #[test]
    fn validation_catches_bad_parameters() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(NetworkModel::new(b, vec![1.0; 2], vec![0.0; 2], vec![0.0; 2]).is_err());
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(NetworkModel::new(b.clone(), vec![0.0, 1.0], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(NetworkModel::new(b, vec![1.0; 2], vec![-1.0, 0.0], vec![0.0; 2]).is_err());
    }

    #[test]
    fn gain_shapes() {
        assert_eq!(Gain::Scalar(2.0).to_matrix(2).unwrap(), DMatrix::from_diagonal_element(2, 2, 2.0));
        assert!(Gain::Diagonal(vec![1.0]).to_matrix(2).is_err());
        let g = Gain::Matrix(vec![vec![1.0, 0.5], vec![0.0, 1.0]]).to_matrix(2).unwrap();
        assert_eq!(g[(0, 1)], 0.5);
    }
}
