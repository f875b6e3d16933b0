use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::network::{ControllerConfig, EventSpec, NetworkModel};
use super::{SimError, BLOWUP_LIMIT};
use crate::frame::MeasurementFrame;
use crate::rng::{stream_rng, streams};

/// Deviation of the network from its nominal operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// Angle deviations (rad).
    pub delta: Vec<f64>,
    /// Frequency deviations (rad/s).
    pub omega: Vec<f64>,
}

impl SimState {
    pub fn equilibrium(n: usize) -> Self {
        Self {
            delta: vec![0.0; n],
            omega: vec![0.0; n],
        }
    }

    fn max_abs(&self) -> f64 {
        self.delta
            .iter()
            .chain(&self.omega)
            .fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    fn is_finite(&self) -> bool {
        self.delta.iter().chain(&self.omega).all(|v| v.is_finite())
    }
}

/// Transforms each true measurement into the frame the controller receives.
pub trait MeasurementHook {
    fn transform(&mut self, k: usize, frame: &MeasurementFrame) -> MeasurementFrame;
}

/// Passes measurements through untouched.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityHook;

impl MeasurementHook for IdentityHook {
    fn transform(&mut self, _k: usize, frame: &MeasurementFrame) -> MeasurementFrame {
        frame.clone()
    }
}

impl<F: FnMut(usize, &MeasurementFrame) -> MeasurementFrame> MeasurementHook for F {
    fn transform(&mut self, k: usize, frame: &MeasurementFrame) -> MeasurementFrame {
        self(k, frame)
    }
}

/// A network, its controller and scheduled events.
#[derive(Debug, Clone)]
pub struct GridSim {
    model: NetworkModel,
    nominal: Vec<f64>,
    gain: DMatrix<f64>,
    events: Vec<EventSpec>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl GridSim {
    pub fn new(model: NetworkModel, controller: &ControllerConfig, events: Vec<EventSpec>) -> Result<Self, SimError> {
        model.validate()?;
        let n = model.n_bus();
        for (i, e) in events.iter().enumerate() {
            if e.bus >= n {
                return Err(SimError::InvalidParameter(format!("event {i}: bus {} out of range", e.bus)));
            }
            if !(e.t_start >= 0.0) || !e.delta_p.is_finite() {
                return Err(SimError::InvalidParameter(format!("event {i}: bad timing or size")));
            }
        }
        let gain = if controller.enabled {
            controller.gain.to_matrix(n)?
        } else {
            DMatrix::zeros(n, n)
        };
        let nominal = model.operating_point()?;
        let neighbors = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && model.susceptance[(i, j)] != 0.0)
                    .map(|j| (j, model.susceptance[(i, j)]))
                    .collect()
            })
            .collect();
        Ok(Self {
            model,
            nominal,
            gain,
            events,
            neighbors,
        })
    }

    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    /// Absolute nominal angles.
    pub fn nominal_angles(&self) -> &[f64] {
        &self.nominal
    }

    pub fn n_bus(&self) -> usize {
        self.model.n_bus()
    }

    pub fn n_channels(&self) -> usize {
        self.model.n_channels()
    }

    /// `[delta; omega]` deviations, followed by magnitude-proxy deviations
    /// `0.05 (cos(delta_abs) - cos(delta_nominal))` when enabled.
    pub fn measure(&self, state: &SimState, t: f64) -> MeasurementFrame {
        let mut values = Vec::with_capacity(self.n_channels());
        values.extend_from_slice(&state.delta);
        values.extend_from_slice(&state.omega);
        if self.model.magnitude_proxy {
            values.extend(
                state
                    .delta
                    .iter()
                    .zip(&self.nominal)
                    .map(|(d, d0)| 0.05 * ((d0 + d).cos() - d0.cos())),
            );
        }
        MeasurementFrame::new(t, values)
    }

    /// Injection vector with every event that has started by `t`.
    pub fn injection_at(&self, t: f64) -> Vec<f64> {
        let mut p = self.model.injection.clone();
        for e in &self.events {
            if t + 1e-9 >= e.t_start {
                p[e.bus] += e.delta_p;
            }
        }
        p
    }

    /// Control input from the frequency channels of the received frame.
    pub fn control(&self, received: &MeasurementFrame) -> Vec<f64> {
        let n = self.n_bus();
        let omega = DVector::from_column_slice(&received.values[n..2 * n]);
        (-(&self.gain * omega)).iter().copied().collect()
    }

    fn derivative(&self, delta: &[f64], omega: &[f64], p: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_bus();
        let mut dd = vec![0.0; n];
        let mut dw = vec![0.0; n];
        for i in 0..n {
            if self.model.pinned[i] {
                continue;
            }
            let theta = self.nominal[i] + delta[i];
            let flow: f64 = self.neighbors[i]
                .iter()
                .map(|&(j, b)| b * (theta - self.nominal[j] - delta[j]).sin())
                .sum();
            dd[i] = omega[i];
            dw[i] = (p[i] - self.model.damping[i] * omega[i] - flow + u[i]) / self.model.inertia[i];
        }
        (dd, dw)
    }

    /// One fixed RK4 step of length `dt` from time `t`. Injection and control
    /// are held over the step.
    pub fn step(&self, state: &SimState, received: &MeasurementFrame, t: f64, dt: f64) -> Result<SimState, SimError> {
        if received.dim() != self.n_channels() {
            return Err(SimError::InvalidParameter(format!(
                "received frame has {} channels, expected {}",
                received.dim(),
                self.n_channels()
            )));
        }
        let p = self.injection_at(t);
        let u = self.control(received);
        let axpy = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };

        let (k1d, k1w) = self.derivative(&state.delta, &state.omega, &p, &u);
        let (k2d, k2w) = self.derivative(
            &axpy(&state.delta, &k1d, 0.5 * dt),
            &axpy(&state.omega, &k1w, 0.5 * dt),
            &p,
            &u,
        );
        let (k3d, k3w) = self.derivative(
            &axpy(&state.delta, &k2d, 0.5 * dt),
            &axpy(&state.omega, &k2w, 0.5 * dt),
            &p,
            &u,
        );
        let (k4d, k4w) = self.derivative(&axpy(&state.delta, &k3d, dt), &axpy(&state.omega, &k3w, dt), &p, &u);
        let combine = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..x.len())
                .map(|i| x[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
                .collect()
        };
        let next = SimState {
            delta: combine(&state.delta, &k1d, &k2d, &k3d, &k4d),
            omega: combine(&state.omega, &k1w, &k2w, &k3w, &k4w),
        };
        if !next.is_finite() || next.max_abs() > BLOWUP_LIMIT {
            return Err(SimError::NumericalBlowup { t: t + dt });
        }
        Ok(next)
    }

    /// `1/2 sum M w^2 - sum P delta - 1/2 sum_ij B_ij cos(delta_i - delta_j)`
    /// at absolute angles, with the nominal injections.
    pub fn energy(&self, state: &SimState) -> f64 {
        let n = self.n_bus();
        let abs: Vec<f64> = (0..n).map(|i| self.nominal[i] + state.delta[i]).collect();
        let kinetic: f64 = (0..n).map(|i| 0.5 * self.model.inertia[i] * state.omega[i].powi(2)).sum();
        let injected: f64 = (0..n).map(|i| self.model.injection[i] * abs[i]).sum();
        let mut potential = 0.0;
        for i in 0..n {
            for &(j, b) in &self.neighbors[i] {
                potential += 0.5 * b * (abs[i] - abs[j]).cos();
            }
        }
        kinetic - injected - potential
    }
}

/// True and received measurement streams of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub true_stream: Vec<MeasurementFrame>,
    pub received_stream: Vec<MeasurementFrame>,
}

/// Number of samples on `[0, t_end]` at interval `dt`.
pub fn sample_count(t_end: f64, dt: f64) -> usize {
    (t_end / dt + 1e-9).floor() as usize + 1
}

/// Runs the closed loop `measure -> hook -> control -> step` from equilibrium.
///
/// Process noise, when `noise_std > 0`, is added to every free bus frequency
/// after each step.
pub fn simulate(
    sim: &GridSim,
    hook: &mut dyn MeasurementHook,
    t_end: f64,
    dt: f64,
    noise_std: f64,
    seed: u64,
) -> Result<SimOutput, SimError> {
    if !(t_end > 0.0) || !(dt > 0.0) || !t_end.is_finite() || !dt.is_finite() {
        return Err(SimError::InvalidParameter("duration and step must be positive".into()));
    }
    if !(noise_std >= 0.0) {
        return Err(SimError::InvalidParameter("noise_std must be non-negative".into()));
    }
    let samples = sample_count(t_end, dt);
    let mut rng = stream_rng(seed, streams::PROCESS_NOISE);
    let mut state = SimState::equilibrium(sim.n_bus());
    let mut out = SimOutput {
        true_stream: Vec::with_capacity(samples),
        received_stream: Vec::with_capacity(samples),
    };
    for k in 0..samples {
        let t = k as f64 * dt;
        let y = sim.measure(&state, t);
        let received = hook.transform(k, &y);
        if k + 1 < samples {
            state = sim.step(&state, &received, t, dt)?;
            if noise_std > 0.0 {
                for i in 0..sim.n_bus() {
                    if !sim.model().pinned[i] {
                        let xi: f64 = StandardNormal.sample(&mut rng);
                        state.omega[i] += noise_std * xi;
                    }
                }
            }
        }
        out.true_stream.push(y);
        out.received_stream.push(received);
    }
    Ok(out)
}
