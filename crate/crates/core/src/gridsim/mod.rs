//! Closed-loop swing-equation network simulator.
//!
//! Each bus `i` follows
//!
//! ```text
//! d(delta_i)/dt = omega_i
//! M_i d(omega_i)/dt = P_i(t) - D_i omega_i - sum_j B_ij sin(delta_i - delta_j) + u_i
//! ```
//!
//! with `u = -G * omega_received`, i.e. proportional feedback on the frequency
//! channels of the measurement the controller actually receives. Measurements
//! are deviations from the nominal operating point, so the equilibrium maps to
//! the zero frame.

mod network;
mod sim;

pub use network::{ControllerConfig, EventSpec, Gain, NetworkModel};
pub use sim::{simulate, GridSim, IdentityHook, MeasurementHook, SimOutput, SimState};

use thiserror::Error;

/// Any state entry beyond this magnitude aborts the simulation.
pub const BLOWUP_LIMIT: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid network model: {0}")]
    InvalidModel(String),
    #[error("no operating point found: {0}")]
    NoEquilibrium(String),
    #[error("numerical blow-up at t = {t} s")]
    NumericalBlowup { t: f64 },
    #[error("invalid simulation parameter: {0}")]
    InvalidParameter(String),
}
