//! False-data injection and denial-of-service transforms of a measurement
//! stream.
//!
//! Additive kinds inject `a_k` so that the received frame is `y_k + a_k`;
//! DoS kinds replace targeted readings with stale true values. Every kind
//! touches only its target channels inside `[t_start, t_end]`.

mod inject;
mod spec;

pub use inject::{apply_attack, apply_attacks, attack_signal, AttackInjector, AttackedStream};
pub use spec::{AttackKind, AttackSpec, ATTACK_KINDS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("invalid attack spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}
