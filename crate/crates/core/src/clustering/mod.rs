//! Sensor grouping from normalized mode signatures.
//!
//! Each sensor's row of the normalized mode matrix is a probability mass
//! function over modes. Rows are compared with a symmetrized Kullback-Leibler
//! divergence, the divergences are turned into a Gaussian-kernel affinity, and
//! the affinity is split by normalized spectral clustering with k-means.

mod affinity;
mod divergence;
mod kmeans;
mod normalize;
mod spectral;

pub(crate) use affinity::affinity_from_divergences;
pub use affinity::{build_affinity, symmetric_divergence_matrix, AffinityMatrix};
pub use divergence::{kl_divergence, symmetric_kl};
pub use kmeans::{kmeans, KMeansOptions};
pub use normalize::{normalize_magnitudes, normalize_modes, NormalizedModeMatrix, DEFAULT_EPSILON};
pub use spectral::{spectral_cluster, spectral_embedding, ClusterAssignment};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("probability vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("entry {index} is not strictly positive")]
    NonPositiveEntry { index: usize },
    #[error("cluster count {k} is invalid for {p} sensors")]
    InvalidClusterCount { k: usize, p: usize },
    #[error("spectral embedding did not converge")]
    EmbeddingFailure,
    #[error("need at least {min} sensors, got {p}")]
    TooFewSensors { p: usize, min: usize },
}
