//! Scenario files, artifact formats and the end-to-end pipeline.

mod artifacts;
mod pipeline;
mod plot;
mod scenario;

pub use artifacts::{
    read_labels_csv, read_reports_jsonl, read_stream_csv, write_atomic, write_labels_csv, write_reports_jsonl,
    write_stream_csv, ArtifactHeader, SCHEMA_VERSION,
};
pub use pipeline::{
    compute_metrics, run_attack_stage, run_detect_stage, run_pipeline, run_simulate_stage, Metrics, RunArtifacts,
    SensorMetrics, ARTIFACT_FILES,
};
pub use plot::{emit_plot_data, PlotKind};
pub use scenario::{
    bundled_scenario, load_scenario, parse_scenario, resolve_scenario, AttackEntry, ControllerSection,
    DetectorSection, NetworkSection, Overrides, ScenarioConfig, SimulationSection, BUNDLED_SCENARIOS,
    SCENARIO_DIR_ENV,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::attacks::AttackError;
use crate::detector::DetectError;
use crate::gridsim::SimError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("{path}:{line}: malformed artifact: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("attack injection failed: {0}")]
    Attack(#[from] AttackError),
    #[error("detection failed: {0}")]
    Detect(#[from] DetectError),
}

impl IoError {
    /// Configuration problems are the caller's to fix; everything else is a
    /// runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, IoError::Parse { .. } | IoError::Validation { .. })
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        IoError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::File {
            path: path.into(),
            source,
        }
    }
}
