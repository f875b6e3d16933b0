use std::path::Path;

use serde::{Deserialize, Serialize};

use super::artifacts::{write_atomic, write_labels_csv, write_reports_jsonl, write_stream_csv, ArtifactHeader};
use super::{IoError, ScenarioConfig};
use crate::attacks::{apply_attacks, AttackInjector, AttackedStream};
use crate::detector::{detect_stream, DetectionReport};
use crate::frame::MeasurementFrame;
use crate::gridsim::{simulate, IdentityHook};

/// Files written by [`run_pipeline`], in writing order.
pub const ARTIFACT_FILES: [&str; 5] = [
    "true_stream.csv",
    "received_stream.csv",
    "labels.csv",
    "reports.jsonl",
    "metrics.json",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorMetrics {
    pub sensor: usize,
    pub attacked: bool,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Detection quality of one run against the injector's ground truth.
///
/// Precision and recall are counted over report steps from the first attack
/// verdict to the last attacked sample, comparing `flagged` with the sensors
/// attacked at the newest frame of the window. A clean step is one whose whole
/// window holds no attacked sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub config_sha256: String,
    pub samples: usize,
    pub reports: usize,
    pub attack_steps: usize,
    pub first_attacked_sample: Option<usize>,
    pub first_verdict_sample: Option<usize>,
    pub detection_latency_samples: Option<usize>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub clean_steps: usize,
    pub false_positive_steps: usize,
    pub false_positive_rate: Option<f64>,
    pub per_sensor: Vec<SensorMetrics>,
    pub warnings: Vec<String>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `reports[j]` must be the report emitted at sample `j + n`.
pub fn compute_metrics(labels: &[Vec<usize>], reports: &[DetectionReport], n: usize, p: usize) -> Metrics {
    let first_attacked = labels.iter().position(|l| !l.is_empty());
    let last_attacked = labels.iter().rposition(|l| !l.is_empty());
    let sample_of = |j: usize| j + n;

    let first_verdict = reports
        .iter()
        .enumerate()
        .find(|(j, r)| r.attack && first_attacked.is_some_and(|a| sample_of(*j) >= a))
        .map(|(j, _)| sample_of(j));

    let mut per_sensor: Vec<SensorMetrics> = (0..p)
        .map(|s| SensorMetrics {
            sensor: s,
            attacked: labels.iter().any(|l| l.contains(&s)),
            true_positive: 0,
            false_positive: 0,
            false_negative: 0,
            precision: None,
            recall: None,
        })
        .collect();
    if let (Some(start), Some(end)) = (first_verdict, last_attacked) {
        for (j, r) in reports.iter().enumerate() {
            let k = sample_of(j);
            if k < start || k > end || k >= labels.len() {
                continue;
            }
            for (s, m) in per_sensor.iter_mut().enumerate() {
                match (r.flagged.contains(&s), labels[k].contains(&s)) {
                    (true, true) => m.true_positive += 1,
                    (true, false) => m.false_positive += 1,
                    (false, true) => m.false_negative += 1,
                    (false, false) => {}
                }
            }
        }
    }
    for m in &mut per_sensor {
        m.precision = ratio(m.true_positive, m.true_positive + m.false_positive);
        m.recall = ratio(m.true_positive, m.true_positive + m.false_negative);
    }
    let tp: usize = per_sensor.iter().map(|m| m.true_positive).sum();
    let fp: usize = per_sensor.iter().map(|m| m.false_positive).sum();
    let fn_: usize = per_sensor.iter().map(|m| m.false_negative).sum();

    let mut clean_steps = 0;
    let mut false_positive_steps = 0;
    for (j, r) in reports.iter().enumerate() {
        let k = sample_of(j);
        let lo = k.saturating_sub(n);
        let hi = (k + 1).min(labels.len());
        if labels[lo.min(hi)..hi].iter().all(|l| l.is_empty()) {
            clean_steps += 1;
            false_positive_steps += usize::from(r.attack);
        }
    }

    Metrics {
        config_sha256: String::new(),
        samples: labels.len(),
        reports: reports.len(),
        attack_steps: reports.iter().filter(|r| r.attack).count(),
        first_attacked_sample: first_attacked,
        first_verdict_sample: first_verdict,
        detection_latency_samples: first_verdict.zip(first_attacked).map(|(v, a)| v - a),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        clean_steps,
        false_positive_steps,
        false_positive_rate: ratio(false_positive_steps, clean_steps),
        per_sensor,
        warnings: Vec::new(),
    }
}

/// Everything one run produced, as written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub true_stream: Vec<MeasurementFrame>,
    pub received_stream: Vec<MeasurementFrame>,
    pub labels: Vec<Vec<usize>>,
    pub reports: Vec<DetectionReport>,
    pub metrics: Metrics,
}

/// Attack-free simulation of the scenario.
pub fn run_simulate_stage(cfg: &ScenarioConfig) -> Result<Vec<MeasurementFrame>, IoError> {
    let sim = cfg.grid_sim()?;
    let s = &cfg.simulation;
    Ok(simulate(&sim, &mut IdentityHook, s.t_end, s.dt, s.noise_std, s.seed)?.true_stream)
}

/// Applies the scenario's attacks to a recorded stream, open loop.
pub fn run_attack_stage(cfg: &ScenarioConfig, true_stream: &[MeasurementFrame]) -> Result<AttackedStream, IoError> {
    if let Some(f) = true_stream.first() {
        if f.dim() != cfg.n_channels() {
            return Err(IoError::validation(
                "input",
                format!("stream has {} sensors, scenario expects {}", f.dim(), cfg.n_channels()),
            ));
        }
    }
    Ok(apply_attacks(true_stream, &cfg.attack_specs())?)
}

pub fn run_detect_stage(cfg: &ScenarioConfig, received: &[MeasurementFrame]) -> Result<Vec<DetectionReport>, IoError> {
    let reports = detect_stream(received.iter().cloned(), cfg.detector.window, cfg.detector.seed)?
        .collect::<Result<Vec<_>, _>>()?;
    Ok(reports)
}

/// Simulates with the attacks inside the control loop, runs the detector and
/// writes [`ARTIFACT_FILES`] into `out_dir`.
pub fn run_pipeline(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunArtifacts, IoError> {
    let sim = cfg.grid_sim()?;
    let s = &cfg.simulation;
    let mut injector = AttackInjector::new(cfg.attack_specs(), cfg.n_channels(), s.dt)?;
    let out = simulate(&sim, &mut injector, s.t_end, s.dt, s.noise_std, s.seed)?;
    let reports = run_detect_stage(cfg, &out.received_stream)?;
    let labels = injector.labels().to_vec();
    let mut metrics = compute_metrics(&labels, &reports, cfg.detector.window.n, cfg.n_channels());
    let hash = cfg.config_hash();
    metrics.config_sha256 = hash.clone();
    metrics.warnings = injector.warnings().to_vec();

    let times: Vec<f64> = out.true_stream.iter().map(|f| f.t).collect();
    write_stream_csv(&out_dir.join(ARTIFACT_FILES[0]), &ArtifactHeader::new("true_stream", &hash), &out.true_stream)?;
    write_stream_csv(
        &out_dir.join(ARTIFACT_FILES[1]),
        &ArtifactHeader::new("received_stream", &hash),
        &out.received_stream,
    )?;
    write_labels_csv(
        &out_dir.join(ARTIFACT_FILES[2]),
        &ArtifactHeader::new("labels", &hash),
        &times,
        &labels,
        cfg.n_channels(),
    )?;
    write_reports_jsonl(&out_dir.join(ARTIFACT_FILES[3]), &ArtifactHeader::new("reports", &hash), &reports)?;
    let mut json = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    json.push('\n');
    write_atomic(&out_dir.join(ARTIFACT_FILES[4]), json.as_bytes())?;

    Ok(RunArtifacts {
        true_stream: out.true_stream,
        received_stream: out.received_stream,
        labels,
        reports,
        metrics,
    })
}
