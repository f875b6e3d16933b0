use koopwatch::io::{
    emit_plot_data, parse_scenario, read_labels_csv, read_reports_jsonl, read_stream_csv, run_attack_stage,
    run_pipeline, run_simulate_stage, Metrics, PlotKind, ARTIFACT_FILES,
};

const SCENARIO: &str = r#"
name = "four_bus_freeze"

[network]
n_bus = 4
ring = { b = 3.0, chord_b = 1.0 }
inertia = [0.1, 0.12, 0.14, 0.16]
damping = 0.1
injection = [0.2, -0.1, 0.1, -0.2]
pinned = [3]

[controller]
gain = 0.3

[[events]]
kind = "load_step"
bus = 1
t_start = 1.0
delta_p = -0.05

[[attacks]]
kind = "freezing"
targets = [4, 5]
t_start = 2.5
t_end = 4.0

[simulation]
t_end = 6.0
dt = 0.05
noise_std = 1e-4
seed = 2

[detector]
n = 40
n_tilde = 8
seed = 5
"#;

#[test]
fn artifacts_parse_back_losslessly() {
    let cfg = parse_scenario(SCENARIO, "inline").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = run_pipeline(&cfg, dir.path()).unwrap();
    let hash = cfg.config_hash();

    let (h, truth) = read_stream_csv(&dir.path().join(ARTIFACT_FILES[0])).unwrap();
    assert_eq!(h.config_sha256, hash);
    assert_eq!(truth, run.true_stream);
    let (_, received) = read_stream_csv(&dir.path().join(ARTIFACT_FILES[1])).unwrap();
    assert_eq!(received, run.received_stream);
    let (_, labels) = read_labels_csv(&dir.path().join(ARTIFACT_FILES[2])).unwrap();
    assert_eq!(labels.iter().map(|(_, l)| l.clone()).collect::<Vec<_>>(), run.labels);
    let (_, reports) = read_reports_jsonl(&dir.path().join(ARTIFACT_FILES[3])).unwrap();
    assert_eq!(reports, run.reports);
    let metrics: Metrics = serde_json::from_str(&std::fs::read_to_string(dir.path().join(ARTIFACT_FILES[4])).unwrap()).unwrap();
    assert_eq!(metrics, run.metrics);
    assert!(!dir.path().read_dir().unwrap().any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));

    // 121 samples; freezing on [2.5, 4.0] labels samples 50..=80.
    assert_eq!(run.labels.iter().filter(|l| !l.is_empty()).count(), 31);
    assert_eq!(run.metrics.first_attacked_sample, Some(50));
    assert_eq!(run.reports.len(), 121 - 40);
}

#[test]
fn frozen_sensors_hold_their_onset_value() {
    let cfg = parse_scenario(SCENARIO, "inline").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = run_pipeline(&cfg, dir.path()).unwrap();
    for k in 50..=80 {
        for s in [4, 5] {
            assert_eq!(run.received_stream[k].values[s], run.true_stream[50].values[s]);
        }
    }
    assert_eq!(run.received_stream[81], run.true_stream[81]);
}

#[test]
fn offline_stages_agree_in_open_loop() {
    let text = SCENARIO.replace("gain = 0.3", "enabled = false\ngain = 0.3");
    let cfg = parse_scenario(&text, "inline").unwrap();
    let truth = run_simulate_stage(&cfg).unwrap();
    let attacked = run_attack_stage(&cfg, &truth).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = run_pipeline(&cfg, dir.path()).unwrap();
    assert_eq!(truth, run.true_stream);
    assert_eq!(attacked.received, run.received_stream);
    assert_eq!(attacked.labels, run.labels);
}

#[test]
fn plot_tables_are_consistent_with_reports() {
    let cfg = parse_scenario(SCENARIO, "inline").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = run_pipeline(&cfg, dir.path()).unwrap();
    let p = cfg.n_channels();

    let ts = emit_plot_data(PlotKind::Timeseries, dir.path()).unwrap();
    assert_eq!(ts.lines().count(), 1 + run.true_stream.len() * p);
    let attacked_rows = ts.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    assert_eq!(attacked_rows, 31 * 2);

    let spread = emit_plot_data(PlotKind::ModeSpread, dir.path()).unwrap();
    let mut lines = spread.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split(',').count(), 3 + cfg.detector.window.n_tilde);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), run.reports.len() * p);
    for row in rows {
        let total: f64 = row.split(',').skip(3).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12, "{row}");
    }

    let clusters = emit_plot_data(PlotKind::Clusters, dir.path()).unwrap();
    let rows: Vec<Vec<&str>> = clusters.lines().skip(1).map(|l| l.split(',').collect()).collect();
    for (j, r) in run.reports.iter().enumerate() {
        for s in 0..p {
            let row = &rows[j * p + s];
            assert_eq!(row[1].parse::<usize>().unwrap(), s);
            assert_eq!(row[2].parse::<usize>().unwrap(), r.labels[s]);
            assert_eq!(row[4] == "1", r.flagged.contains(&s));
        }
    }
}
