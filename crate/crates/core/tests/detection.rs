use koopwatch::detector::{detect_step, detect_stream, WindowConfig};
use koopwatch::frame::{MeasurementFrame, StreamWindow};
use koopwatch::io::{bundled_scenario, parse_scenario, run_pipeline};
use proptest::prelude::*;

fn small_cfg() -> WindowConfig {
    WindowConfig {
        n: 30,
        n_tilde: 6,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Zero background: the fitted operator is zero, so the error sequence is
    // exactly the injected values on `attacked` and exactly zero elsewhere.
    #[test]
    fn separable_errors_are_localized(
        p in 6usize..14,
        picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..6),
        values in proptest::collection::vec(0.01f64..1.0, 14 * 7),
        signs in proptest::collection::vec(any::<bool>(), 14 * 7),
        seed in 0u64..1000,
    ) {
        let cfg = small_cfg();
        let mut attacked: Vec<usize> = picks.iter().map(|ix| ix.index(p)).collect();
        attacked.sort_unstable();
        attacked.dedup();
        prop_assume!(2 * attacked.len() < p);

        let split = cfg.learning_len();
        let frames: Vec<MeasurementFrame> = (0..cfg.history_len())
            .map(|k| {
                let mut v = vec![0.0; p];
                if k >= split {
                    for &s in &attacked {
                        let ix = (k - split) * 14 + s;
                        v[s] = if signs[ix] { values[ix] } else { -values[ix] };
                    }
                }
                MeasurementFrame::new(k as f64 * 0.05, v)
            })
            .collect();
        let report = detect_step(&StreamWindow::new(frames).unwrap(), &cfg, seed).unwrap();
        prop_assert!(report.attack);
        prop_assert_eq!(report.flagged, attacked);
    }
}

#[test]
fn noisy_attack_free_run_has_no_verdicts() {
    // 1000 frames of process noise 1e-4 around the operating point.
    let text = bundled_scenario("ten_bus_load_step").unwrap();
    let start = text.find("[[events]]").unwrap();
    let end = text.find("[simulation]").unwrap();
    let text = format!("{}{}", &text[..start], &text[end..])
        .replace("t_end = 80.0", "t_end = 33.3")
        .replace("min_flag_persistence = 2", "min_flag_persistence = 3");
    let cfg = parse_scenario(&text, "noise_only").unwrap();
    assert!(cfg.events.is_empty());
    let dir = tempfile::tempdir().unwrap();
    let run = run_pipeline(&cfg, dir.path()).unwrap();
    assert_eq!(run.true_stream.len(), 1000);
    assert_eq!(run.metrics.attack_steps, 0);
}

#[test]
fn stream_reports_follow_warm_up() {
    let cfg = small_cfg();
    let src: Vec<MeasurementFrame> = (0..50).map(|k| MeasurementFrame::new(k as f64, vec![1.0, 2.0, 3.0])).collect();
    let reports: Vec<_> = detect_stream(src, cfg, 0).unwrap().collect::<Result<_, _>>().unwrap();
    assert_eq!(reports.len(), 50 - cfg.n);
    assert!(reports.iter().all(|r| !r.attack && r.separation < cfg.tau));
}
