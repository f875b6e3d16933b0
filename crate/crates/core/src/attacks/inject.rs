use rand::Rng;

use super::{AttackError, AttackKind, AttackSpec};
use crate::frame::MeasurementFrame;
use crate::gridsim::MeasurementHook;
use crate::rng::{stream_rng, streams, StreamRng};

#[derive(Debug, Clone)]
struct SpecState {
    rng: StreamRng,
    /// First in-window sample index once the attack has started.
    start_index: Option<usize>,
    /// Per-target pre-attack mean, for multiplicative attacks.
    baseline: Vec<f64>,
    warned: bool,
}

/// Causal attack application, one frame at a time.
///
/// Keeps the true history it needs for replay, delay and freezing, so the same
/// injector can sit inside a closed-loop simulation or run over a recorded
/// stream with identical output.
#[derive(Debug, Clone)]
pub struct AttackInjector {
    specs: Vec<AttackSpec>,
    state: Vec<SpecState>,
    p: usize,
    dt: f64,
    history: Vec<MeasurementFrame>,
    delivered: Option<Vec<f64>>,
    labels: Vec<Vec<usize>>,
    warnings: Vec<String>,
}

impl AttackInjector {
    pub fn new(specs: Vec<AttackSpec>, p: usize, dt: f64) -> Result<Self, AttackError> {
        if !(dt > 0.0) {
            return Err(AttackError::InvalidSpec("sample interval must be positive".into()));
        }
        for s in &specs {
            s.validate(p)?;
        }
        let state = specs
            .iter()
            .map(|s| SpecState {
                rng: stream_rng(s.seed, streams::ATTACK),
                start_index: None,
                baseline: Vec::new(),
                warned: false,
            })
            .collect();
        let mut warnings = Vec::new();
        for s in &specs {
            if let AttackKind::PacketLoss { omit: true, .. } = s.kind {
                warnings.push(format!(
                    "packet_loss on {:?}: omitted frames are filled by holding the last delivered value",
                    s.targets
                ));
            }
        }
        Ok(Self {
            specs,
            state,
            p,
            dt,
            history: Vec::new(),
            delivered: None,
            labels: Vec::new(),
            warnings,
        })
    }

    pub fn specs(&self) -> &[AttackSpec] {
        &self.specs
    }

    /// Attacked sensors per processed sample, sorted ascending.
    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn lagged(&mut self, spec_idx: usize, k: usize, lag: usize) -> usize {
        if lag > k {
            let st = &mut self.state[spec_idx];
            if !st.warned {
                st.warned = true;
                self.warnings.push(format!(
                    "{} attack #{spec_idx}: lag of {lag} samples exceeds history at sample {k}; holding first frame",
                    self.specs[spec_idx].kind.name()
                ));
            }
            0
        } else {
            k - lag
        }
    }

    /// Processes the next true frame and returns what the receiver sees.
    pub fn process(&mut self, frame: &MeasurementFrame) -> Result<MeasurementFrame, AttackError> {
        if frame.dim() != self.p {
            return Err(AttackError::DimensionMismatch {
                expected: self.p,
                found: frame.dim(),
            });
        }
        let k = self.history.len();
        self.history.push(frame.clone());
        let t = frame.t;
        let mut out = frame.values.clone();
        let mut attacked: Vec<usize> = Vec::new();

        for si in 0..self.specs.len() {
            if !self.specs[si].active_at(t) {
                continue;
            }
            if self.state[si].start_index.is_none() {
                self.begin(si, k);
            }
            let start = self.state[si].start_index.unwrap_or(k);
            let spec = self.specs[si].clone();
            let elapsed = t - spec.t_start;
            attacked.extend(&spec.targets);
            match spec.kind {
                AttackKind::Step { magnitude } => {
                    for &c in &spec.targets {
                        out[c] += magnitude;
                    }
                }
                AttackKind::Ramp { rate } => {
                    for &c in &spec.targets {
                        out[c] += rate * elapsed;
                    }
                }
                AttackKind::Random { bound } => {
                    for &c in &spec.targets {
                        let u: f64 = self.state[si].rng.random();
                        out[c] += bound * (2.0 * u - 1.0);
                    }
                }
                AttackKind::Trapezoidal { rise, hold, fall, peak } => {
                    let a = trapezoid(elapsed, rise, hold, fall, peak);
                    for &c in &spec.targets {
                        out[c] += a;
                    }
                }
                AttackKind::Multiplicative { gamma, .. } => {
                    for (ti, &c) in spec.targets.iter().enumerate() {
                        let deviation = frame.values[c] - self.state[si].baseline[ti];
                        out[c] += gamma * elapsed * deviation;
                    }
                }
                AttackKind::Replay { offset } => {
                    let lag = (offset / self.dt).round() as usize;
                    let src = self.lagged(si, k, lag);
                    for &c in &spec.targets {
                        out[c] = self.history[src].values[c];
                    }
                }
                AttackKind::TimeDelay { samples } => {
                    let src = self.lagged(si, k, samples);
                    for &c in &spec.targets {
                        out[c] = self.history[src].values[c];
                    }
                }
                AttackKind::PacketLoss { probability, .. } => {
                    for &c in &spec.targets {
                        let u: f64 = self.state[si].rng.random();
                        if u < probability {
                            if let Some(prev) = &self.delivered {
                                out[c] = prev[c];
                            }
                        }
                    }
                }
                AttackKind::Freezing => {
                    for &c in &spec.targets {
                        out[c] = self.history[start].values[c];
                    }
                }
            }
        }
        attacked.sort_unstable();
        attacked.dedup();
        self.labels.push(attacked);
        self.delivered = Some(out.clone());
        Ok(MeasurementFrame::new(t, out))
    }

    fn begin(&mut self, si: usize, k: usize) {
        let spec = &self.specs[si];
        self.state[si].start_index = Some(k);
        if let AttackKind::Multiplicative { baseline, .. } = spec.kind {
            let lo = spec.t_start - baseline - 1e-9;
            let hi = spec.t_start - 1e-9;
            let window: Vec<&MeasurementFrame> = self.history[..k]
                .iter()
                .filter(|f| f.t >= lo && f.t < hi)
                .collect();
            let means = if window.is_empty() {
                self.warnings.push(format!(
                    "multiplicative attack #{si}: no samples before t_start; baseline taken at t_start"
                ));
                spec.targets.iter().map(|&c| self.history[k].values[c]).collect()
            } else {
                spec.targets
                    .iter()
                    .map(|&c| window.iter().map(|f| f.values[c]).sum::<f64>() / window.len() as f64)
                    .collect()
            };
            self.state[si].baseline = means;
        }
    }
}

impl MeasurementHook for AttackInjector {
    /// Panics on a frame narrower or wider than the injector was built for.
    fn transform(&mut self, _k: usize, frame: &MeasurementFrame) -> MeasurementFrame {
        self.process(frame).expect("frame width matches the injector")
    }
}

fn trapezoid(elapsed: f64, rise: f64, hold: f64, fall: f64, peak: f64) -> f64 {
    if elapsed < 0.0 {
        0.0
    } else if elapsed < rise {
        peak * elapsed / rise
    } else if elapsed <= rise + hold {
        peak
    } else if elapsed < rise + hold + fall {
        peak * (1.0 - (elapsed - rise - hold) / fall)
    } else {
        0.0
    }
}

/// Received stream plus per-sample ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackedStream {
    pub received: Vec<MeasurementFrame>,
    pub labels: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

/// Applies every spec, in order, to a recorded true stream.
pub fn apply_attacks(stream: &[MeasurementFrame], specs: &[AttackSpec]) -> Result<AttackedStream, AttackError> {
    let Some(first) = stream.first() else {
        return Ok(AttackedStream {
            received: Vec::new(),
            labels: Vec::new(),
            warnings: Vec::new(),
        });
    };
    let dt = if stream.len() > 1 { stream[1].t - first.t } else { 1.0 };
    let mut injector = AttackInjector::new(specs.to_vec(), first.dim(), dt)?;
    let received = stream
        .iter()
        .map(|f| injector.process(f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AttackedStream {
        received,
        labels: injector.labels,
        warnings: injector.warnings,
    })
}

pub fn apply_attack(stream: &[MeasurementFrame], spec: &AttackSpec) -> Result<AttackedStream, AttackError> {
    apply_attacks(stream, std::slice::from_ref(spec))
}

/// `a_k = received - true`, elementwise.
pub fn attack_signal(true_frame: &MeasurementFrame, received: &MeasurementFrame) -> Result<MeasurementFrame, AttackError> {
    if true_frame.dim() != received.dim() {
        return Err(AttackError::DimensionMismatch {
            expected: true_frame.dim(),
            found: received.dim(),
        });
    }
    Ok(MeasurementFrame::new(
        received.t,
        received.values.iter().zip(&true_frame.values).map(|(r, y)| r - y).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DT: f64 = 0.1;

    fn stream(len: usize, p: usize, f: impl Fn(f64, usize) -> f64) -> Vec<MeasurementFrame> {
        (0..len)
            .map(|k| {
                let t = k as f64 * DT;
                MeasurementFrame::new(t, (0..p).map(|c| f(t, c)).collect())
            })
            .collect()
    }

    #[test]
    fn step_on_zero_stream() {
        let s = stream(30, 3, |_, _| 0.0);
        let spec = AttackSpec::new(AttackKind::Step { magnitude: 0.1 }, vec![1], 1.0, 2.0);
        let out = apply_attack(&s, &spec).unwrap();
        for (k, f) in out.received.iter().enumerate() {
            let inside = (10..=20).contains(&k);
            assert_eq!(f.values[0], 0.0);
            assert_eq!(f.values[2], 0.0);
            assert_eq!(f.values[1], if inside { 0.1 } else { 0.0 }, "k={k}");
            assert_eq!(out.labels[k], if inside { vec![1] } else { vec![] });
            let a = attack_signal(&s[k], f).unwrap();
            assert_eq!(a.values[1], if inside { 0.1 } else { 0.0 });
        }
    }

    #[test]
    fn freezing_holds_start_value() {
        let s = stream(40, 2, |t, _| t);
        let spec = AttackSpec::new(AttackKind::Freezing, vec![0], 1.0, 3.0);
        let out = apply_attack(&s, &spec).unwrap();
        for (k, f) in out.received.iter().enumerate() {
            if (10..=30).contains(&k) {
                assert!((f.values[0] - 1.0).abs() < 1e-12);
            } else {
                assert_eq!(f.values[0], s[k].values[0]);
            }
            assert_eq!(f.values[1], s[k].values[1]);
        }
    }

    #[test]
    fn multiplicative_matches_scripted_value() {
        // Baseline 0 for t < 3, then a constant 0.2 deviation.
        let s = stream(60, 1, |t, _| if t < 3.0 - 1e-9 { 0.0 } else { 0.2 });
        let spec = AttackSpec::new(AttackKind::Multiplicative { gamma: 0.5, baseline: 2.0 }, vec![0], 3.0, 5.5);
        let out = apply_attack(&s, &spec).unwrap();
        // 2 s after start: k = 50, t = 5.0
        let a = attack_signal(&s[50], &out.received[50]).unwrap().values[0];
        let scripted = 0.2 * (0.5 * 2.0);
        assert!((a - scripted).abs() < 1e-12, "{a}");
    }

    #[test]
    fn ramp_and_trapezoid_closed_forms() {
        let s = stream(80, 1, |_, _| 1.0);
        let ramp = AttackSpec::new(AttackKind::Ramp { rate: 2.0 }, vec![0], 1.0, 7.0);
        let out = apply_attack(&s, &ramp).unwrap();
        for k in 10..=70 {
            let t = k as f64 * DT;
            let a = out.received[k].values[0] - 1.0;
            assert!((a - 2.0 * (t - 1.0)).abs() < 1e-12);
        }
        let trap = AttackSpec::new(
            AttackKind::Trapezoidal { rise: 1.0, hold: 2.0, fall: 1.0, peak: 0.4 },
            vec![0],
            1.0,
            7.0,
        );
        let out = apply_attack(&s, &trap).unwrap();
        let a = |k: usize| out.received[k].values[0] - 1.0;
        assert!((a(15) - 0.2).abs() < 1e-12);
        assert!((a(30) - 0.4).abs() < 1e-12);
        assert!((a(45) - 0.2).abs() < 1e-12);
        assert!(a(60).abs() < 1e-12);
    }

    #[test]
    fn replay_and_delay_shift_history() {
        let s = stream(50, 2, |t, c| t * (c + 1) as f64);
        let replay = AttackSpec::new(AttackKind::Replay { offset: 1.0 }, vec![1], 2.0, 4.0);
        let out = apply_attack(&s, &replay).unwrap();
        for k in 20..=40 {
            assert_eq!(out.received[k].values[1], s[k - 10].values[1]);
            let a = attack_signal(&s[k], &out.received[k]).unwrap();
            assert_eq!(a.values[1], s[k - 10].values[1] - s[k].values[1]);
        }
        let delay = AttackSpec::new(AttackKind::TimeDelay { samples: 3 }, vec![0], 2.0, 4.0);
        let out = apply_attack(&s, &delay).unwrap();
        assert_eq!(out.received[25].values[0], s[22].values[0]);
    }

    #[test]
    fn replay_beyond_history_holds_first_frame_and_warns() {
        let s = stream(30, 1, |t, _| 1.0 + t);
        let replay = AttackSpec::new(AttackKind::Replay { offset: 2.0 }, vec![0], 0.5, 2.5);
        let out = apply_attack(&s, &replay).unwrap();
        assert_eq!(out.received[5].values[0], s[0].values[0]);
        assert_eq!(out.received[25].values[0], s[5].values[0]);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn packet_loss_holds_previous_delivery() {
        let s = stream(200, 1, |t, _| t);
        let spec = AttackSpec::new(AttackKind::PacketLoss { probability: 0.5, omit: false }, vec![0], 1.0, 15.0).with_seed(4);
        let out = apply_attack(&s, &spec).unwrap();
        let mut held = 0;
        for k in 1..s.len() {
            let r = out.received[k].values[0];
            if r != s[k].values[0] {
                assert!(s[k].t >= 1.0 - 1e-9 && s[k].t <= 15.0 + 1e-9);
                assert_eq!(r, out.received[k - 1].values[0]);
                held += 1;
            }
        }
        assert!(held > 20 && held < 120, "{held}");
        assert_eq!(out, apply_attack(&s, &spec).unwrap());
    }

    #[test]
    fn random_is_bounded_and_seeded() {
        let s = stream(100, 2, |_, _| 0.0);
        let spec = AttackSpec::new(AttackKind::Random { bound: 0.3 }, vec![0, 1], 1.0, 8.0).with_seed(11);
        let a = apply_attack(&s, &spec).unwrap();
        let b = apply_attack(&s, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.received.iter().flat_map(|f| &f.values).all(|v| v.abs() <= 0.3));
        let other = apply_attack(&s, &spec.clone().with_seed(12)).unwrap();
        assert_ne!(a.received, other.received);
    }

    fn arb_kind() -> impl Strategy<Value = AttackKind> {
        prop_oneof![
            (-1.0f64..1.0).prop_map(|magnitude| AttackKind::Step { magnitude }),
            (-1.0f64..1.0).prop_map(|rate| AttackKind::Ramp { rate }),
            (0.0f64..1.0).prop_map(|bound| AttackKind::Random { bound }),
            (0.1f64..2.0).prop_map(|gamma| AttackKind::Multiplicative { gamma, baseline: 1.0 }),
            (0.1f64..2.0).prop_map(|offset| AttackKind::Replay { offset }),
            (1usize..5).prop_map(|samples| AttackKind::TimeDelay { samples }),
            (0.0f64..0.9).prop_map(|probability| AttackKind::PacketLoss { probability, omit: false }),
            Just(AttackKind::Freezing),
        ]
    }

    proptest! {
        #[test]
        fn attacks_are_local(kind in arb_kind(), t0 in 0.0f64..3.0, len in 0.2f64..3.0, target in 0usize..4, seed in 0u64..100) {
            let s = stream(60, 4, |t, c| (t * (c as f64 + 1.0)).sin());
            let spec = AttackSpec::new(kind, vec![target], t0, t0 + len).with_seed(seed);
            let out = apply_attack(&s, &spec).unwrap();
            for (k, f) in out.received.iter().enumerate() {
                for c in 0..4 {
                    if c != target || !spec.active_at(s[k].t) {
                        prop_assert_eq!(f.values[c], s[k].values[c]);
                    }
                }
            }
        }

        #[test]
        fn disjoint_specs_commute(a in arb_kind(), b in arb_kind(), seed in 0u64..50) {
            let s = stream(60, 3, |t, c| (t + c as f64).cos());
            let sa = AttackSpec::new(a, vec![0], 1.0, 4.0).with_seed(seed);
            let sb = AttackSpec::new(b, vec![2], 2.0, 5.0).with_seed(seed + 1);
            let ab = apply_attacks(&s, &[sa.clone(), sb.clone()]).unwrap();
            let ba = apply_attacks(&s, &[sb, sa]).unwrap();
            prop_assert_eq!(ab.received, ba.received);
            prop_assert_eq!(ab.labels, ba.labels);
        }
    }
}
