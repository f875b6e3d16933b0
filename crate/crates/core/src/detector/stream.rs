use std::collections::VecDeque;

use super::{detect_step, DetectError, DetectionReport, WindowConfig};
use crate::frame::{MeasurementFrame, StreamWindow};
use crate::kmd::KmdError;

/// Stateful detector: a ring buffer of the last `n + 1` frames plus a
/// per-sensor persistence counter.
#[derive(Debug, Clone)]
pub struct Detector {
    cfg: WindowConfig,
    seed: u64,
    buffer: VecDeque<MeasurementFrame>,
    streak: Vec<usize>,
}

impl Detector {
    pub fn new(cfg: WindowConfig, seed: u64) -> Result<Self, DetectError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            seed,
            buffer: VecDeque::with_capacity(cfg.history_len()),
            streak: Vec::new(),
        })
    }

    pub fn config(&self) -> &WindowConfig {
        &self.cfg
    }

    /// Feeds one frame; returns a report once the buffer is full.
    pub fn push(&mut self, frame: MeasurementFrame) -> Result<Option<DetectionReport>, DetectError> {
        if let Some(front) = self.buffer.front() {
            if front.dim() != frame.dim() {
                return Err(KmdError::DimensionMismatch {
                    expected: front.dim(),
                    found: frame.dim(),
                }
                .into());
            }
        } else {
            self.streak = vec![0; frame.dim()];
        }
        if self.buffer.len() == self.cfg.history_len() {
            self.buffer.pop_front();
        }
        self.buffer.push_back(frame);
        if self.buffer.len() < self.cfg.history_len() {
            return Ok(None);
        }
        let history = StreamWindow::new(self.buffer.iter().cloned().collect())?;
        let mut report = detect_step(&history, &self.cfg, self.seed)?;
        for (i, s) in self.streak.iter_mut().enumerate() {
            *s = if report.candidates.contains(&i) { *s + 1 } else { 0 };
        }
        report.flagged = (0..self.streak.len())
            .filter(|&i| self.streak[i] >= self.cfg.min_flag_persistence)
            .collect();
        report.attack = !report.flagged.is_empty();
        Ok(Some(report))
    }
}

/// Iterator adapter returned by [`detect_stream`]. Stops after the first
/// error.
pub struct DetectStream<I> {
    source: I,
    detector: Detector,
    done: bool,
}

impl<I: Iterator<Item = MeasurementFrame>> Iterator for DetectStream<I> {
    type Item = Result<DetectionReport, DetectError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        for frame in self.source.by_ref() {
            match self.detector.push(frame) {
                Ok(Some(r)) => return Some(Ok(r)),
                Ok(None) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
        self.done = true;
        None
    }
}

/// One report per frame after the first `n` frames.
pub fn detect_stream<I>(source: I, cfg: WindowConfig, seed: u64) -> Result<DetectStream<I::IntoIter>, DetectError>
where
    I: IntoIterator<Item = MeasurementFrame>,
{
    Ok(DetectStream {
        source: source.into_iter(),
        detector: Detector::new(cfg, seed)?,
        done: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(len: usize, p: usize, f: impl Fn(usize, usize) -> f64) -> Vec<MeasurementFrame> {
        (0..len)
            .map(|k| MeasurementFrame::new(k as f64 * 0.1, (0..p).map(|i| f(k, i)).collect()))
            .collect()
    }

    fn cfg() -> WindowConfig {
        WindowConfig { n: 20, n_tilde: 4, ..Default::default() }
    }

    #[test]
    fn warm_up_and_counting() {
        let src = frames(20, 4, |_, i| 1.0 + i as f64);
        assert_eq!(detect_stream(src, cfg(), 0).unwrap().count(), 0);
        let src = frames(20 + 1 + 5, 4, |_, i| 1.0 + i as f64);
        let reports: Vec<_> = detect_stream(src, cfg(), 0).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(reports.len(), 6);
        assert!(reports.iter().all(|r| !r.attack));
    }

    #[test]
    fn debounces_and_matches_single_step() {
        let src = frames(40, 6, |k, i| if i == 1 && k >= 30 { 1.1 + 0.05 * (k - 29) as f64 } else { 1.0 + 0.1 * i as f64 });
        let reports: Vec<_> = detect_stream(src.clone(), cfg(), 7).unwrap().collect::<Result<_, _>>().unwrap();
        for (j, r) in reports.iter().enumerate() {
            let single = detect_step(&StreamWindow::new(src[j..j + 21].to_vec()).unwrap(), &cfg(), 7).unwrap();
            assert_eq!(single.labels, r.labels);
            assert_eq!(single.candidates, r.candidates);
            assert_eq!(r.attack, !r.flagged.is_empty());
            for s in &r.flagged {
                assert!(j > 0 && r.candidates.contains(s) && reports[j - 1].candidates.contains(s));
            }
        }
        assert!(reports.iter().any(|r| r.flagged == vec![1]));
    }

    #[test]
    fn longer_persistence_never_flags_earlier() {
        let src = frames(60, 6, |k, i| if i == 4 && k >= 30 { 1.0 + 0.05 * (k - 29) as f64 } else { 1.0 });
        let first = |persistence| {
            let cfg = WindowConfig { min_flag_persistence: persistence, ..cfg() };
            detect_stream(src.clone(), cfg, 1)
                .unwrap()
                .map(|r| r.unwrap())
                .position(|r| r.attack)
                .unwrap_or(usize::MAX)
        };
        let steps: Vec<usize> = (1..5).map(first).collect();
        assert!(steps.windows(2).all(|w| w[0] <= w[1]), "{steps:?}");
        assert!(steps[0] < usize::MAX);
    }

    #[test]
    fn dimension_change_ends_stream() {
        let mut src = frames(25, 4, |_, _| 1.0);
        src[22] = MeasurementFrame::new(2.2, vec![1.0; 3]);
        let out: Vec<_> = detect_stream(src, cfg(), 0).unwrap().collect();
        assert!(out.last().unwrap().is_err());
        assert_eq!(out.len(), 3);
    }
}
