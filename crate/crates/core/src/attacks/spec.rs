use serde::{Deserialize, Serialize};

use super::AttackError;

/// Names accepted for [`AttackKind`] in configuration files.
pub const ATTACK_KINDS: [&str; 9] = [
    "step",
    "ramp",
    "random",
    "trapezoidal",
    "multiplicative",
    "replay",
    "time_delay",
    "packet_loss",
    "freezing",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackKind {
    /// `a = magnitude`.
    Step { magnitude: f64 },
    /// `a = rate * (t - t_start)`.
    Ramp { rate: f64 },
    /// `a ~ Uniform(-bound, bound)`, independently per sample and target.
    Random { bound: f64 },
    /// Linear rise to `peak` over `rise` seconds, flat for `hold`, linear
    /// fall over `fall`, zero afterwards.
    Trapezoidal { rise: f64, hold: f64, fall: f64, peak: f64 },
    /// `a = gamma * (t - t_start) * (y - y_bar)`, with `y_bar` the mean of
    /// the true reading over the `baseline` seconds before `t_start`.
    Multiplicative {
        gamma: f64,
        #[serde(default = "default_baseline")]
        baseline: f64,
    },
    /// Received reading is the true reading `offset` seconds earlier.
    Replay { offset: f64 },
    /// Received reading is the true reading `samples` samples earlier.
    TimeDelay { samples: usize },
    /// With probability `probability` per sample the previously delivered
    /// value is held. `omit` marks streams where lost frames were dropped
    /// upstream; they are still filled by holds.
    PacketLoss {
        probability: f64,
        #[serde(default)]
        omit: bool,
    },
    /// Received reading is frozen at its value at `t_start`.
    Freezing,
}

fn default_baseline() -> f64 {
    2.0
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::Step { .. } => "step",
            AttackKind::Ramp { .. } => "ramp",
            AttackKind::Random { .. } => "random",
            AttackKind::Trapezoidal { .. } => "trapezoidal",
            AttackKind::Multiplicative { .. } => "multiplicative",
            AttackKind::Replay { .. } => "replay",
            AttackKind::TimeDelay { .. } => "time_delay",
            AttackKind::PacketLoss { .. } => "packet_loss",
            AttackKind::Freezing => "freezing",
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(
            self,
            AttackKind::Step { .. }
                | AttackKind::Ramp { .. }
                | AttackKind::Random { .. }
                | AttackKind::Trapezoidal { .. }
                | AttackKind::Multiplicative { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub targets: Vec<usize>,
    pub t_start: f64,
    pub t_end: f64,
    /// Seed for the random and packet-loss kinds.
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, targets: Vec<usize>, t_start: f64, t_end: f64) -> Self {
        Self {
            kind,
            targets,
            t_start,
            t_end,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Inclusive window test with a small tolerance for grid rounding.
    pub fn active_at(&self, t: f64) -> bool {
        t >= self.t_start - 1e-9 && t <= self.t_end + 1e-9
    }

    pub fn validate(&self, p: usize) -> Result<(), AttackError> {
        let bad = |m: String| Err(AttackError::InvalidSpec(m));
        if !(self.t_start.is_finite() && self.t_end.is_finite()) || self.t_start >= self.t_end {
            return bad(format!("t_start ({}) must precede t_end ({})", self.t_start, self.t_end));
        }
        if self.t_start < 0.0 {
            return bad("t_start must be non-negative".into());
        }
        if self.targets.is_empty() {
            return bad("targets must not be empty".into());
        }
        if let Some(&t) = self.targets.iter().find(|&&t| t >= p) {
            return bad(format!("target {t} out of range for {p} sensors"));
        }
        let mut sorted = self.targets.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.targets.len() {
            return bad("targets contain duplicates".into());
        }
        let finite = |name: &str, v: f64| -> Result<(), AttackError> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(AttackError::InvalidSpec(format!("{name} must be finite")))
            }
        };
        let non_negative = |name: &str, v: f64| -> Result<(), AttackError> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(AttackError::InvalidSpec(format!("{name} must be non-negative")))
            }
        };
        match &self.kind {
            AttackKind::Step { magnitude } => finite("magnitude", *magnitude),
            AttackKind::Ramp { rate } => finite("rate", *rate),
            AttackKind::Random { bound } => non_negative("bound", *bound),
            AttackKind::Trapezoidal { rise, hold, fall, peak } => {
                non_negative("rise", *rise)?;
                non_negative("hold", *hold)?;
                non_negative("fall", *fall)?;
                finite("peak", *peak)
            }
            AttackKind::Multiplicative { gamma, baseline } => {
                finite("gamma", *gamma)?;
                if baseline.is_finite() && *baseline > 0.0 {
                    Ok(())
                } else {
                    bad("baseline must be positive".into())
                }
            }
            AttackKind::Replay { offset } => {
                if offset.is_finite() && *offset > 0.0 {
                    Ok(())
                } else {
                    bad("replay offset must be positive".into())
                }
            }
            AttackKind::TimeDelay { samples } => {
                if *samples > 0 {
                    Ok(())
                } else {
                    bad("delay must be at least one sample".into())
                }
            }
            AttackKind::PacketLoss { probability, .. } => {
                if (0.0..1.0).contains(probability) {
                    Ok(())
                } else {
                    bad(format!("loss probability {probability} must lie in [0, 1)"))
                }
            }
            AttackKind::Freezing => Ok(()),
        }
    }
}
