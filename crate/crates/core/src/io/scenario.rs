use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IoError;
use crate::attacks::{AttackKind, AttackSpec, ATTACK_KINDS};
use crate::detector::{DetectError, WindowConfig};
use crate::gridsim::{ControllerConfig, EventSpec, Gain, GridSim, NetworkModel, SimError};

/// Directory searched for scenario names that are not paths.
pub const SCENARIO_DIR_ENV: &str = "KOOPWATCH_SCENARIO_DIR";

/// Scenarios compiled into the library, by name.
pub const BUNDLED_SCENARIOS: [(&str, &str); 2] = [
    ("ten_bus_multiplicative", include_str!("../../scenarios/ten_bus_multiplicative.toml")),
    ("ten_bus_load_step", include_str!("../../scenarios/ten_bus_load_step.toml")),
];

pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".toml").unwrap_or(name);
    BUNDLED_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSection {
    pub susceptance: Vec<Vec<f64>>,
    pub inertia: Vec<f64>,
    pub damping: Vec<f64>,
    pub injection: Vec<f64>,
    pub pinned: Vec<usize>,
    pub magnitude_proxy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerSection {
    pub enabled: bool,
    pub gain: Gain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackEntry {
    #[serde(flatten)]
    pub kind: AttackKind,
    pub targets: Vec<usize>,
    pub t_start: f64,
    pub t_end: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationSection {
    pub t_end: f64,
    pub dt: f64,
    pub noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorSection {
    #[serde(flatten)]
    pub window: WindowConfig,
    pub seed: u64,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub network: NetworkSection,
    pub controller: ControllerSection,
    pub events: Vec<EventSpec>,
    pub attacks: Vec<AttackEntry>,
    pub simulation: SimulationSection,
    pub detector: DetectorSection,
}

/// Command-line overrides applied on top of a loaded scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    /// Replaces both the simulation and the detector seed.
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub n_tilde: Option<usize>,
    pub tau: Option<f64>,
}

impl ScenarioConfig {
    pub fn n_bus(&self) -> usize {
        self.network.inertia.len()
    }

    pub fn n_channels(&self) -> usize {
        if self.network.magnitude_proxy {
            3 * self.n_bus()
        } else {
            2 * self.n_bus()
        }
    }

    pub fn network_model(&self) -> Result<NetworkModel, SimError> {
        let n = self.n_bus();
        let b = nalgebra::DMatrix::from_fn(n, n, |i, j| self.network.susceptance[i][j]);
        let mut pinned = vec![false; n];
        for &i in &self.network.pinned {
            pinned[i] = true;
        }
        Ok(NetworkModel::new(
            b,
            self.network.inertia.clone(),
            self.network.damping.clone(),
            self.network.injection.clone(),
        )?
        .with_pinned(pinned)?
        .with_magnitude_proxy(self.network.magnitude_proxy))
    }

    pub fn controller(&self) -> ControllerConfig {
        ControllerConfig {
            gain: self.controller.gain.clone(),
            enabled: self.controller.enabled,
        }
    }

    pub fn grid_sim(&self) -> Result<GridSim, SimError> {
        GridSim::new(self.network_model()?, &self.controller(), self.events.clone())
    }

    pub fn attack_specs(&self) -> Vec<AttackSpec> {
        self.attacks
            .iter()
            .map(|a| AttackSpec::new(a.kind.clone(), a.targets.clone(), a.t_start, a.t_end).with_seed(a.seed))
            .collect()
    }

    /// Sorted-key JSON of the effective configuration.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serializes");
        serde_json::to_string(&value).expect("json value serializes")
    }

    /// SHA-256 of [`Self::canonical_json`], hex encoded.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Applies overrides and re-validates.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self, IoError> {
        if let Some(seed) = o.seed {
            self.simulation.seed = seed;
            self.detector.seed = seed;
        }
        if let Some(n) = o.n {
            self.detector.window.n = n;
        }
        if let Some(nt) = o.n_tilde {
            self.detector.window.n_tilde = nt;
        }
        if let Some(tau) = o.tau {
            self.detector.window.tau = tau;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let n = self.n_bus();
        let model = self.network_model().map_err(|e| sim_field("network", e))?;
        model.operating_point().map_err(|e| sim_field("network.injection", e))?;
        match &self.controller.gain {
            Gain::Diagonal(d) if d.len() != n => {
                return Err(IoError::validation("controller.gain", format!("has {} entries, expected {n}", d.len())))
            }
            g => {
                g.to_matrix(n).map_err(|e| sim_field("controller.gain", e))?;
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            if e.bus >= n {
                return Err(IoError::validation(format!("events[{i}].bus"), format!("bus {} out of range for {n} buses", e.bus)));
            }
            if !(e.t_start >= 0.0) || !e.delta_p.is_finite() {
                return Err(IoError::validation(format!("events[{i}]"), "t_start must be non-negative and delta_p finite"));
            }
        }
        let p = self.n_channels();
        for (i, spec) in self.attack_specs().iter().enumerate() {
            spec.validate(p)
                .map_err(|e| IoError::validation(format!("attacks[{i}]"), e.to_string()))?;
        }
        let s = &self.simulation;
        if !(s.t_end > 0.0) || !s.t_end.is_finite() {
            return Err(IoError::validation("simulation.t_end", "must be positive"));
        }
        if !(s.dt > 0.0) || !s.dt.is_finite() || s.dt > s.t_end {
            return Err(IoError::validation("simulation.dt", "must be positive and below t_end"));
        }
        if !(s.noise_std >= 0.0) || !s.noise_std.is_finite() {
            return Err(IoError::validation("simulation.noise_std", "must be non-negative"));
        }
        self.detector.window.validate().map_err(|e| match e {
            DetectError::InvalidConfig { field, message } => IoError::validation(format!("detector.{field}"), message),
            other => IoError::validation("detector", other.to_string()),
        })?;
        if self.detector.window.k > p {
            return Err(IoError::validation("detector.k", format!("exceeds the {p} sensors")));
        }
        Ok(())
    }
}

fn sim_field(field: &str, e: SimError) -> IoError {
    IoError::validation(field, e.to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    network: RawNetwork,
    controller: Option<RawController>,
    #[serde(default)]
    events: Vec<RawEvent>,
    #[serde(default)]
    attacks: Vec<toml::Table>,
    simulation: RawSimulation,
    detector: Option<toml::Table>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    n_bus: usize,
    ring: Option<RawRing>,
    lines: Option<Vec<RawLine>>,
    inertia: PerBus,
    damping: PerBus,
    injection: PerBus,
    #[serde(default)]
    pinned: Vec<usize>,
    #[serde(default)]
    magnitude_proxy: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PerBus {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRing {
    b: f64,
    #[serde(default)]
    chord_b: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    from: usize,
    to: usize,
    b: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    #[serde(default = "yes")]
    enabled: bool,
    gain: Gain,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    kind: String,
    bus: usize,
    t_start: f64,
    delta_p: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    t_end: f64,
    dt: Option<f64>,
    sample_rate: Option<f64>,
    #[serde(default)]
    noise_std: f64,
    #[serde(default)]
    seed: u64,
}

fn per_bus(field: &str, v: PerBus, n: usize) -> Result<Vec<f64>, IoError> {
    match v {
        PerBus::Scalar(x) => Ok(vec![x; n]),
        PerBus::List(xs) if xs.len() == n => Ok(xs),
        PerBus::List(xs) => Err(IoError::validation(field, format!("has {} entries, expected {n}", xs.len()))),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates scenario text; `origin` labels parse errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioConfig, IoError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| IoError::Parse {
        path: origin.to_string(),
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;

    let n = raw.network.n_bus;
    if n == 0 {
        return Err(IoError::validation("network.n_bus", "must be at least 1"));
    }
    let mut b = vec![vec![0.0; n]; n];
    match (raw.network.ring, raw.network.lines) {
        (Some(ring), None) => {
            let m = NetworkModel::ring_with_chords(n, ring.b, ring.chord_b, vec![1.0; n], vec![0.0; n], vec![0.0; n])
                .map_err(|e| sim_field("network.ring", e))?;
            for (i, row) in b.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = m.susceptance[(i, j)];
                }
            }
        }
        (None, Some(lines)) => {
            for (k, l) in lines.iter().enumerate() {
                if l.from >= n || l.to >= n || l.from == l.to {
                    return Err(IoError::validation(format!("network.lines[{k}]"), "endpoints must be distinct buses"));
                }
                if !(l.b > 0.0) || !l.b.is_finite() {
                    return Err(IoError::validation(format!("network.lines[{k}].b"), "must be positive"));
                }
                b[l.from][l.to] += l.b;
                b[l.to][l.from] += l.b;
            }
        }
        _ => return Err(IoError::validation("network", "give exactly one of `ring` or `lines`")),
    }
    if let Some(&i) = raw.network.pinned.iter().find(|&&i| i >= n) {
        return Err(IoError::validation("network.pinned", format!("bus {i} out of range")));
    }
    let network = NetworkSection {
        susceptance: b,
        inertia: per_bus("network.inertia", raw.network.inertia, n)?,
        damping: per_bus("network.damping", raw.network.damping, n)?,
        injection: per_bus("network.injection", raw.network.injection, n)?,
        pinned: raw.network.pinned,
        magnitude_proxy: raw.network.magnitude_proxy,
    };

    let controller = match raw.controller {
        Some(c) => ControllerSection {
            enabled: c.enabled,
            gain: c.gain,
        },
        None => ControllerSection {
            enabled: false,
            gain: Gain::Scalar(0.0),
        },
    };

    let mut events = Vec::with_capacity(raw.events.len());
    for (i, e) in raw.events.into_iter().enumerate() {
        if e.kind != "load_step" {
            return Err(IoError::validation(format!("events[{i}].kind"), format!("unknown event kind `{}`; valid kinds: load_step", e.kind)));
        }
        events.push(EventSpec {
            bus: e.bus,
            t_start: e.t_start,
            delta_p: e.delta_p,
        });
    }

    let attacks = raw
        .attacks
        .into_iter()
        .enumerate()
        .map(|(i, t)| parse_attack(i, t))
        .collect::<Result<Vec<_>, _>>()?;

    let dt = match (raw.simulation.dt, raw.simulation.sample_rate) {
        (Some(dt), None) => dt,
        (None, Some(rate)) if rate > 0.0 => 1.0 / rate,
        (None, Some(_)) => return Err(IoError::validation("simulation.sample_rate", "must be positive")),
        _ => return Err(IoError::validation("simulation", "give exactly one of `dt` or `sample_rate`")),
    };
    let simulation = SimulationSection {
        t_end: raw.simulation.t_end,
        dt,
        noise_std: raw.simulation.noise_std,
        seed: raw.simulation.seed,
    };

    let detector = parse_detector(raw.detector)?;
    let cfg = ScenarioConfig {
        name: raw.name.unwrap_or_else(|| origin.to_string()),
        network,
        controller,
        events,
        attacks,
        simulation,
        detector,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_attack(i: usize, mut table: toml::Table) -> Result<AttackEntry, IoError> {
    let field = |name: &str| format!("attacks[{i}].{name}");
    let kind = match table.get("kind") {
        Some(toml::Value::String(s)) => s.clone(),
        Some(_) => return Err(IoError::validation(field("kind"), "must be a string")),
        None => return Err(IoError::validation(field("kind"), format!("missing; valid kinds: {}", ATTACK_KINDS.join(", ")))),
    };
    if !ATTACK_KINDS.contains(&kind.as_str()) {
        return Err(IoError::validation(
            field("kind"),
            format!("unknown attack kind `{kind}`; valid kinds: {}", ATTACK_KINDS.join(", ")),
        ));
    }
    let mut take = |name: &str| table.remove(name);
    let targets: Vec<usize> = match take("targets") {
        Some(v) => v.try_into().map_err(|e: toml::de::Error| IoError::validation(field("targets"), e.message().to_string()))?,
        None => return Err(IoError::validation(field("targets"), "missing")),
    };
    let number = |v: Option<toml::Value>, name: &str| -> Result<f64, IoError> {
        match v {
            Some(toml::Value::Float(x)) => Ok(x),
            Some(toml::Value::Integer(x)) => Ok(x as f64),
            Some(_) => Err(IoError::validation(field(name), "must be a number")),
            None => Err(IoError::validation(field(name), "missing")),
        }
    };
    let t_start = number(take("t_start"), "t_start")?;
    let t_end = number(take("t_end"), "t_end")?;
    let seed = match take("seed") {
        None => 0,
        Some(toml::Value::Integer(s)) if s >= 0 => s as u64,
        Some(_) => return Err(IoError::validation(field("seed"), "must be a non-negative integer")),
    };
    let kind: AttackKind = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| IoError::validation(format!("attacks[{i}]"), e.message().to_string()))?;
    Ok(AttackEntry {
        kind,
        targets,
        t_start,
        t_end,
        seed,
    })
}

fn parse_detector(table: Option<toml::Table>) -> Result<DetectorSection, IoError> {
    let Some(mut table) = table else {
        return Ok(DetectorSection {
            window: WindowConfig::default(),
            seed: 0,
        });
    };
    let seed = match table.remove("seed") {
        None => 0,
        Some(toml::Value::Integer(s)) if s >= 0 => s as u64,
        Some(_) => return Err(IoError::validation("detector.seed", "must be a non-negative integer")),
    };
    let window: WindowConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| IoError::validation("detector", e.message().to_string()))?;
    Ok(DetectorSection { window, seed })
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_scenario(&text, &path.display().to_string())
}

/// Loads `arg` as a file path, then as a name in the scenario directory
/// named by [`SCENARIO_DIR_ENV`], then as a bundled scenario.
pub fn resolve_scenario(arg: &str) -> Result<ScenarioConfig, IoError> {
    let direct = Path::new(arg);
    if direct.is_file() {
        return load_scenario(direct);
    }
    if let Some(dir) = std::env::var_os(SCENARIO_DIR_ENV) {
        let dir = Path::new(&dir);
        for candidate in [dir.join(arg), dir.join(format!("{arg}.toml"))] {
            if candidate.is_file() {
                return load_scenario(&candidate);
            }
        }
    }
    match bundled_scenario(arg) {
        Some(text) => parse_scenario(text, arg),
        None => {
            let names: Vec<&str> = BUNDLED_SCENARIOS.iter().map(|(n, _)| *n).collect();
            Err(IoError::validation(
                "scenario",
                format!("`{arg}` is neither a file nor a known scenario ({})", names.join(", ")),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[network]
n_bus = 3
lines = [{ from = 0, to = 1, b = 2.0 }, { from = 1, to = 2, b = 1.5 }]
inertia = 0.1
damping = [0.1, 0.1, 0.2]
injection = [0.2, -0.1, -0.1]

[controller]
gain = 0.5

[[events]]
kind = "load_step"
bus = 2
t_start = 1.0
delta_p = -0.05

[[attacks]]
kind = "step"
targets = [1, 4]
t_start = 2.0
t_end = 3.0
magnitude = 0.1

[simulation]
t_end = 5.0
sample_rate = 30
seed = 3

[detector]
n = 40
n_tilde = 6
seed = 9
"#;

    #[test]
    fn parses_minimal() {
        let cfg = parse_scenario(MINIMAL, "inline").unwrap();
        assert_eq!(cfg.n_bus(), 3);
        assert_eq!(cfg.network.susceptance[1][2], 1.5);
        assert_eq!(cfg.network.inertia, vec![0.1; 3]);
        assert!(cfg.controller.enabled);
        assert_eq!(cfg.attacks[0].kind, AttackKind::Step { magnitude: 0.1 });
        assert_eq!(cfg.detector.window.n, 40);
        assert_eq!(cfg.detector.window.tau, WindowConfig::default().tau);
        assert_eq!(cfg.detector.seed, 9);
        assert!((cfg.simulation.dt - 1.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn hash_tracks_effective_config() {
        let cfg = parse_scenario(MINIMAL, "inline").unwrap();
        assert_eq!(cfg.config_hash(), parse_scenario(MINIMAL, "inline").unwrap().config_hash());
        assert_eq!(cfg.config_hash().len(), 64);
        let other = cfg.clone().with_overrides(&Overrides { tau: Some(4.0), ..Default::default() }).unwrap();
        assert_ne!(cfg.config_hash(), other.config_hash());
    }

    #[test]
    fn n_tilde_not_below_n_names_field() {
        let text = MINIMAL.replace("n_tilde = 6", "n_tilde = 40");
        match parse_scenario(&text, "inline") {
            Err(IoError::Validation { field, .. }) => assert_eq!(field, "detector.n_tilde"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_attack_kind_lists_valid_kinds() {
        let text = MINIMAL.replace("kind = \"step\"", "kind = \"teleport\"");
        let err = parse_scenario(&text, "inline").unwrap_err();
        let msg = err.to_string();
        assert!(err.is_validation());
        for k in ATTACK_KINDS {
            assert!(msg.contains(k), "{msg}");
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = MINIMAL.replace("n_bus = 3", "n_bus = = 3");
        match parse_scenario(&text, "inline") {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_target_is_rejected() {
        let text = MINIMAL.replace("targets = [1, 4]", "targets = [1, 6]");
        match parse_scenario(&text, "inline") {
            Err(IoError::Validation { field, .. }) => assert_eq!(field, "attacks[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("magnitude = 0.1", "magnitude = 0.1\nvolume = 3");
        assert!(parse_scenario(&text, "inline").is_err());
        let text = MINIMAL.replace("seed = 9", "seed = 9\nwindow = 3");
        assert!(parse_scenario(&text, "inline").is_err());
    }

    #[test]
    fn bundled_scenarios_load() {
        for (name, text) in BUNDLED_SCENARIOS {
            let cfg = parse_scenario(text, name).unwrap();
            assert_eq!(cfg.n_bus(), 10, "{name}");
            assert_eq!(cfg.n_channels(), 20);
        }
        assert!(bundled_scenario("ten_bus_multiplicative.toml").is_some());
    }
}
