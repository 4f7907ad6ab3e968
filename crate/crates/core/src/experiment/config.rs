//! TOML experiment configuration and its validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::diagnostics::DiagnosticsConfig;
use crate::hhb::{HhbParams, NonconvexDemo, Objective, QuadraticSum};
use crate::linalg::BoxSet;
use crate::schedules::{ScheduleSpec, TwoTimescaleSchedule};
use crate::simulate::DEFAULT_MAX_CONSECUTIVE_JUMPS;

/// Names accepted by `system.name`.
pub const SYSTEMS: [&str; 3] = ["hhb", "hhb_tt", "linear_decay_demo"];
/// Names accepted by `objective.family`.
pub const OBJECTIVES: [&str; 2] = ["quadratic_sum", "nonconvex_demo"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemBlock,
    pub hhb: HhbBlock,
    pub objective: ObjectiveBlock,
    pub schedule: ScheduleBlock,
    pub run: RunBlock,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainBlock>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemBlock::default(),
            hhb: HhbBlock::default(),
            objective: ObjectiveBlock::default(),
            schedule: ScheduleBlock::default(),
            run: RunBlock::default(),
            diagnostics: DiagnosticsConfig::default(),
            output: OutputBlock::default(),
            chain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemBlock {
    pub name: String,
    /// State dimension of `linear_decay_demo`.
    pub dim: usize,
}

impl Default for SystemBlock {
    fn default() -> Self {
        Self {
            name: "hhb_tt".into(),
            dim: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HhbBlock {
    pub kappa: f64,
    #[serde(rename = "T")]
    pub timer: f64,
}

impl Default for HhbBlock {
    fn default() -> Self {
        let p = HhbParams::default();
        Self {
            kappa: p.kappa,
            timer: p.timer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveBlock {
    pub family: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub components: usize,
    pub seed: u64,
}

impl Default for ObjectiveBlock {
    fn default() -> Self {
        Self {
            family: "quadratic_sum".into(),
            n: 2,
            components: 10,
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleBlock {
    pub slow: ScheduleSpec,
    pub fast: ScheduleSpec,
}

impl Default for ScheduleBlock {
    fn default() -> Self {
        Self {
            slow: ScheduleSpec::PowerLaw {
                a: 1.0,
                b: 0.0,
                rho: 0.9,
            },
            fast: ScheduleSpec::PowerLaw {
                a: 1.0,
                b: 0.0,
                rho: 0.6,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    #[serde(rename = "K")]
    pub steps: usize,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub max_consecutive_jumps: usize,
    /// Sample the fast drift from the component oracle (`hhb_tt` only).
    pub stochastic: bool,
    /// Constant offset added to every sampled fast drift.
    pub bias: f64,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            steps: 200_000,
            seeds: (0..10).collect(),
            x0: None,
            max_consecutive_jumps: DEFAULT_MAX_CONSECUTIVE_JUMPS,
            stochastic: true,
            bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    /// Also write `convergence_seed{s}.csv` for the heavy-ball systems.
    pub convergence_csv: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("ttsa_out"),
            convergence_csv: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainBlock {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub tau: f64,
    pub epsilon: f64,
    pub budget: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub internal_box: Option<BoxSet>,
}

impl Default for ChainBlock {
    fn default() -> Self {
        Self {
            x: vec![1.0],
            y: vec![0.0],
            tau: 1.0,
            epsilon: 0.5,
            budget: 20,
            dt: None,
            internal_box: None,
        }
    }
}

/// A validation failure pinned to a dotted key.
struct Invalid {
    key: String,
    message: String,
}

fn invalid(key: &str, message: impl Into<String>) -> Invalid {
    Invalid {
        key: key.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Parse and validate TOML text; errors carry the line of the key.
    pub fn from_toml_str(src: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(src).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check().map_err(|e| {
            let line = key_line(src, &e.key).map_or_else(String::new, |l| format!("line {l}: "));
            CliError::Config(format!("{line}{}: {}", e.key, e.message))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&src).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.check()
            .map_err(|e| CliError::Config(format!("{}: {}", e.key, e.message)))
    }

    /// Validation of the `chain` block against the selected system.
    pub fn validate_chain(&self) -> Result<&ChainBlock, CliError> {
        let c = self
            .chain
            .as_ref()
            .ok_or_else(|| CliError::Config("chain: block missing".into()))?;
        let fail = |k: &str, m: &str| CliError::Config(format!("chain.{k}: {m}"));
        let dim = self.chain_dim();
        if c.x.len() != dim {
            return Err(fail("x", &format!("expected {dim} coordinates, got {}", c.x.len())));
        }
        if c.y.len() != dim {
            return Err(fail("y", &format!("expected {dim} coordinates, got {}", c.y.len())));
        }
        if !(c.tau > 0.0) {
            return Err(fail("tau", "must be positive"));
        }
        if !(c.epsilon > 0.0) {
            return Err(fail("epsilon", "must be positive"));
        }
        if c.budget == 0 {
            return Err(fail("budget", "must be at least 1"));
        }
        if c.dt.is_some_and(|d| !(d > 0.0)) {
            return Err(fail("dt", "must be positive"));
        }
        match &c.internal_box {
            Some(b) if b.dim() != dim || b.hi.len() != dim => return Err(fail("internal_box", "dimension mismatch")),
            Some(b) if !b.lo.iter().zip(&b.hi).all(|(l, h)| l <= h) => {
                return Err(fail("internal_box", "lower bound exceeds upper bound"))
            }
            None if self.system.name == "hhb_tt" => {
                return Err(fail("internal_box", "required for the reduced hhb_tt system"))
            }
            _ => {}
        }
        Ok(c)
    }

    fn check(&self) -> Result<(), Invalid> {
        if !SYSTEMS.contains(&self.system.name.as_str()) {
            return Err(invalid("system.name", format!("unknown system {:?}; expected one of {SYSTEMS:?}", self.system.name)));
        }
        if self.system.dim == 0 {
            return Err(invalid("system.dim", "must be at least 1"));
        }
        if !(self.hhb.kappa > 0.0 && self.hhb.kappa.is_finite()) {
            return Err(invalid("hhb.kappa", "must be positive"));
        }
        if !(self.hhb.timer > 0.0 && self.hhb.timer.is_finite()) {
            return Err(invalid("hhb.T", "must be positive"));
        }
        if !OBJECTIVES.contains(&self.objective.family.as_str()) {
            return Err(invalid(
                "objective.family",
                format!("unknown objective {:?}; expected one of {OBJECTIVES:?}", self.objective.family),
            ));
        }
        if self.objective.n == 0 {
            return Err(invalid("objective.n", "must be at least 1"));
        }
        if self.objective.components == 0 {
            return Err(invalid("objective.N", "must be at least 1"));
        }
        check_schedule("schedule.slow", &self.schedule.slow)?;
        check_schedule("schedule.fast", &self.schedule.fast)?;
        if self.run.steps == 0 {
            return Err(invalid("run.K", "must be at least 1"));
        }
        if self.run.seeds.is_empty() {
            return Err(invalid("run.seeds", "must be nonempty"));
        }
        if let Some(x0) = &self.run.x0 {
            if x0.len() != self.state_dim() {
                return Err(invalid("run.x0", format!("expected {} coordinates, got {}", self.state_dim(), x0.len())));
            }
            if !x0.iter().all(|v| v.is_finite()) {
                return Err(invalid("run.x0", "must be finite"));
            }
        }
        if self.run.max_consecutive_jumps == 0 {
            return Err(invalid("run.max_consecutive_jumps", "must be at least 1"));
        }
        if !self.run.bias.is_finite() {
            return Err(invalid("run.bias", "must be finite"));
        }
        let d = &self.diagnostics;
        if d.horizons.is_empty() || !d.horizons.iter().all(|t| *t > 0.0 && t.is_finite()) {
            return Err(invalid("diagnostics.horizons", "must be a nonempty list of positive numbers"));
        }
        if d.n_grid_size == 0 {
            return Err(invalid("diagnostics.n_grid_size", "must be at least 1"));
        }
        for (key, v) in [
            ("diagnostics.decay_factor", d.decay_factor),
            ("diagnostics.bl_decay_factor", d.bl_decay_factor),
            ("diagnostics.omega_tail_fraction", d.omega_tail_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(key, "must lie in (0, 1]"));
            }
        }
        for (key, v) in [
            ("diagnostics.abs_tol", d.abs_tol),
            ("diagnostics.tracking_tol", d.tracking_tol),
            ("diagnostics.omega_cluster_tol", d.omega_cluster_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(key, "must be nonnegative"));
            }
        }
        Ok(())
    }

    /// State dimension of the simulated system.
    pub fn state_dim(&self) -> usize {
        let n = self.objective.n;
        match self.system.name.as_str() {
            "hhb" => 2 * n + 1,
            "hhb_tt" => 3 * n + 1,
            _ => self.system.dim,
        }
    }

    /// Dimension of chain endpoints: the reduced system drops the fast block.
    pub fn chain_dim(&self) -> usize {
        match self.system.name.as_str() {
            "hhb_tt" => 2 * self.objective.n + 1,
            _ => self.state_dim(),
        }
    }

    pub fn hhb_params(&self) -> crate::Result<HhbParams> {
        HhbParams::new(self.hhb.kappa, self.hhb.timer)
    }

    pub fn objective(&self) -> crate::Result<Objective> {
        let o = &self.objective;
        Ok(match o.family.as_str() {
            "nonconvex_demo" => Objective::NonconvexDemo(NonconvexDemo::random(o.n, o.components, o.seed)?),
            _ => Objective::QuadraticSum(QuadraticSum::random(o.n, o.components, o.seed)?),
        })
    }

    /// Single-timescale systems run on `schedule.slow` alone.
    pub fn schedules(&self) -> crate::Result<TwoTimescaleSchedule> {
        let slow = self.schedule.slow.build()?;
        Ok(match self.system.name.as_str() {
            "hhb_tt" => TwoTimescaleSchedule::new(slow, self.schedule.fast.build()?),
            _ => TwoTimescaleSchedule::single(slow),
        })
    }
}

fn check_schedule(key: &str, spec: &ScheduleSpec) -> Result<(), Invalid> {
    match spec {
        ScheduleSpec::PowerLaw { a, b, rho } => {
            if !(*a > 0.0 && a.is_finite()) {
                return Err(invalid(&format!("{key}.a"), "must be positive"));
            }
            if !(*b >= 0.0 && b.is_finite()) {
                return Err(invalid(&format!("{key}.b"), "must be nonnegative"));
            }
            if !(*rho > 0.0 && rho.is_finite()) {
                return Err(invalid(&format!("{key}.rho"), format!("must be positive, got {rho}")));
            }
        }
        ScheduleSpec::Explicit { values } => {
            if values.is_empty() {
                return Err(invalid(&format!("{key}.values"), "must be nonempty"));
            }
            if let Some(i) = values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(invalid(&format!("{key}.values"), format!("entry {i} must be positive")));
            }
        }
    }
    Ok(())
}

/// 1-based line of a dotted key in TOML text, matching `[table]` headers
/// for the prefix and `leaf = ...` for the last segment.
fn key_line(src: &str, key: &str) -> Option<usize> {
    let (table, leaf) = key.rsplit_once('.').unwrap_or(("", key));
    let mut current = String::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            if current == key {
                return Some(i + 1);
            }
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else {
            continue;
        };
        let lhs = lhs.trim().trim_matches('"');
        let full = if current.is_empty() {
            lhs.to_string()
        } else {
            format!("{current}.{lhs}")
        };
        if full == key || (current == table && lhs == leaf) {
            return Some(i + 1);
        }
    }
    None
}
