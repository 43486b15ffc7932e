//! Experiment configuration files (TOML) and their validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kcsm_core::constraints::ConstraintModel;
use kcsm_core::exact::DEFAULT_STATE_CAP;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("field `{field}`: {message}")]
    Field { field: &'static str, message: String },
    #[error("resource cap exceeded: {what} needs {needed}, cap {cap}")]
    Resource { what: String, needed: u128, cap: u128 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentKind {
    DScaling,
    Sandwich,
    EastRatio,
    AuxDynamics,
    GapTable,
    HittingTimes,
    AppendixFunctionals,
    ClusterMobility,
    AxiomChecks,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::DScaling,
        ExperimentKind::Sandwich,
        ExperimentKind::EastRatio,
        ExperimentKind::AuxDynamics,
        ExperimentKind::GapTable,
        ExperimentKind::HittingTimes,
        ExperimentKind::AppendixFunctionals,
        ExperimentKind::ClusterMobility,
        ExperimentKind::AxiomChecks,
    ];

    pub fn describe(self) -> &'static str {
        match self {
            ExperimentKind::DScaling => "tracer diffusion coefficient across q and its power-law exponent",
            ExperimentKind::Sandwich => "diffusion estimate against the spectral-gap lower bound and q² upper bound",
            ExperimentKind::EastRatio => "East diffusion estimates against exact spectral gaps",
            ExperimentKind::AuxDynamics => "swap dynamics: pathwise label bound, D̄ and the three-zeros lower bound",
            ExperimentKind::GapTable => "exact spectral gaps over lengths and q",
            ExperimentKind::HittingTimes => "East hitting time of site 1, Monte Carlo against the exact law",
            ExperimentKind::AppendixFunctionals => "jump and FA functionals of random and optimised cylinder functions",
            ExperimentKind::ClusterMobility => "diffusivity of an isolated block of zeros and its q-exponent",
            ExperimentKind::AxiomChecks => "constraint axioms by exhaustive enumeration",
        }
    }
}

/// A constraint model written as `fa1f`, `east` or `kzeros-K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelSpec(pub ConstraintModel);

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "fa1f" | "fa-1f" => Ok(ModelSpec(ConstraintModel::fa1f())),
            "east" => Ok(ModelSpec(ConstraintModel::East)),
            _ => t
                .strip_prefix("kzeros-")
                .and_then(|k| k.parse::<u32>().ok())
                .filter(|&k| k >= 1)
                .map(|k| ModelSpec(ConstraintModel::KZeros(k)))
                .ok_or_else(|| format!("unknown model `{s}`; expected fa1f, east or kzeros-K")),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            ConstraintModel::East => write!(f, "east"),
            ConstraintModel::KZeros(1) => write!(f, "fa1f"),
            ConstraintModel::KZeros(k) => write!(f, "kzeros-{k}"),
        }
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Thresholds checked after a run. Unset entries take per-kind defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Acceptance {
    pub exponent: Option<f64>,
    pub exponent_tol: Option<f64>,
    pub min_final_log_ratio: Option<f64>,
    pub sigmas: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelSpec,
    pub q_list: Vec<f64>,
    /// Lattice sides; for AuxDynamics, those of the direct comparison runs.
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: usize,
    /// Coarse-graining time; used as the sampling interval when set.
    #[serde(default)]
    pub tau: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub sample_dt: Option<f64>,
    /// Lattice lengths for exact computations and hitting times.
    #[serde(default)]
    pub lengths: Vec<usize>,
    /// Evaluation times for distribution functions.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Values of q for direct comparisons (auxiliary dynamics).
    #[serde(default)]
    pub compare_q: Vec<f64>,
    /// Tracer trajectories for the direct comparisons; defaults to `n_trajectories`.
    #[serde(default)]
    pub compare_trajectories: Option<usize>,
    /// Horizon of auxiliary paths or cluster runs when it differs from `horizon`.
    #[serde(default)]
    pub aux_horizon: Option<f64>,
    /// Fit window for MSD slopes as fractions of the post-burn-in span.
    #[serde(default)]
    pub lag_window: Option<[f64; 2]>,
    /// Write the event log of the first trajectory.
    #[serde(default)]
    pub event_log: bool,
    #[serde(default)]
    pub acceptance: Acceptance,
}

fn default_horizon() -> f64 {
    1.0
}

fn default_trajectories() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Range and shape checks on every field.
    pub fn check(&self) -> Result<(), ConfigError> {
        let field = |field, message: String| Err(ConfigError::Field { field, message });
        if self.q_list.is_empty() {
            return field("q_list", "must not be empty".into());
        }
        for (name, list) in [("q_list", &self.q_list), ("compare_q", &self.compare_q)] {
            if let Some(q) = list.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
                return field(name, format!("{q} is outside (0, 1)"));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return field("horizon", format!("{} must be positive", self.horizon));
        }
        for (name, v) in [("tau", self.tau), ("sample_dt", self.sample_dt), ("aux_horizon", self.aux_horizon)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return field(name, format!("{v} must be positive"));
                }
            }
        }
        if let Some([lo, hi]) = self.lag_window {
            if !(lo > 0.0 && lo < hi && hi <= 1.0) {
                return field("lag_window", format!("[{lo}, {hi}] must satisfy 0 < lo < hi ≤ 1"));
            }
        }
        if self.n_trajectories == 0 {
            return field("n_trajectories", "must be at least 1".into());
        }
        if self.dims.iter().any(|&n| n == 0) {
            return field("dims", "sides must be positive".into());
        }
        if self.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return field("times", "must be finite and non-negative".into());
        }
        let needs_dims = matches!(
            self.kind,
            ExperimentKind::DScaling | ExperimentKind::Sandwich | ExperimentKind::EastRatio | ExperimentKind::AxiomChecks
        );
        if needs_dims && self.dims.is_empty() {
            return field("dims", format!("required for {:?}", self.kind));
        }
        if matches!(self.kind, ExperimentKind::GapTable | ExperimentKind::HittingTimes) && self.lengths.is_empty() {
            return field("lengths", format!("required for {:?}", self.kind));
        }
        let one_d = matches!(
            self.kind,
            ExperimentKind::EastRatio
                | ExperimentKind::AuxDynamics
                | ExperimentKind::HittingTimes
                | ExperimentKind::AppendixFunctionals
                | ExperimentKind::ClusterMobility
        );
        if one_d && self.dims.len() > 1 {
            return field("dims", format!("{:?} is one-dimensional", self.kind));
        }
        if matches!(self.kind, ExperimentKind::EastRatio | ExperimentKind::HittingTimes)
            && self.model.0 != ConstraintModel::East
        {
            return field("model", format!("{:?} needs the East model", self.kind));
        }
        if matches!(self.kind, ExperimentKind::AppendixFunctionals) && self.model.0 != ConstraintModel::fa1f() {
            return field("model", "AppendixFunctionals needs fa1f".into());
        }
        if matches!(self.kind, ExperimentKind::DScaling | ExperimentKind::Sandwich | ExperimentKind::EastRatio) {
            self.model
                .0
                .validate_for(&self.dims, kcsm_core::lattice::Boundary::Periodic)
                .map_err(|e| ConfigError::Field {
                    field: "dims",
                    message: e.to_string(),
                })?;
        }
        Ok(())
    }

    pub fn sample_interval(&self) -> f64 {
        self.tau.or(self.sample_dt).unwrap_or(self.horizon / 1000.0)
    }

    pub fn sites(&self) -> usize {
        self.dims.iter().product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResourceEstimate {
    /// Largest exact state space to be enumerated.
    pub max_states: u128,
    /// Expected Monte Carlo events.
    pub events: f64,
    pub projected_seconds: f64,
}

/// Rough cost of one event and of one exact state, in seconds.
const SECONDS_PER_EVENT: f64 = 8e-8;
const SECONDS_PER_STATE: f64 = 2e-5;

/// Projected state-space sizes and Monte Carlo work, without running.
pub fn estimate_resources(cfg: &ExperimentConfig) -> Result<ResourceEstimate, ConfigError> {
    cfg.check()?;
    let nq = cfg.q_list.len() as f64;
    let traj = cfg.n_trajectories as f64;
    let sites = cfg.sites() as f64;
    let mut max_states: u128 = 0;
    let mut events = 0.0;
    match cfg.kind {
        ExperimentKind::DScaling | ExperimentKind::EastRatio => {
            events = nq * traj * cfg.horizon * (sites + 2.0);
            if cfg.kind == ExperimentKind::EastRatio {
                let l = cfg.q_list.iter().map(|q| (4.0 / q).ceil() as u32).max().unwrap_or(1);
                max_states = 1u128 << l;
            }
        }
        ExperimentKind::Sandwich => {
            events = nq * traj * cfg.horizon * (sites + 2.0);
            max_states = 1u128 << cfg.lengths.first().copied().unwrap_or(12);
        }
        ExperimentKind::GapTable => {
            let l = *cfg.lengths.iter().max().expect("checked");
            max_states = 1u128 << l.min(127);
        }
        ExperimentKind::HittingTimes => {
            let l = *cfg.lengths.iter().max().expect("checked");
            events = nq * traj * cfg.horizon * l as f64;
            if l <= 20 {
                max_states = 1u128 << (l - 1);
            }
        }
        ExperimentKind::AuxDynamics => {
            events = nq * traj * 2.0 * cfg.aux_horizon.unwrap_or(cfg.horizon);
            let ct = cfg.compare_trajectories.unwrap_or(cfg.n_trajectories) as f64;
            let ring = if cfg.dims.is_empty() { 256.0 } else { sites };
            events += cfg.compare_q.len() as f64 * ct * cfg.horizon * (ring + 2.0);
        }
        ExperimentKind::AppendixFunctionals => {
            max_states = 1 << 11;
            events = nq * traj * (1 << 11) as f64 * 9.0;
        }
        ExperimentKind::ClusterMobility => {
            events = nq * traj * cfg.aux_horizon.unwrap_or(cfg.horizon) * 0.5;
        }
        ExperimentKind::AxiomChecks => {
            max_states = 1u128 << cfg.sites().min(127);
        }
    }
    let cap = match cfg.kind {
        ExperimentKind::AxiomChecks => 1u128 << 20,
        _ => DEFAULT_STATE_CAP as u128,
    };
    if max_states > cap {
        return Err(ConfigError::Resource {
            what: format!("{:?} state space", cfg.kind),
            needed: max_states,
            cap,
        });
    }
    Ok(ResourceEstimate {
        max_states,
        events,
        projected_seconds: events * SECONDS_PER_EVENT + max_states as f64 * SECONDS_PER_STATE,
    })
}
