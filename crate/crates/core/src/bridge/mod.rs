//! Railway-bridge active digital twin: the generative model, the hidden
//! degradation process, the synthetic sensing channel and the
//! ground-truth-informed reference agent.

mod model;
mod reference;
mod world;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planning::PlannerConfig;

pub use model::{
    build_bridge_model, build_twin, sensing_channels, synth_confusion_matrix, BridgeTwin,
    SensingChannels,
};
pub use reference::{delta_g, ReferenceAgent, ReferenceStep};
pub use world::{
    discretize, emit_observation, severity_index, step_ground_truth, GroundTruthState, WorldParams,
};

pub const N_REGIONS: usize = 6;
pub const N_SEVERITIES: usize = 6;
/// Undamaged class plus every (region, severity) pair.
pub const N_CLASSES: usize = N_REGIONS * N_SEVERITIES + 1;
pub const N_DELTA_STATES: usize = N_SEVERITIES + 1;
/// Inclusive interval edges of the stiffness-reduction grid, in percent.
pub const SEVERITY_EDGES: [f64; 7] = [30.0, 35.0, 45.0, 55.0, 65.0, 75.0, 80.0];
pub const FAILURE_THRESHOLD: f64 = 80.0;

pub const FACTOR_OMEGA: usize = 0;
pub const FACTOR_DELTA: usize = 1;
pub const FACTOR_EPI: usize = 2;
pub const MODALITY_CLASS: usize = 0;
pub const MODALITY_ACTION: usize = 1;
pub const EPI: usize = 0;
pub const NON_EPI: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BridgeAction {
    DN = 0,
    MA = 1,
    RO = 2,
    RE = 3,
}

impl BridgeAction {
    pub const ALL: [BridgeAction; 4] = [
        BridgeAction::DN,
        BridgeAction::MA,
        BridgeAction::RO,
        BridgeAction::RE,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or(Error::UnknownAction(i))
    }

    pub fn name(self) -> &'static str {
        match self {
            BridgeAction::DN => "DN",
            BridgeAction::MA => "MA",
            BridgeAction::RO => "RO",
            BridgeAction::RE => "RE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PragmaticOnly,
    Mixed,
    MixedLearning,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "pragmatic_only" | "pragmatic" => Some(Mode::PragmaticOnly),
            "mixed" => Some(Mode::Mixed),
            "mixed_learning" | "learning" => Some(Mode::MixedLearning),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::PragmaticOnly => "pragmatic_only",
            Mode::Mixed => "mixed",
            Mode::MixedLearning => "mixed_learning",
        }
    }

    pub fn learns(self) -> bool {
        self == Mode::MixedLearning
    }

    pub fn epistemic(self) -> bool {
        self != Mode::PragmaticOnly
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub horizon: usize,
    pub episode_length: usize,
    pub mode: Mode,
    pub eta_b: f64,
    pub confusion_accuracy: f64,
    pub seed: u64,
    /// Dirichlet pseudo-count scale of the learnable transition priors.
    pub b_concentration_scale: f64,
    /// Planner action set; `None` removes RE in pragmatic-only mode and keeps all four otherwise.
    pub actions: Option<Vec<BridgeAction>>,
    pub top_k: usize,
    pub full_g: bool,
    pub world: WorldParams,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            gamma: 16.0,
            horizon: 4,
            episode_length: 60,
            mode: Mode::Mixed,
            eta_b: 0.1,
            confusion_accuracy: 0.9139,
            seed: 0,
            b_concentration_scale: 1.0,
            actions: None,
            top_k: 8,
            full_g: false,
            world: WorldParams::default(),
        }
    }
}

impl BridgeConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.episode_length == 0 {
            return bad("episode length must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.eta_b) {
            return bad("eta_b must lie in [0, 1]");
        }
        if !(self.confusion_accuracy > 0.0 && self.confusion_accuracy <= 1.0) {
            return bad("confusion accuracy must lie in (0, 1]");
        }
        if !(self.b_concentration_scale > 0.0 && self.b_concentration_scale.is_finite()) {
            return bad("b_concentration_scale must be positive");
        }
        if matches!(&self.actions, Some(a) if a.is_empty()) {
            return bad("action set must not be empty");
        }
        self.world.validate()
    }

    /// Global action ids available to the planner.
    pub fn action_ids(&self) -> Vec<usize> {
        match &self.actions {
            Some(actions) => {
                let mut ids: Vec<usize> = actions.iter().map(|a| a.index()).collect();
                ids.sort_unstable();
                ids.dedup();
                ids
            }
            None if self.mode == Mode::PragmaticOnly => vec![0, 1, 2],
            None => vec![0, 1, 2, 3],
        }
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            gamma: self.gamma,
            horizon: self.horizon,
            epistemic: self.mode.epistemic(),
            ..PlannerConfig::default()
        }
    }
}

/// Class index for damage region `y` (1-based, 0 = undamaged) and severity interval `k`.
pub fn class_index(y: usize, severity: usize) -> usize {
    if y == 0 {
        0
    } else {
        1 + N_SEVERITIES * (y - 1) + severity
    }
}

/// `(region, severity)` of a damaged class; `None` for the undamaged class.
pub fn class_parts(class: usize) -> Option<(usize, usize)> {
    if class == 0 {
        None
    } else {
        Some(((class - 1) / N_SEVERITIES + 1, (class - 1) % N_SEVERITIES))
    }
}

/// Observation class implied by digital states `(Ω index, δ index)`.
pub fn class_of_states(omega: usize, delta: usize) -> usize {
    if delta == 0 {
        0
    } else {
        class_index(omega + 1, delta - 1)
    }
}

pub fn delta_labels() -> Vec<String> {
    let mut out = vec!["0".to_string()];
    for w in SEVERITY_EDGES.windows(2) {
        out.push(format!("{}_{}", w[0], w[1]));
    }
    out
}
