use super::model::identity_class_likelihood;
use super::{discretize, BridgeAction, GroundTruthState, MODALITY_CLASS};
use crate::error::{Error, Result};
use crate::inference::{infer_state, InferenceOptions, ObservationBundle};
use crate::model::{Belief, GenerativeModel};
use crate::planning::{plan, PlannerConfig};
use crate::rng::SimRng;

/// Agent that mirrors the twin but observes the true class through a noiseless channel.
#[derive(Clone, Debug)]
pub struct ReferenceAgent {
    posterior: Option<Belief>,
    prev_action: Option<BridgeAction>,
    rng: SimRng,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceStep {
    pub action: BridgeAction,
    pub g: Vec<f64>,
    pub posterior: Belief,
}

impl ReferenceAgent {
    pub fn new(rng: SimRng) -> Self {
        Self {
            posterior: None,
            prev_action: None,
            rng,
        }
    }

    pub fn posterior(&self) -> Option<&Belief> {
        self.posterior.as_ref()
    }

    pub fn prev_action(&self) -> Option<BridgeAction> {
        self.prev_action
    }

    /// Assimilates the true class, plans with `planning_model` and commits the selected action.
    pub fn step(
        &mut self,
        truth: &GroundTruthState,
        planning_model: &GenerativeModel,
        planner: &PlannerConfig,
        actions: &[usize],
    ) -> Result<ReferenceStep> {
        let mut sensing = planning_model.clone();
        sensing.a[MODALITY_CLASS] = identity_class_likelihood();
        let prior = match (&self.posterior, self.prev_action) {
            (Some(q), Some(a)) => sensing.propagate(q, a.index())?,
            _ => sensing.initial_belief(),
        };
        let obs = ObservationBundle(vec![
            Some(discretize(truth)?),
            self.prev_action.map(BridgeAction::index),
        ]);
        let posterior = infer_state(&sensing, &prior, &obs, InferenceOptions::default())?.posterior;
        let result = plan(
            planning_model,
            &posterior,
            actions,
            planner,
            Some(&mut self.rng),
        )?;
        let action = BridgeAction::from_index(result.selected_action)?;
        self.posterior = Some(posterior.clone());
        self.prev_action = Some(action);
        Ok(ReferenceStep {
            action,
            g: result.g,
            posterior,
        })
    }
}

/// Percentage absolute discrepancy between summed policy scores: `|Σ(G - Ĝ) / Σ Ĝ| * 100`.
pub fn delta_g(g: &[f64], g_ref: &[f64]) -> Result<f64> {
    if g.len() != g_ref.len() {
        return Err(Error::LengthMismatch {
            expected: g_ref.len(),
            actual: g.len(),
        });
    }
    let total_ref: f64 = g_ref.iter().sum();
    if total_ref == 0.0 {
        return Err(Error::DegenerateReference);
    }
    let diff: f64 = g.iter().zip(g_ref).map(|(a, b)| a - b).sum();
    Ok((diff / total_ref).abs() * 100.0)
}
