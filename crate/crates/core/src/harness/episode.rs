use serde::{Deserialize, Serialize};

use crate::bridge::{
    build_twin, delta_g, emit_observation, step_ground_truth, BridgeAction, BridgeConfig,
    GroundTruthState, ReferenceAgent, FACTOR_DELTA, FACTOR_OMEGA,
};
use crate::categorical::Categorical;
use crate::error::Result;
use crate::inference::{infer_state, InferenceOptions, ObservationBundle};
use crate::model::Belief;
use crate::planning::{plan, PlanResult};
use crate::rng::{streams, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    /// Ground truth exceeded the failure threshold after the action of step `at_step - 1`.
    Failed {
        at_step: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyScore {
    pub actions: Vec<BridgeAction>,
    pub g: f64,
    pub probability: f64,
    pub epistemic: f64,
    pub pragmatic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub truth: GroundTruthState,
    pub observation: ObservationBundle,
    pub posterior: Belief,
    pub vfe: f64,
    /// Lowest-G policies, best first.
    pub top_policies: Vec<PolicyScore>,
    pub full_g: Option<Vec<f64>>,
    /// Distribution over the four bridge actions at the first policy step.
    pub action_posterior: Categorical,
    pub action: BridgeAction,
    pub reference_action: BridgeAction,
    pub delta_g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinTrace {
    pub config: BridgeConfig,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
}

impl TwinTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn failed(&self) -> bool {
        matches!(self.outcome, Outcome::Failed { .. })
    }

    pub fn actions(&self) -> Vec<BridgeAction> {
        self.steps.iter().map(|s| s.action).collect()
    }

    pub fn reference_actions(&self) -> Vec<BridgeAction> {
        self.steps.iter().map(|s| s.reference_action).collect()
    }

    pub fn count(&self, action: BridgeAction) -> usize {
        self.steps.iter().filter(|s| s.action == action).count()
    }

    pub fn steps_with(&self, action: BridgeAction) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| s.action == action)
            .map(|s| s.step)
            .collect()
    }
}

fn top_policies(result: &PlanResult, k: usize) -> Result<Vec<PolicyScore>> {
    let mut order: Vec<usize> = (0..result.evaluations.len()).collect();
    order.sort_by(|&i, &j| result.g[i].total_cmp(&result.g[j]).then(i.cmp(&j)));
    order
        .into_iter()
        .take(k)
        .map(|i| {
            let e = &result.evaluations[i];
            Ok(PolicyScore {
                actions: e
                    .policy
                    .actions
                    .iter()
                    .map(|&a| BridgeAction::from_index(a))
                    .collect::<Result<_>>()?,
                g: e.g,
                probability: result.policy_posterior.probs()[i],
                epistemic: e.epistemic.iter().sum(),
                pragmatic: e.pragmatic.iter().sum(),
            })
        })
        .collect()
}

/// Runs one twin episode against the hidden world; fully determined by `cfg`.
pub fn run_episode(cfg: &BridgeConfig) -> Result<TwinTrace> {
    let root = SimRng::new(cfg.seed);
    let twin = build_twin(cfg, &root)?;
    let mut model = twin.model;
    let channels = twin.channels;
    let mut truth_rng = root.split(streams::GROUND_TRUTH);
    let mut sensing_rng = root.split(streams::SENSING);
    let mut agent_rng = root.split(streams::AGENT);
    let mut reference = ReferenceAgent::new(root.split(streams::REFERENCE));
    let planner = cfg.planner();
    let actions = cfg.action_ids();
    let opts = InferenceOptions::default();

    let mut truth = GroundTruthState::healthy();
    let mut previous: Option<(Belief, BridgeAction)> = None;
    let mut steps = Vec::with_capacity(cfg.episode_length);
    let mut outcome = Outcome::Completed;

    for t in 0..cfg.episode_length {
        let prev_action = previous.as_ref().map(|(_, a)| *a);
        let observation = emit_observation(&truth, prev_action, &channels, &mut sensing_rng)?;
        let prior = match &previous {
            Some((q, a)) => model.propagate(q, a.index())?,
            None => model.initial_belief(),
        };
        let inferred = infer_state(&model, &prior, &observation, opts)?;
        let posterior = inferred.posterior;
        let result = plan(&model, &posterior, &actions, &planner, Some(&mut agent_rng))?;
        let action = BridgeAction::from_index(result.selected_action)?;
        let reference_step = reference.step(&truth, &model, &planner, &actions)?;
        let dg = delta_g(&result.g, &reference_step.g)?;

        if cfg.mode.learns() {
            if let Some((q_prev, a_prev)) = &previous {
                for f in [FACTOR_OMEGA, FACTOR_DELTA] {
                    model.learn_transition(
                        f,
                        posterior.factor(f),
                        q_prev.factor(f),
                        a_prev.index(),
                        cfg.eta_b,
                    )?;
                }
            }
        }

        steps.push(StepRecord {
            step: t,
            truth,
            observation,
            posterior: posterior.clone(),
            vfe: inferred.vfe,
            top_policies: top_policies(&result, cfg.top_k)?,
            full_g: cfg.full_g.then(|| result.g.clone()),
            action_posterior: result.action_posterior[0].clone(),
            action,
            reference_action: reference_step.action,
            delta_g: dg,
        });

        truth = step_ground_truth(&truth, action, &cfg.world, &mut truth_rng);
        if truth.failed() {
            outcome = Outcome::Failed { at_step: t + 1 };
            break;
        }
        previous = Some((posterior, action));
    }

    Ok(TwinTrace {
        config: cfg.clone(),
        steps,
        outcome,
    })
}
