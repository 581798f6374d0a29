//! Expected-free-energy planning over enumerated policies.
//!
//! A policy is scored over its `H` post-action steps:
//! `G = Σ_t (-epistemic_t - pragmatic_t - novelty_t)`, where the epistemic term is
//! the per-modality state/outcome mutual information and the pragmatic term is the
//! expected log preference under `softmax(c^m)`.

use serde::{Deserialize, Serialize};

use crate::categorical::{
    argmax, entropy_of, log_softmax, sample, softmax, softmax_log_weights, xlogx, Categorical,
};
use crate::error::{Error, Result};
use crate::model::{Belief, GenerativeModel};
use crate::rng::SimRng;

pub const DEFAULT_POLICY_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy {
    pub actions: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSelection {
    Argmax,
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub gamma: f64,
    pub horizon: usize,
    pub epistemic: bool,
    pub novelty: bool,
    pub selection: ActionSelection,
    pub policy_cap: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            gamma: 16.0,
            horizon: 4,
            epistemic: true,
            novelty: false,
            selection: ActionSelection::Argmax,
            policy_cap: DEFAULT_POLICY_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub policy: Policy,
    pub state_pred: Vec<Belief>,
    pub obs_pred: Vec<Vec<Categorical>>,
    pub epistemic: Vec<f64>,
    pub pragmatic: Vec<f64>,
    pub param_novelty: Vec<f64>,
    pub g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub evaluations: Vec<PolicyEvaluation>,
    pub policy_posterior: Categorical,
    /// Per step, a distribution over the model's global actions.
    pub action_posterior: Vec<Categorical>,
    pub selected_action: usize,
    pub g: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub states: Vec<Belief>,
    pub actions: Vec<Categorical>,
}

/// All `|actions|^horizon` sequences in lexicographic order of `actions`.
pub fn enumerate_policies(actions: &[usize], horizon: usize, cap: usize) -> Result<Vec<Policy>> {
    if actions.is_empty() {
        return Err(Error::InvalidConfig("empty action set".to_string()));
    }
    if horizon == 0 {
        return Err(Error::InvalidConfig(
            "horizon must be at least 1".to_string(),
        ));
    }
    let count = policy_count(actions.len(), horizon);
    if count > cap as u128 {
        return Err(Error::HorizonOverflow { count, cap });
    }
    let n = count as usize;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut digits = vec![0; horizon];
        let mut rem = k;
        for slot in digits.iter_mut().rev() {
            *slot = actions[rem % actions.len()];
            rem /= actions.len();
        }
        out.push(Policy { actions: digits });
    }
    Ok(out)
}

fn policy_count(n: usize, horizon: usize) -> u128 {
    let mut count: u128 = 1;
    for _ in 0..horizon {
        count = count.saturating_mul(n as u128);
    }
    count
}

/// Quantities derived once per model and reused across every rollout step.
pub struct PlanningContext<'a> {
    model: &'a GenerativeModel,
    log_pref: Vec<Vec<f64>>,
    column_entropy: Vec<Vec<f64>>,
    novelty_weights: Vec<Option<Vec<f64>>>,
}

impl<'a> PlanningContext<'a> {
    pub fn new(model: &'a GenerativeModel) -> Self {
        let n = model.joint_size();
        let log_pref = model.c.iter().map(|c| log_softmax(c)).collect();
        let column_entropy = model
            .a
            .iter()
            .map(|a| {
                let data = a.as_slice();
                let rows = data.len() / n;
                (0..n)
                    .map(|j| -(0..rows).map(|o| xlogx(data[o * n + j])).sum::<f64>())
                    .collect()
            })
            .collect();
        let novelty_weights = model
            .dirichlet_a
            .iter()
            .map(|conc| {
                conc.as_ref().map(|conc| {
                    let std = conc.array().as_standard_layout();
                    let data = std.as_slice().expect("standard layout");
                    let rows = data.len() / n;
                    let totals: Vec<f64> = (0..n)
                        .map(|j| (0..rows).map(|o| data[o * n + j]).sum())
                        .collect();
                    (0..rows * n)
                        .map(|k| 0.5 * (1.0 / data[k] - 1.0 / totals[k % n]))
                        .collect()
                })
            })
            .collect();
        Self {
            model,
            log_pref,
            column_entropy,
            novelty_weights,
        }
    }

    pub fn model(&self) -> &GenerativeModel {
        self.model
    }

    fn epistemic_from_joint(&self, joint: &[f64], obs_pred: &[Categorical]) -> f64 {
        obs_pred
            .iter()
            .zip(&self.column_entropy)
            .map(|(q, h)| q.entropy() - joint.iter().zip(h).map(|(p, h)| p * h).sum::<f64>())
            .sum()
    }

    fn novelty_from_joint(&self, joint: &[f64], obs_pred: &[Categorical]) -> f64 {
        let n = joint.len();
        obs_pred
            .iter()
            .zip(&self.novelty_weights)
            .filter_map(|(q, w)| w.as_ref().map(|w| (q, w)))
            .map(|(q, w)| {
                q.probs()
                    .iter()
                    .enumerate()
                    .map(|(o, &qo)| {
                        qo * w[o * n..(o + 1) * n]
                            .iter()
                            .zip(joint)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn pragmatic_value(&self, obs_pred: &[Categorical]) -> f64 {
        obs_pred
            .iter()
            .zip(&self.log_pref)
            .map(|(q, lp)| q.probs().iter().zip(lp).map(|(p, l)| p * l).sum::<f64>())
            .sum()
    }

    pub fn epistemic_value(&self, predicted: &Belief, obs_pred: &[Categorical]) -> f64 {
        self.epistemic_from_joint(&predicted.joint(), obs_pred)
    }

    pub fn param_novelty(&self, predicted: &Belief, obs_pred: &[Categorical]) -> f64 {
        self.novelty_from_joint(&predicted.joint(), obs_pred)
    }

    fn step(&self, state: Belief, cfg: &PlannerConfig) -> StepEval {
        let joint = state.joint();
        let obs: Vec<Categorical> = (0..self.model.n_modalities())
            .map(|m| Categorical::from_vec_unchecked(self.model.predict_from_joint(m, &joint)))
            .collect();
        let epistemic = if cfg.epistemic {
            self.epistemic_from_joint(&joint, &obs)
        } else {
            0.0
        };
        let novelty = if cfg.novelty {
            self.novelty_from_joint(&joint, &obs)
        } else {
            0.0
        };
        let pragmatic = self.pragmatic_value(&obs);
        StepEval {
            state,
            obs,
            epistemic,
            pragmatic,
            novelty,
        }
    }
}

#[derive(Clone)]
struct StepEval {
    state: Belief,
    obs: Vec<Categorical>,
    epistemic: f64,
    pragmatic: f64,
    novelty: f64,
}

fn assemble(policy: Policy, steps: &[StepEval]) -> PolicyEvaluation {
    let g = steps
        .iter()
        .map(|s| -s.epistemic - s.pragmatic - s.novelty)
        .sum();
    PolicyEvaluation {
        policy,
        state_pred: steps.iter().map(|s| s.state.clone()).collect(),
        obs_pred: steps.iter().map(|s| s.obs.clone()).collect(),
        epistemic: steps.iter().map(|s| s.epistemic).collect(),
        pragmatic: steps.iter().map(|s| s.pragmatic).collect(),
        param_novelty: steps.iter().map(|s| s.novelty).collect(),
        g,
    }
}

/// Per-step predicted states and observation densities.
pub fn rollout(
    model: &GenerativeModel,
    posterior: &Belief,
    policy: &Policy,
) -> Result<Vec<(Belief, Vec<Categorical>)>> {
    let mut out = Vec::with_capacity(policy.actions.len());
    let mut state = posterior.clone();
    for &u in &policy.actions {
        state = model.propagate(&state, u)?;
        let obs = (0..model.n_modalities())
            .map(|m| model.predict_observation(&state, m))
            .collect::<Result<Vec<_>>>()?;
        out.push((state.clone(), obs));
    }
    Ok(out)
}

pub fn epistemic_value(
    model: &GenerativeModel,
    predicted: &Belief,
    obs_pred: &[Categorical],
) -> f64 {
    PlanningContext::new(model).epistemic_value(predicted, obs_pred)
}

pub fn pragmatic_value(model: &GenerativeModel, obs_pred: &[Categorical]) -> f64 {
    PlanningContext::new(model).pragmatic_value(obs_pred)
}

pub fn param_novelty(model: &GenerativeModel, predicted: &Belief, obs_pred: &[Categorical]) -> f64 {
    PlanningContext::new(model).param_novelty(predicted, obs_pred)
}

/// Scores each policy independently, in the given order.
pub fn score_policies(
    ctx: &PlanningContext,
    posterior: &Belief,
    policies: &[Policy],
    cfg: &PlannerConfig,
) -> Result<Vec<PolicyEvaluation>> {
    let model = ctx.model();
    policies
        .iter()
        .map(|policy| {
            let mut state = posterior.clone();
            let mut steps = Vec::with_capacity(policy.actions.len());
            for &u in &policy.actions {
                state = model.propagate(&state, u)?;
                steps.push(ctx.step(state.clone(), cfg));
            }
            Ok(assemble(policy.clone(), &steps))
        })
        .collect()
}

/// Same result as `score_policies(enumerate_policies(..))`, sharing work between
/// policies with a common prefix.
pub fn score_policy_tree(
    ctx: &PlanningContext,
    posterior: &Belief,
    actions: &[usize],
    cfg: &PlannerConfig,
) -> Result<Vec<PolicyEvaluation>> {
    let count = policy_count(actions.len(), cfg.horizon);
    if count > cfg.policy_cap as u128 {
        return Err(Error::HorizonOverflow {
            count,
            cap: cfg.policy_cap,
        });
    }
    if actions.is_empty() || cfg.horizon == 0 {
        return enumerate_policies(actions, cfg.horizon, cfg.policy_cap).map(|_| Vec::new());
    }
    for &u in actions {
        if u >= ctx.model().n_actions() {
            return Err(Error::UnknownAction(u));
        }
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut prefix = Vec::with_capacity(cfg.horizon);
    let mut steps = Vec::with_capacity(cfg.horizon);
    expand(
        ctx,
        posterior,
        actions,
        cfg,
        &mut prefix,
        &mut steps,
        &mut out,
    )?;
    Ok(out)
}

fn expand(
    ctx: &PlanningContext,
    state: &Belief,
    actions: &[usize],
    cfg: &PlannerConfig,
    prefix: &mut Vec<usize>,
    steps: &mut Vec<StepEval>,
    out: &mut Vec<PolicyEvaluation>,
) -> Result<()> {
    for &u in actions {
        let next = ctx.model().propagate(state, u)?;
        prefix.push(u);
        steps.push(ctx.step(next, cfg));
        if prefix.len() == cfg.horizon {
            out.push(assemble(
                Policy {
                    actions: prefix.clone(),
                },
                steps,
            ));
        } else {
            let last = steps.last().expect("just pushed").state.clone();
            expand(ctx, &last, actions, cfg, prefix, steps, out)?;
        }
        prefix.pop();
        steps.pop();
    }
    Ok(())
}

/// `softmax(ln habit - gamma * G - F_pi)`; `None` means uniform habits and zero `F_pi`.
pub fn policy_posterior(
    g: &[f64],
    habit: Option<&Categorical>,
    f_pi: Option<&[f64]>,
    gamma: f64,
) -> Result<Categorical> {
    if let Some(h) = habit {
        if h.len() != g.len() {
            return Err(Error::LengthMismatch {
                expected: g.len(),
                actual: h.len(),
            });
        }
    }
    if let Some(f) = f_pi {
        if f.len() != g.len() {
            return Err(Error::LengthMismatch {
                expected: g.len(),
                actual: f.len(),
            });
        }
    }
    if habit.is_none() && f_pi.is_none() {
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        return softmax(&neg, gamma);
    }
    if let Some(index) = g.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput { index });
    }
    let log_w: Vec<f64> = (0..g.len())
        .map(|k| {
            let lh = habit.map_or(0.0, |h| {
                let p = h.probs()[k];
                if p > 0.0 {
                    p.ln()
                } else {
                    f64::NEG_INFINITY
                }
            });
            lh - gamma * g[k] - f_pi.map_or(0.0, |f| f[k])
        })
        .collect();
    Ok(softmax_log_weights(&log_w))
}

/// Marginal over global actions at `step`: mass of `u` summed over policies taking `u` there.
pub fn action_posterior(
    policy_posterior: &Categorical,
    policies: &[&Policy],
    step: usize,
    n_actions: usize,
) -> Result<Categorical> {
    if policies.len() != policy_posterior.len() {
        return Err(Error::LengthMismatch {
            expected: policy_posterior.len(),
            actual: policies.len(),
        });
    }
    let mut mass = vec![0.0; n_actions];
    for (p, policy) in policy_posterior.probs().iter().zip(policies) {
        let u = *policy.actions.get(step).ok_or(Error::LengthMismatch {
            expected: step + 1,
            actual: policy.actions.len(),
        })?;
        if u >= n_actions {
            return Err(Error::UnknownAction(u));
        }
        mass[u] += p;
    }
    Ok(Categorical::from_vec_unchecked(mass))
}

/// Pushes a distribution over global actions onto one factor's control indices.
pub fn control_posterior(
    model: &GenerativeModel,
    actions: &Categorical,
    factor: usize,
) -> Categorical {
    let mut mass = vec![0.0; model.factors[factor].control_cardinality];
    for (a, &p) in actions.probs().iter().enumerate() {
        mass[model.control_map[a][factor]] += p;
    }
    Categorical::from_vec_unchecked(mass)
}

pub fn select_action(
    posterior: &Categorical,
    selection: ActionSelection,
    rng: Option<&mut SimRng>,
) -> Result<usize> {
    match selection {
        ActionSelection::Argmax => Ok(argmax(posterior.probs())),
        ActionSelection::Sample => rng
            .map(|r| sample(posterior, r))
            .ok_or_else(|| Error::InvalidConfig("sample mode needs an rng".to_string())),
    }
}

pub fn predictive_summary(
    evaluations: &[PolicyEvaluation],
    policy_posterior: &Categorical,
    n_actions: usize,
) -> Result<PredictiveSummary> {
    if evaluations.len() != policy_posterior.len() {
        return Err(Error::LengthMismatch {
            expected: policy_posterior.len(),
            actual: evaluations.len(),
        });
    }
    let Some(first) = evaluations.first() else {
        return Err(Error::EmptyInput);
    };
    let horizon = first.state_pred.len();
    let mut states: Vec<Vec<Vec<f64>>> = first
        .state_pred
        .iter()
        .map(|b| b.factors.iter().map(|q| vec![0.0; q.len()]).collect())
        .collect();
    for (e, &w) in evaluations.iter().zip(policy_posterior.probs()) {
        for (acc, b) in states.iter_mut().zip(&e.state_pred) {
            for (af, q) in acc.iter_mut().zip(&b.factors) {
                for (x, p) in af.iter_mut().zip(q.probs()) {
                    *x += w * p;
                }
            }
        }
    }
    let policies: Vec<&Policy> = evaluations.iter().map(|e| &e.policy).collect();
    let actions = (0..horizon)
        .map(|t| action_posterior(policy_posterior, &policies, t, n_actions))
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictiveSummary {
        states: states
            .into_iter()
            .map(|fs| {
                Belief::new(
                    fs.into_iter()
                        .map(Categorical::from_vec_unchecked)
                        .collect(),
                )
            })
            .collect(),
        actions,
    })
}

/// Full planning step: score every policy over `actions`, form the posteriors and pick an action.
pub fn plan(
    model: &GenerativeModel,
    posterior: &Belief,
    actions: &[usize],
    cfg: &PlannerConfig,
    rng: Option<&mut SimRng>,
) -> Result<PlanResult> {
    let ctx = PlanningContext::new(model);
    let evaluations = score_policy_tree(&ctx, posterior, actions, cfg)?;
    let g: Vec<f64> = evaluations.iter().map(|e| e.g).collect();
    let q_pi = policy_posterior(&g, None, None, cfg.gamma)?;
    let policies: Vec<&Policy> = evaluations.iter().map(|e| &e.policy).collect();
    let action_post = (0..cfg.horizon)
        .map(|t| action_posterior(&q_pi, &policies, t, model.n_actions()))
        .collect::<Result<Vec<_>>>()?;
    let selected_action = select_action(&action_post[0], cfg.selection, rng)?;
    Ok(PlanResult {
        evaluations,
        policy_posterior: q_pi,
        action_posterior: action_post,
        selected_action,
        g,
    })
}

/// Entropy of the mean-field joint; the epistemic ceiling of a noiseless channel.
pub fn joint_entropy(belief: &Belief) -> f64 {
    entropy_of(&belief.joint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::categorical::{normalize, Cpt};
    use crate::model::testing::{random_belief, random_model};
    use ndarray::{ArrayD, IxDyn};

    #[test]
    fn enumeration_counts_and_order() {
        assert_eq!(
            enumerate_policies(&[0, 1, 2, 3], 4, DEFAULT_POLICY_CAP)
                .unwrap()
                .len(),
            256
        );
        assert_eq!(
            enumerate_policies(&[0], 3, DEFAULT_POLICY_CAP)
                .unwrap()
                .len(),
            1
        );
        let p = enumerate_policies(&[0, 1], 2, DEFAULT_POLICY_CAP).unwrap();
        let seqs: Vec<Vec<usize>> = p.into_iter().map(|p| p.actions).collect();
        assert_eq!(seqs, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert!(matches!(
            enumerate_policies(&[0, 1, 2, 3], 11, DEFAULT_POLICY_CAP),
            Err(Error::HorizonOverflow {
                count: 4_194_304,
                ..
            })
        ));
    }

    #[test]
    fn geometric_chain_rollout() {
        let mut rng = SimRng::new(0);
        let mut model = random_model(&[2], &[2], 1, &mut rng);
        let b = ArrayD::from_shape_vec(IxDyn(&[2, 2, 1]), vec![0.9, 0.0, 0.1, 1.0]).unwrap();
        model.b[0] = Cpt::new(b).unwrap();
        let start = Belief::new(vec![Categorical::dirac(2, 0)]);
        let steps = rollout(
            &model,
            &start,
            &Policy {
                actions: vec![0; 6],
            },
        )
        .unwrap();
        for (k, (s, _)) in steps.iter().enumerate() {
            let expect = 1.0 - 0.9f64.powi(k as i32 + 1);
            assert!((s.factors[0].probs()[1] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_channel_has_no_epistemic_value() {
        let mut rng = SimRng::new(1);
        let mut model = random_model(&[3, 2], &[4], 1, &mut rng);
        model.a[0] = normalize(ArrayD::from_elem(IxDyn(&[4, 3, 2]), 1.0)).unwrap();
        let q = random_belief(&[3, 2], &mut rng);
        let obs = vec![model.predict_observation(&q, 0).unwrap()];
        assert!(epistemic_value(&model, &q, &obs).abs() < 1e-12);
    }

    #[test]
    fn injective_channel_recovers_joint_entropy() {
        let mut rng = SimRng::new(2);
        let mut model = random_model(&[3, 2], &[6], 1, &mut rng);
        let mut a = ArrayD::zeros(IxDyn(&[6, 3, 2]));
        for i in 0..3 {
            for j in 0..2 {
                a[IxDyn(&[i * 2 + j, i, j])] = 1.0;
            }
        }
        model.a[0] = Cpt::new(a).unwrap();
        let q = random_belief(&[3, 2], &mut rng);
        let obs = vec![model.predict_observation(&q, 0).unwrap()];
        assert!((epistemic_value(&model, &q, &obs) - joint_entropy(&q)).abs() < 1e-12);
    }

    #[test]
    fn pragmatic_identities() {
        let mut rng = SimRng::new(3);
        let mut model = random_model(&[2], &[2], 1, &mut rng);
        model.c[0] = vec![0.0, 0.0];
        let u = vec![Categorical::uniform(2)];
        assert!((pragmatic_value(&model, &u) - 0.5f64.ln()).abs() < 1e-15);
        model.c[0] = vec![1.3, -0.4];
        let pref = softmax(&model.c[0], 1.0).unwrap();
        let v = pragmatic_value(&model, std::slice::from_ref(&pref));
        assert!((v + pref.entropy()).abs() < 1e-12);
    }

    #[test]
    fn tree_matches_independent_scoring() {
        let mut rng = SimRng::new(4);
        let model = random_model(&[3, 2], &[4, 3], 3, &mut rng);
        let q = random_belief(&[3, 2], &mut rng);
        let cfg = PlannerConfig {
            horizon: 3,
            novelty: true,
            ..PlannerConfig::default()
        };
        let ctx = PlanningContext::new(&model);
        let policies = enumerate_policies(&[0, 1, 2], 3, cfg.policy_cap).unwrap();
        let a = score_policies(&ctx, &q, &policies, &cfg).unwrap();
        let b = score_policy_tree(&ctx, &q, &[0, 1, 2], &cfg).unwrap();
        assert_eq!(a, b);
        for e in &a {
            let total: f64 = (0..3)
                .map(|t| -e.epistemic[t] - e.pragmatic[t] - e.param_novelty[t])
                .sum();
            assert_eq!(total, e.g);
            assert!(e.epistemic.iter().all(|&x| x >= -1e-10));
        }
    }

    #[test]
    fn horizon_one_single_policy() {
        let mut rng = SimRng::new(5);
        let model = random_model(&[3], &[4], 1, &mut rng);
        let q = random_belief(&[3], &mut rng);
        let cfg = PlannerConfig {
            horizon: 1,
            ..PlannerConfig::default()
        };
        let r = plan(&model, &q, &[0], &cfg, None).unwrap();
        let e = &r.evaluations[0];
        assert_eq!(r.g.len(), 1);
        assert_eq!(e.g, -e.epistemic[0] - e.pragmatic[0]);
        assert_eq!(r.policy_posterior.probs(), &[1.0]);
    }

    #[test]
    fn pragmatic_only_zeroes_epistemic() {
        let mut rng = SimRng::new(6);
        let model = random_model(&[3, 2], &[4], 2, &mut rng);
        let q = random_belief(&[3, 2], &mut rng);
        let cfg = PlannerConfig {
            epistemic: false,
            horizon: 2,
            ..PlannerConfig::default()
        };
        let r = plan(&model, &q, &[0, 1], &cfg, None).unwrap();
        assert!(r
            .evaluations
            .iter()
            .all(|e| e.epistemic.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn policy_posterior_examples() {
        let flat = policy_posterior(&[2.0; 5], None, None, 16.0).unwrap();
        assert!(flat.probs().iter().all(|&p| (p - 0.2).abs() < 1e-15));
        let two = policy_posterior(&[0.0, 1.0], None, None, 16.0).unwrap();
        let expect = 1.0 / (1.0 + (-16f64).exp());
        assert!((two.probs()[0] - expect).abs() < 1e-15);
        assert!(two.probs()[0] > 1.0 - 1.2e-7);
        let habit = Categorical::dirac(3, 1);
        let h = policy_posterior(&[0.0, 5.0, -2.0], Some(&habit), None, 16.0).unwrap();
        assert_eq!(h.probs(), &[0.0, 1.0, 0.0]);
        assert!(matches!(
            policy_posterior(&[0.0, 1.0], Some(&habit), None, 16.0),
            Err(Error::LengthMismatch { .. })
        ));
        let uh = Categorical::uniform(2);
        let with = policy_posterior(&[0.3, 1.0], Some(&uh), Some(&[0.0, 0.0]), 16.0).unwrap();
        let without = policy_posterior(&[0.3, 1.0], None, None, 16.0).unwrap();
        assert!(with
            .probs()
            .iter()
            .zip(without.probs())
            .all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn action_marginals() {
        let p0 = Policy {
            actions: vec![0, 1],
        };
        let p1 = Policy {
            actions: vec![3, 0],
        };
        let q = Categorical::new(vec![0.7, 0.3]).unwrap();
        let a = action_posterior(&q, &[&p0, &p1], 0, 4).unwrap();
        assert_eq!(a.probs(), &[0.7, 0.0, 0.0, 0.3]);
        let policies = enumerate_policies(&[0, 1, 2, 3], 4, DEFAULT_POLICY_CAP).unwrap();
        let refs: Vec<&Policy> = policies.iter().collect();
        let u = Categorical::uniform(256);
        for t in 0..4 {
            let a = action_posterior(&u, &refs, t, 4).unwrap();
            assert!(a.probs().iter().all(|&p| (p - 0.25).abs() < 1e-12));
        }
        let d = action_posterior(&Categorical::dirac(256, 27), &refs, 2, 4).unwrap();
        assert_eq!(d.probs()[policies[27].actions[2]], 1.0);
    }

    #[test]
    fn selection_contract() {
        let q = Categorical::new(vec![0.1, 0.2, 0.6, 0.1]).unwrap();
        assert_eq!(select_action(&q, ActionSelection::Argmax, None).unwrap(), 2);
        let tie = Categorical::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(
            select_action(&tie, ActionSelection::Argmax, None).unwrap(),
            0
        );
        for seed in 0..20 {
            let mut rng = SimRng::new(seed);
            let d = Categorical::dirac(4, 3);
            assert_eq!(
                select_action(&d, ActionSelection::Sample, Some(&mut rng)).unwrap(),
                3
            );
        }
    }

    #[test]
    fn preference_shift_leaves_posterior_unchanged() {
        let mut rng = SimRng::new(7);
        let model = random_model(&[3, 2], &[4, 2], 2, &mut rng);
        let mut shifted = model.clone();
        shifted.c[0].iter_mut().for_each(|x| *x += 3.25);
        let q = random_belief(&[3, 2], &mut rng);
        let cfg = PlannerConfig {
            horizon: 3,
            ..PlannerConfig::default()
        };
        let a = plan(&model, &q, &[0, 1], &cfg, None).unwrap();
        let b = plan(&shifted, &q, &[0, 1], &cfg, None).unwrap();
        for (x, y) in a
            .policy_posterior
            .probs()
            .iter()
            .zip(b.policy_posterior.probs())
        {
            assert!((x - y).abs() < 1e-10);
        }
        assert_eq!(a.selected_action, b.selected_action);
    }

    #[test]
    fn novelty_shrinks_with_counts() {
        let mut rng = SimRng::new(8);
        let model = random_model(&[3, 2], &[4], 1, &mut rng);
        let q = random_belief(&[3, 2], &mut rng);
        let obs = vec![model.predict_observation(&q, 0).unwrap()];
        let base = param_novelty(&model, &q, &obs);
        let mut scaled = model.clone();
        scaled.dirichlet_a[0] =
            Some(crate::categorical::DirichletParams::from_cpt(&model.a[0], 10.0).unwrap());
        assert!(param_novelty(&scaled, &q, &obs) < base);
        assert!(base > 0.0);
    }

    #[test]
    fn summary_mixes_rollouts() {
        let mut rng = SimRng::new(9);
        let mut model = random_model(&[2], &[2], 2, &mut rng);
        let b = ArrayD::from_shape_vec(
            IxDyn(&[2, 2, 2]),
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
        )
        .unwrap();
        model.b[0] = Cpt::new(b).unwrap();
        let ctx = PlanningContext::new(&model);
        let cfg = PlannerConfig {
            horizon: 1,
            ..PlannerConfig::default()
        };
        let q = Belief::new(vec![Categorical::uniform(2)]);
        let evals = score_policy_tree(&ctx, &q, &[0, 1], &cfg).unwrap();
        let s = predictive_summary(&evals, &Categorical::uniform(2), 2).unwrap();
        assert_eq!(s.states[0].factors[0].probs(), &[0.5, 0.5]);
        let single = predictive_summary(&evals[..1], &Categorical::dirac(1, 0), 2).unwrap();
        assert_eq!(single.states, evals[0].state_pred);
    }
}
