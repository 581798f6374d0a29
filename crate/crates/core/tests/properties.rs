mod common;

use adtwin::categorical::{kl_divergence, softmax};
use adtwin::document::{deserialize, serialize};
use adtwin::inference::{infer_state, InferenceOptions, ObservationBundle};
use adtwin::learning::{update_a, update_b, update_d};
use adtwin::planning::{epistemic_value, plan, pragmatic_value, PlannerConfig};
use adtwin::{DirichletParams, SimRng};
use common::*;
use proptest::prelude::*;

fn dims(max_factors: usize, max_states: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_states, 1..=max_factors)
}

fn sum(p: &[f64]) -> f64 {
    p.iter().sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn single_factor_posterior_is_exact(seed in any::<u64>(), n in 1usize..=6, obs_dims in prop::collection::vec(1usize..=6, 1..=3)) {
        let mut rng = SimRng::new(seed);
        let model = random_model(&[n], &obs_dims, 1, 0.0, &mut rng);
        let prior = random_belief(&[n], &mut rng);
        let obs = ObservationBundle(obs_dims.iter().map(|&o| Some((rng.uniform() * o as f64) as usize)).collect());
        let r = infer_state(&model, &prior, &obs, InferenceOptions::default()).unwrap();
        let (exact, evidence) = exact_posterior(&model, prior.factor(0), &obs.0);
        for (a, b) in r.posterior.factor(0).probs().iter().zip(&exact) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert!((r.vfe + evidence.ln()).abs() <= 1e-9);
    }

    #[test]
    fn mean_field_descends_and_normalizes(seed in any::<u64>(), state_dims in dims(3, 4), obs_dims in prop::collection::vec(2usize..=5, 1..=2)) {
        let mut rng = SimRng::new(seed);
        let model = random_model(&state_dims, &obs_dims, 2, 0.0, &mut rng);
        let prior = random_belief(&state_dims, &mut rng);
        let obs = ObservationBundle(obs_dims.iter().map(|&o| Some((rng.uniform() * o as f64) as usize)).collect());
        let r = infer_state(&model, &prior, &obs, InferenceOptions::default()).unwrap();
        for w in r.vfe_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10);
        }
        for q in &r.posterior.factors {
            prop_assert!((sum(q.probs()) - 1.0).abs() <= 1e-12);
            prop_assert!(q.probs().iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn missing_observations_return_the_prior(seed in any::<u64>(), state_dims in dims(3, 4)) {
        let mut rng = SimRng::new(seed);
        let model = random_model(&state_dims, &[3], 2, 0.2, &mut rng);
        let prior = random_belief(&state_dims, &mut rng);
        let r = infer_state(&model, &prior, &ObservationBundle::missing(1), InferenceOptions::default()).unwrap();
        prop_assert!(r.posterior.max_abs_diff(&prior) <= 1e-15);
    }

    #[test]
    fn epistemic_value_is_mutual_information(seed in any::<u64>(), state_dims in dims(3, 4), obs_dims in prop::collection::vec(1usize..=5, 1..=2)) {
        let mut rng = SimRng::new(seed);
        let model = random_model(&state_dims, &obs_dims, 2, 0.3, &mut rng);
        let belief = random_belief(&state_dims, &mut rng);
        let obs_pred: Vec<_> = (0..obs_dims.len()).map(|m| model.predict_observation(&belief, m).unwrap()).collect();
        let value = epistemic_value(&model, &belief, &obs_pred);
        prop_assert!(value >= -1e-12);
        prop_assert!((value - brute_force_epistemic(&model, &belief)).abs() <= 1e-9);
        prop_assert!(pragmatic_value(&model, &obs_pred) <= 1e-12);
    }

    #[test]
    fn plan_posteriors_are_distributions(seed in any::<u64>(), state_dims in dims(2, 3), horizon in 1usize..=3, n_actions in 1usize..=3) {
        let mut rng = SimRng::new(seed);
        let model = random_model(&state_dims, &[3, 2], n_actions, 0.0, &mut rng);
        let belief = random_belief(&state_dims, &mut rng);
        let actions: Vec<usize> = (0..n_actions).collect();
        let cfg = PlannerConfig { horizon, gamma: 4.0, ..PlannerConfig::default() };
        let r = plan(&model, &belief, &actions, &cfg, None).unwrap();
        prop_assert_eq!(r.evaluations.len(), n_actions.pow(horizon as u32));
        prop_assert!((sum(r.policy_posterior.probs()) - 1.0).abs() <= 1e-12);
        for a in &r.action_posterior {
            prop_assert!((sum(a.probs()) - 1.0).abs() <= 1e-12);
        }
        let best = r.g.iter().cloned().fold(f64::INFINITY, f64::min);
        let first_of_best = r.g.iter().position(|&g| g == best).unwrap();
        prop_assert!(r.policy_posterior.probs()[first_of_best] >= r.policy_posterior.probs().iter().cloned().fold(0.0, f64::max) - 1e-15);
    }

    #[test]
    fn propagation_preserves_normalization(seed in any::<u64>(), state_dims in dims(3, 5), n_actions in 1usize..=3) {
        let mut rng = SimRng::new(seed);
        let model = random_model(&state_dims, &[2], n_actions, 0.0, &mut rng);
        let belief = random_belief(&state_dims, &mut rng);
        for u in 0..n_actions {
            let next = model.propagate(&belief, u).unwrap();
            for q in &next.factors {
                prop_assert!((sum(q.probs()) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dirichlet_updates_add_exactly_eta(seed in any::<u64>(), n in 1usize..=5, n_o in 1usize..=5, eta in 0.0f64..=1.0) {
        let mut rng = SimRng::new(seed);
        let belief = random_belief(&[n], &mut rng);
        let a = DirichletParams::from_cpt(&random_cpt(&[n_o, n], &mut rng, 0.0), 3.0).unwrap();
        let a2 = update_a(&a, n_o - 1, &belief, eta).unwrap();
        prop_assert!((a2.total() - a.total() - eta).abs() <= 1e-12);
        let b = DirichletParams::from_cpt(&random_cpt(&[n, n, 2], &mut rng, 0.0), 1.0).unwrap();
        let q_prev = random_categorical(n, &mut rng);
        let b2 = update_b(&b, belief.factor(0), &q_prev, 1, eta).unwrap();
        prop_assert!((b2.total() - b.total() - eta).abs() <= 1e-12);
        prop_assert!(b2.array().iter().zip(b.array().iter()).all(|(x, y)| x >= y));
        let d = DirichletParams::from_cpt(&random_cpt(&[n], &mut rng, 0.0), 1.0).unwrap();
        let d2 = update_d(&d, belief.factor(0), eta).unwrap();
        prop_assert!((d2.total() - d.total() - eta).abs() <= 1e-12);
    }

    #[test]
    fn softmax_and_kl_are_well_formed(logits in prop::collection::vec(-50.0f64..50.0, 1..8), gamma in 0.1f64..32.0, seed in any::<u64>()) {
        let p = softmax(&logits, gamma).unwrap();
        prop_assert!((sum(p.probs()) - 1.0).abs() <= 1e-12);
        let mut rng = SimRng::new(seed);
        let q = random_categorical(logits.len(), &mut rng);
        let r = random_categorical(logits.len(), &mut rng);
        prop_assert!(kl_divergence(&q, &r).unwrap() >= -1e-12);
        prop_assert!(kl_divergence(&q, &q).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn documents_round_trip(seed in any::<u64>(), state_dims in dims(3, 4), obs_dims in prop::collection::vec(1usize..=4, 1..=3)) {
        let mut rng = SimRng::new(seed);
        let model = random_model(&state_dims, &obs_dims, 2, 0.3, &mut rng);
        let back = deserialize(&serialize(&model)).unwrap();
        prop_assert_eq!(back, model);
    }
}
