//! Mean-field variational state inference.
//!
//! For every factor the fixed point satisfies
//! `ln Q(D^f) = ln prior^f + E_{Q(D^-f)}[Σ_m ln A^m[o^m | D]] + const`.
//! Factors are updated Gauss-Seidel style in declaration order and sweeps stop
//! once the free energy changes by less than the tolerance.

use serde::{Deserialize, Serialize};

use crate::categorical::{softmax_log_weights, xlogx, Categorical};
use crate::error::{Error, Result};
use crate::model::{Belief, GenerativeModel};

/// Observed index per modality; `None` leaves inference uninformed in that modality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationBundle(pub Vec<Option<usize>>);

impl ObservationBundle {
    pub fn missing(n_modalities: usize) -> Self {
        Self(vec![None; n_modalities])
    }

    pub fn full(indices: &[usize]) -> Self {
        Self(indices.iter().map(|&i| Some(i)).collect())
    }

    pub fn get(&self, m: usize) -> Option<usize> {
        self.0.get(m).copied().flatten()
    }

    pub fn any_observed(&self) -> bool {
        self.0.iter().any(Option::is_some)
    }

    pub fn validate(&self, model: &GenerativeModel) -> Result<()> {
        if self.0.len() != model.n_modalities() {
            return Err(Error::LengthMismatch {
                expected: model.n_modalities(),
                actual: self.0.len(),
            });
        }
        for (modality, (o, spec)) in self.0.iter().zip(&model.modalities).enumerate() {
            if let Some(index) = *o {
                if index >= spec.cardinality {
                    return Err(Error::ObservationOutOfRange { modality, index });
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub posterior: Belief,
    pub vfe: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Free energy after each completed sweep.
    pub vfe_history: Vec<f64>,
}

/// Row-major coordinates of every joint state.
struct JointIndex {
    dims: Vec<usize>,
    coords: Vec<usize>,
}

impl JointIndex {
    fn new(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        let f = dims.len();
        let mut coords = vec![0; n * f];
        for flat in 0..n {
            let mut rem = flat;
            for k in (0..f).rev() {
                coords[flat * f + k] = rem % dims[k];
                rem /= dims[k];
            }
        }
        Self {
            dims: dims.to_vec(),
            coords,
        }
    }

    fn coord(&self, flat: usize, factor: usize) -> usize {
        self.coords[flat * self.dims.len() + factor]
    }
}

/// `Σ_m ln A^m[o^m, d]` over the flattened joint; `-inf` marks impossible states.
pub fn joint_log_likelihood(model: &GenerativeModel, obs: &ObservationBundle) -> Vec<f64> {
    let n = model.joint_size();
    let mut out = vec![0.0; n];
    for (m, o) in obs.0.iter().enumerate() {
        if let Some(o) = *o {
            let row = &model.a[m].as_slice()[o * n..(o + 1) * n];
            for (acc, &p) in out.iter_mut().zip(row) {
                *acc += if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
            }
        }
    }
    out
}

fn ln_or_neg_inf(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Weight of a joint state under all factors except `skip`.
fn co_weight(q: &[Vec<f64>], index: &JointIndex, flat: usize, skip: usize) -> f64 {
    let mut w = 1.0;
    for (g, qg) in q.iter().enumerate() {
        if g != skip {
            w *= qg[index.coord(flat, g)];
        }
    }
    w
}

fn vfe_from_parts(q: &[Vec<f64>], prior: &[&[f64]], loglik: &[f64], index: &JointIndex) -> f64 {
    let mut f = 0.0;
    for (qf, pf) in q.iter().zip(prior) {
        for (&qi, &pi) in qf.iter().zip(pf.iter()) {
            if qi > 0.0 {
                f += xlogx(qi) - qi * ln_or_neg_inf(pi);
            }
        }
    }
    for (flat, &l) in loglik.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        let w: f64 = q
            .iter()
            .enumerate()
            .map(|(g, qg)| qg[index.coord(flat, g)])
            .product();
        if w > 0.0 {
            f -= w * l;
        }
    }
    f
}

/// `E_Q[ln Q(D)] - E_Q[ln p(o|D)] - E_Q[ln prior(D)]` under the mean-field joint.
pub fn compute_vfe(
    model: &GenerativeModel,
    q: &Belief,
    obs: &ObservationBundle,
    prior: &Belief,
) -> f64 {
    let index = JointIndex::new(&model.state_dims());
    let loglik = joint_log_likelihood(model, obs);
    let qs: Vec<Vec<f64>> = q.factors.iter().map(|x| x.probs().to_vec()).collect();
    let ps: Vec<&[f64]> = prior.factors.iter().map(|x| x.probs()).collect();
    vfe_from_parts(&qs, &ps, &loglik, &index)
}

fn support_uniform(p: &[f64]) -> Vec<f64> {
    let n = p.iter().filter(|&&x| x > 0.0).count() as f64;
    p.iter()
        .map(|&x| if x > 0.0 { 1.0 / n } else { 0.0 })
        .collect()
}

pub fn infer_state(
    model: &GenerativeModel,
    prior: &Belief,
    obs: &ObservationBundle,
    opts: InferenceOptions,
) -> Result<InferenceResult> {
    if opts.tol.is_nan() || opts.tol <= 0.0 || opts.max_iter == 0 {
        return Err(Error::InvalidConfig(
            "inference needs tol > 0 and max_iter >= 1".to_string(),
        ));
    }
    obs.validate(model)?;
    if prior.n_factors() != model.n_factors() {
        return Err(Error::LengthMismatch {
            expected: model.n_factors(),
            actual: prior.n_factors(),
        });
    }

    let index = JointIndex::new(&model.state_dims());
    let loglik = joint_log_likelihood(model, obs);
    let prior_p: Vec<&[f64]> = prior.factors.iter().map(|x| x.probs()).collect();
    if !obs.any_observed() {
        let vfe = vfe_from_parts(
            &prior_p.iter().map(|p| p.to_vec()).collect::<Vec<_>>(),
            &prior_p,
            &loglik,
            &index,
        );
        return Ok(InferenceResult {
            posterior: prior.clone(),
            vfe,
            iterations: 1,
            converged: true,
            vfe_history: vec![vfe],
        });
    }

    // Start from the uniform distribution over each factor's prior support.
    let mut q: Vec<Vec<f64>> = prior_p.iter().map(|p| support_uniform(p)).collect();
    let initial = vfe_from_parts(&q, &prior_p, &loglik, &index);

    let mut history = Vec::new();
    let mut previous = initial;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        for f in 0..q.len() {
            let n_f = index.dims[f];
            let mut log_w: Vec<f64> = prior_p[f].iter().map(|&p| ln_or_neg_inf(p)).collect();
            let mut expected = vec![0.0; n_f];
            for (flat, &l) in loglik.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                let w = co_weight(&q, &index, flat, f);
                if w > 0.0 {
                    expected[index.coord(flat, f)] += w * l;
                }
            }
            for (lw, e) in log_w.iter_mut().zip(&expected) {
                *lw += e;
            }
            if log_w.iter().all(|&x| x == f64::NEG_INFINITY) {
                return Err(Error::ContradictoryEvidence { factor: f });
            }
            q[f] = softmax_log_weights(&log_w).into_vec();
        }
        let current = vfe_from_parts(&q, &prior_p, &loglik, &index);
        history.push(current);
        let change = (previous - current).abs();
        previous = current;
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(InferenceResult {
        posterior: Belief::new(q.into_iter().map(Categorical::from_vec_unchecked).collect()),
        vfe: previous,
        iterations: history.len(),
        converged,
        vfe_history: history,
    })
}
