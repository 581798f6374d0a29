//! Dirichlet updates of the likelihood, transition and initial-state arrays.
//!
//! Each update adds `eta` times an outer product of (one-hot or posterior)
//! densities, so the total concentration grows by exactly `eta`. The CPT used by
//! inference and planning is refreshed to the Dirichlet mean afterwards.

use ndarray::IxDyn;
use serde::{Deserialize, Serialize};

use crate::categorical::{dirichlet_mean, outer_flat, Categorical, DirichletParams};
use crate::error::{Error, Result};
use crate::model::{Belief, GenerativeModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    pub eta_a: f64,
    pub eta_b: f64,
    pub eta_d: f64,
    pub learn_a: bool,
    pub learn_b: bool,
    pub learn_d: bool,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            eta_a: 0.0,
            eta_b: 0.1,
            eta_d: 0.0,
            learn_a: false,
            learn_b: true,
            learn_d: false,
        }
    }
}

impl LearningConfig {
    pub fn disabled() -> Self {
        Self {
            learn_b: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [
            ("eta_a", self.eta_a),
            ("eta_b", self.eta_b),
            ("eta_d", self.eta_d),
        ] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {eta} is outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

fn check_shape(expected: &[usize], actual: &[usize]) -> Result<()> {
    if expected != actual {
        return Err(Error::ShapeMismatch {
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        });
    }
    Ok(())
}

/// `conc + eta * onehot(o) ⊗ Q(D^1) ⊗ ... ⊗ Q(D^F)`.
pub fn update_a(
    conc: &DirichletParams,
    obs: usize,
    posterior: &Belief,
    eta: f64,
) -> Result<DirichletParams> {
    let mut shape = vec![conc.shape()[0]];
    shape.extend(posterior.factors.iter().map(Categorical::len));
    check_shape(conc.shape(), &shape)?;
    if obs >= shape[0] {
        return Err(Error::ObservationOutOfRange {
            modality: 0,
            index: obs,
        });
    }
    let joint = posterior.joint();
    let n = joint.len();
    let mut out = conc.clone();
    let mut arr = out.array_mut().as_standard_layout().into_owned();
    let data = arr.as_slice_mut().expect("standard layout");
    for (x, q) in data[obs * n..(obs + 1) * n].iter_mut().zip(&joint) {
        *x += eta * q;
    }
    *out.array_mut() = arr;
    Ok(out)
}

/// Adds `eta * q_now ⊗ q_prev` to slice `control` of a transition concentration.
pub fn update_b(
    conc: &DirichletParams,
    q_now: &Categorical,
    q_prev: &Categorical,
    control: usize,
    eta: f64,
) -> Result<DirichletParams> {
    let shape = conc.shape();
    if shape.len() != 3 {
        return Err(Error::ShapeMismatch {
            expected: vec![q_now.len(), q_prev.len(), 1],
            actual: shape.to_vec(),
        });
    }
    check_shape(&[q_now.len(), q_prev.len()], &shape[..2])?;
    if control >= shape[2] {
        return Err(Error::UnknownControlIndex {
            factor: 0,
            index: control,
        });
    }
    let outer = outer_flat(&[q_now.probs(), q_prev.probs()]);
    let n_prev = q_prev.len();
    let mut out = conc.clone();
    let arr = out.array_mut();
    for (k, w) in outer.iter().enumerate() {
        arr[IxDyn(&[k / n_prev, k % n_prev, control])] += eta * w;
    }
    Ok(out)
}

pub fn update_d(conc: &DirichletParams, q_now: &Categorical, eta: f64) -> Result<DirichletParams> {
    check_shape(conc.shape(), &[q_now.len()])?;
    let mut out = conc.clone();
    for (x, q) in out.array_mut().iter_mut().zip(q_now.probs()) {
        *x += eta * q;
    }
    Ok(out)
}

impl GenerativeModel {
    /// Updates the transition concentration of `factor` and refreshes `B[factor]`.
    pub fn learn_transition(
        &mut self,
        factor: usize,
        q_now: &Categorical,
        q_prev: &Categorical,
        action: usize,
        eta: f64,
    ) -> Result<()> {
        if factor >= self.n_factors() {
            return Err(Error::LengthMismatch {
                expected: self.n_factors(),
                actual: factor + 1,
            });
        }
        if !self.factors[factor].learnable_transitions {
            return Err(Error::FrozenArray { factor });
        }
        let control = self.control_index(action, factor)?;
        let conc = self.dirichlet_b[factor]
            .as_ref()
            .ok_or(Error::FrozenArray { factor })?;
        let updated = update_b(conc, q_now, q_prev, control, eta).map_err(|e| match e {
            Error::UnknownControlIndex { index, .. } => {
                Error::UnknownControlIndex { factor, index }
            }
            other => other,
        })?;
        self.b[factor] = dirichlet_mean(&updated);
        self.dirichlet_b[factor] = Some(updated);
        Ok(())
    }

    /// Updates every learnable modality's likelihood concentration with the observed outcome.
    pub fn learn_likelihood(
        &mut self,
        obs: &[Option<usize>],
        posterior: &Belief,
        eta: f64,
    ) -> Result<()> {
        for (m, o) in obs.iter().enumerate() {
            let Some(o) = *o else { continue };
            if !self.modalities[m].learnable_likelihood {
                continue;
            }
            if let Some(conc) = &self.dirichlet_a[m] {
                let updated = update_a(conc, o, posterior, eta).map_err(|e| match e {
                    Error::ObservationOutOfRange { index, .. } => {
                        Error::ObservationOutOfRange { modality: m, index }
                    }
                    other => other,
                })?;
                self.a[m] = dirichlet_mean(&updated);
                self.dirichlet_a[m] = Some(updated);
            }
        }
        Ok(())
    }

    pub fn learn_initial(&mut self, posterior: &Belief, eta: f64) -> Result<()> {
        for f in 0..self.n_factors() {
            if let Some(conc) = &self.dirichlet_d[f] {
                let updated = update_d(conc, &posterior.factors[f], eta)?;
                let mean = dirichlet_mean(&updated);
                self.d[f] = Categorical::from_vec_unchecked(mean.as_slice().to_vec());
                self.dirichlet_d[f] = Some(updated);
            }
        }
        Ok(())
    }
}
