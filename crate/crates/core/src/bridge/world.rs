use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    class_index, BridgeAction, SensingChannels, FAILURE_THRESHOLD, N_REGIONS, SEVERITY_EDGES,
};
use crate::categorical::{sample, Categorical};
use crate::error::{Error, Result};
use crate::inference::ObservationBundle;
use crate::rng::SimRng;

/// Hidden physical state: damage region `y` (0 = undamaged), stiffness reduction in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthState {
    pub y: usize,
    pub delta: f64,
    pub restricted: bool,
}

impl GroundTruthState {
    pub fn healthy() -> Self {
        Self {
            y: 0,
            delta: 0.0,
            restricted: false,
        }
    }

    pub fn failed(&self) -> bool {
        self.delta > FAILURE_THRESHOLD
    }
}

/// Parameters of the degradation and healing process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldParams {
    pub initiation_dn: f64,
    pub initiation_ro: f64,
    pub onset_low: f64,
    pub onset_high: f64,
    pub growth_dn_mean: f64,
    pub growth_dn_sd: f64,
    pub growth_ro_mean: f64,
    pub growth_ro_sd: f64,
    pub repair_mean: f64,
    pub repair_sd: f64,
    pub min_repair: f64,
    pub detectable: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            initiation_dn: 0.5,
            initiation_ro: 0.25,
            onset_low: 30.0,
            onset_high: 35.0,
            growth_dn_mean: 1.5,
            growth_dn_sd: 1.0,
            growth_ro_mean: 0.95,
            growth_ro_sd: 0.5,
            repair_mean: -25.0,
            repair_sd: 15.0,
            min_repair: 10.0,
            detectable: 30.0,
        }
    }
}

impl WorldParams {
    /// A world in which damage never initiates.
    pub fn never_damaged() -> Self {
        Self {
            initiation_dn: 0.0,
            initiation_ro: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.initiation_dn, self.initiation_ro];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig(
                "initiation probabilities must lie in [0, 1]".into(),
            ));
        }
        let sds = [self.growth_dn_sd, self.growth_ro_sd, self.repair_sd];
        if sds.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidConfig(
                "standard deviations must be non-negative".into(),
            ));
        }
        if self.onset_low.is_nan()
            || self.onset_high.is_nan()
            || self.onset_low > self.onset_high
            || self.min_repair < 0.0
        {
            return Err(Error::InvalidConfig(
                "invalid onset interval or repair bound".into(),
            ));
        }
        Ok(())
    }
}

fn normal(mean: f64, sd: f64, rng: &mut SimRng) -> f64 {
    Normal::new(mean, sd)
        .expect("validated standard deviation")
        .sample(rng)
}

fn degrade(
    state: &mut GroundTruthState,
    initiation: f64,
    mean: f64,
    sd: f64,
    p: &WorldParams,
    rng: &mut SimRng,
) {
    if state.y == 0 {
        let mut weights = vec![1.0 - initiation];
        weights.extend(std::iter::repeat_n(
            initiation / N_REGIONS as f64,
            N_REGIONS,
        ));
        let y = sample(&Categorical::from_vec_unchecked(weights), rng);
        if y != 0 {
            state.y = y;
            state.delta = rng.uniform_range(p.onset_low, p.onset_high);
        }
    } else {
        state.delta += normal(mean, sd, rng).max(0.0);
    }
}

/// One step of the hidden degradation or healing process under `action`.
pub fn step_ground_truth(
    state: &GroundTruthState,
    action: BridgeAction,
    params: &WorldParams,
    rng: &mut SimRng,
) -> GroundTruthState {
    let mut next = *state;
    let restricted_dynamics = match action {
        BridgeAction::DN => {
            next.restricted = false;
            false
        }
        BridgeAction::RO => {
            next.restricted = true;
            true
        }
        BridgeAction::RE => state.restricted,
        BridgeAction::MA => {
            next.restricted = false;
            if next.y != 0 {
                let change =
                    normal(params.repair_mean, params.repair_sd, rng).min(-params.min_repair);
                next.delta += change;
                if next.delta < params.detectable {
                    next.y = 0;
                    next.delta = 0.0;
                }
            }
            return next;
        }
    };
    if restricted_dynamics {
        degrade(
            &mut next,
            params.initiation_ro,
            params.growth_ro_mean,
            params.growth_ro_sd,
            params,
            rng,
        );
    } else {
        degrade(
            &mut next,
            params.initiation_dn,
            params.growth_dn_mean,
            params.growth_dn_sd,
            params,
            rng,
        );
    }
    next
}

/// Severity interval of a stiffness reduction; edges belong to the lower interval.
pub fn severity_index(delta: f64) -> Result<usize> {
    if delta > FAILURE_THRESHOLD || delta.is_nan() {
        return Err(Error::OutOfRange { delta });
    }
    Ok(SEVERITY_EDGES[1..]
        .iter()
        .position(|&edge| delta <= edge)
        .expect("delta bounded by the last edge"))
}

pub fn discretize(state: &GroundTruthState) -> Result<usize> {
    if state.delta > FAILURE_THRESHOLD {
        return Err(Error::OutOfRange { delta: state.delta });
    }
    if state.y == 0 {
        return Ok(0);
    }
    Ok(class_index(state.y, severity_index(state.delta)?))
}

/// Sensed class through the channel selected by the previous action, plus that action.
pub fn emit_observation(
    state: &GroundTruthState,
    prev_action: Option<BridgeAction>,
    channels: &SensingChannels,
    rng: &mut SimRng,
) -> Result<ObservationBundle> {
    let truth = discretize(state)?;
    let channel = if prev_action == Some(BridgeAction::RE) {
        &channels.epistemic
    } else {
        &channels.non_epistemic
    };
    let n = channel.shape()[0];
    let column: Vec<f64> = (0..n).map(|o| channel.as_slice()[o * n + truth]).collect();
    let class = sample(&Categorical::from_vec_unchecked(column), rng);
    Ok(ObservationBundle(vec![
        Some(class),
        prev_action.map(BridgeAction::index),
    ]))
}
