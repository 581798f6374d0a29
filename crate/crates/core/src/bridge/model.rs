use ndarray::{Array2, ArrayD, IxDyn};

use super::{
    class_index, class_of_states, delta_labels, BridgeAction, BridgeConfig, EPI, NON_EPI,
    N_CLASSES, N_DELTA_STATES, N_REGIONS, N_SEVERITIES,
};
use crate::categorical::{normalize, Categorical, Cpt, DirichletParams};
use crate::error::{Error, Result};
use crate::model::{FactorSpec, GenerativeModel, ModalitySpec};
use crate::rng::{streams, SimRng};

const LIKELIHOOD_FLOOR: f64 = 1e-5;
const TRANSITION_FLOOR: f64 = 1e-3;

/// Previous-action likelihood under the non-epistemic state, columns over `D^δ`.
const ACTION_LIKELIHOOD: [[f64; N_DELTA_STATES]; 4] = [
    [0.08, 0.3, 0.45, 0.4, 0.3, 0.2, 0.1],
    [0.9, 0.4, 0.3, 0.1, 0.15, 0.2, 0.25],
    [0.02, 0.3, 0.25, 0.5, 0.55, 0.6, 0.65],
    [0.0; N_DELTA_STATES],
];

const ACTION_PREFERENCE: [f64; 4] = [5.5, -5.0, 2.5, -0.5];

/// Interval midpoints as fractions; the top interval is penalised separately.
const SEVERITY_MIDPOINTS: [f64; N_SEVERITIES - 1] = [0.325, 0.40, 0.50, 0.60, 0.70];
const TOP_SEVERITY_PENALTY: f64 = -10.0;

/// World-side sensing channels, indexed `[reported class, true class]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingChannels {
    pub epistemic: Cpt,
    pub non_epistemic: Cpt,
}

/// Everything needed to run one episode: agent model and world channels.
#[derive(Clone, Debug)]
pub struct BridgeTwin {
    pub model: GenerativeModel,
    pub channels: SensingChannels,
    pub confusion: Cpt,
}

fn column_noise(n: usize, half_width: f64, rng: &mut SimRng) -> Vec<f64> {
    if half_width == 0.0 {
        return vec![0.0; n];
    }
    let raw: Vec<f64> = (0..n)
        .map(|_| rng.uniform_range(-half_width, half_width))
        .collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    raw.into_iter().map(|x| x - mean).collect()
}

fn spread(mass: f64, targets: &[usize], column: &mut [f64], rng: &mut SimRng) {
    let weights: Vec<f64> = targets.iter().map(|_| 0.5 + rng.uniform()).collect();
    let total: f64 = weights.iter().sum();
    for (&t, w) in targets.iter().zip(weights) {
        column[t] += mass * w / total;
    }
}

/// Adjacency-weighted 37x37 confusion channel with mean diagonal `accuracy`.
pub fn synth_confusion_matrix(accuracy: f64, rng: &mut SimRng) -> Result<Cpt> {
    if !(accuracy > 0.0 && accuracy <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "accuracy {accuracy} outside (0, 1]"
        )));
    }
    let half_width = 0.5 * 0.02f64.min(1.0 - accuracy).min(accuracy);
    let noise = column_noise(N_CLASSES, half_width, rng);
    let mut m = Array2::<f64>::zeros((N_CLASSES, N_CLASSES));
    let mildest: Vec<usize> = (1..=N_REGIONS).map(|y| class_index(y, 0)).collect();
    for truth in 0..N_CLASSES {
        let acc = (accuracy + noise[truth]).clamp(0.0, 1.0);
        let off = 1.0 - acc;
        let mut column = vec![0.0; N_CLASSES];
        column[truth] = acc;
        if off > 0.0 {
            match super::class_parts(truth) {
                None => spread(off, &mildest, &mut column, rng),
                Some((y, k)) => {
                    let adjacent: Vec<usize> = [k.wrapping_sub(1), k + 1]
                        .into_iter()
                        .filter(|&j| j < N_SEVERITIES)
                        .map(|j| class_index(y, j))
                        .collect();
                    let other_regions: Vec<usize> = (1..=N_REGIONS)
                        .filter(|&r| r != y)
                        .map(|r| class_index(r, k))
                        .collect();
                    spread(0.7 * off, &adjacent, &mut column, rng);
                    spread(0.2 * off, &other_regions, &mut column, rng);
                    column[0] += 0.1 * off;
                }
            }
        }
        for (o, v) in column.into_iter().enumerate() {
            m[[o, truth]] = v;
        }
    }
    normalize(m.into_dyn())
}

/// Raw Uniform[0,1] entries; only the mixture is renormalized.
fn uniform_entropic(shape: &[usize], rng: &mut SimRng) -> ArrayD<f64> {
    let n = shape.iter().product();
    let raw: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    ArrayD::from_shape_vec(IxDyn(shape), raw).expect("shape")
}

fn mix(base: &Cpt, entropic: &ArrayD<f64>, alpha: f64) -> Result<Cpt> {
    let mixed = base.array().mapv(|x| (1.0 - alpha) * x) + entropic.mapv(|x| alpha * x);
    normalize(mixed)
}

/// Epistemic channel is the confusion matrix itself; the non-epistemic one is
/// `(1 - alpha) C + alpha U` with `U` drawn from `rng`, renormalized.
pub fn sensing_channels(confusion: &Cpt, alpha: f64, rng: &mut SimRng) -> Result<SensingChannels> {
    let entropic = uniform_entropic(&[N_CLASSES, N_CLASSES], rng);
    Ok(SensingChannels {
        epistemic: confusion.clone(),
        non_epistemic: mix(confusion, &entropic, alpha)?,
    })
}

/// Lifts a 37x37 channel onto the `(D^Ω, D^δ)` grid.
fn lift_channel(channel: &Cpt) -> ArrayD<f64> {
    let mut out = ArrayD::zeros(IxDyn(&[N_CLASSES, N_REGIONS, N_DELTA_STATES]));
    for w in 0..N_REGIONS {
        for d in 0..N_DELTA_STATES {
            let truth = class_of_states(w, d);
            for o in 0..N_CLASSES {
                out[IxDyn(&[o, w, d])] = channel.array()[IxDyn(&[o, truth])];
            }
        }
    }
    out
}

fn class_likelihood(confusion: &Cpt, alpha: f64, rng: &mut SimRng) -> Result<Cpt> {
    let epi = normalize(lift_channel(confusion).mapv(|x| x + LIKELIHOOD_FLOOR))?;
    let entropic = uniform_entropic(&[N_CLASSES, N_REGIONS, N_DELTA_STATES], rng);
    let non_epi = mix(&epi, &entropic, alpha)?;
    Ok(stack_epi(&epi, &non_epi))
}

fn stack_epi(epi: &Cpt, non_epi: &Cpt) -> Cpt {
    let shape = epi.shape();
    let mut full_shape = shape.to_vec();
    full_shape.push(2);
    let mut out = ArrayD::zeros(IxDyn(&full_shape));
    for (idx, &v) in epi.array().indexed_iter() {
        let mut i: Vec<usize> = (0..shape.len()).map(|k| idx[k]).collect();
        i.push(EPI);
        out[IxDyn(&i)] = v;
        *i.last_mut().expect("non-empty") = NON_EPI;
        out[IxDyn(&i)] = non_epi.array()[&idx];
    }
    Cpt::from_array_unchecked(out)
}

fn action_likelihood() -> Result<Cpt> {
    let mut epi = ArrayD::zeros(IxDyn(&[4, N_REGIONS, N_DELTA_STATES]));
    let mut non_epi = ArrayD::zeros(IxDyn(&[4, N_REGIONS, N_DELTA_STATES]));
    for w in 0..N_REGIONS {
        for d in 0..N_DELTA_STATES {
            epi[IxDyn(&[BridgeAction::RE.index(), w, d])] = 1.0;
            for (u, row) in ACTION_LIKELIHOOD.iter().enumerate() {
                non_epi[IxDyn(&[u, w, d])] = row[d] + LIKELIHOOD_FLOOR;
            }
        }
    }
    Ok(stack_epi(&Cpt::new(epi)?, &normalize(non_epi)?))
}

fn omega_transitions() -> Result<Cpt> {
    let off = 0.2 / (N_REGIONS - 1) as f64;
    let mut b = ArrayD::from_elem(IxDyn(&[N_REGIONS, N_REGIONS, 1]), off);
    for i in 0..N_REGIONS {
        b[IxDyn(&[i, i, 0])] = 0.8;
    }
    normalize(b)
}

/// Probabilities of moving `k` intervals, signed by direction.
fn delta_chain(action: BridgeAction) -> (&'static [f64], isize) {
    match action {
        BridgeAction::DN => (&[0.85, 0.10, 0.05], 1),
        BridgeAction::RO => (&[0.92, 0.05, 0.03], 1),
        BridgeAction::RE => (&[0.9, 0.1], 1),
        BridgeAction::MA => (&[0.05, 0.15, 0.20, 0.20, 0.20, 0.20], -1),
    }
}

/// Banded chains clipped at the boundary states, before flooring.
pub(crate) fn delta_transitions_raw() -> ArrayD<f64> {
    let n = N_DELTA_STATES as isize;
    let mut b = ArrayD::zeros(IxDyn(&[N_DELTA_STATES, N_DELTA_STATES, 4]));
    for action in BridgeAction::ALL {
        let (probs, dir) = delta_chain(action);
        for i in 0..n {
            for (k, &p) in probs.iter().enumerate() {
                let j = (i + dir * k as isize).clamp(0, n - 1);
                b[IxDyn(&[j as usize, i as usize, action.index()])] += p;
            }
        }
    }
    b
}

fn delta_transitions() -> Result<Cpt> {
    normalize(delta_transitions_raw().mapv(|x| x + TRANSITION_FLOOR))
}

fn epi_transitions() -> Result<Cpt> {
    let mut b = ArrayD::zeros(IxDyn(&[2, 2, 4]));
    for action in BridgeAction::ALL {
        let next = if action == BridgeAction::RE {
            EPI
        } else {
            NON_EPI
        };
        for prev in 0..2 {
            b[IxDyn(&[next, prev, action.index()])] = 1.0;
        }
    }
    Cpt::new(b)
}

pub(crate) fn class_preferences() -> Vec<f64> {
    let mut c = vec![0.0; N_CLASSES];
    for y in 1..=N_REGIONS {
        for k in 0..N_SEVERITIES {
            c[class_index(y, k)] = match SEVERITY_MIDPOINTS.get(k) {
                Some(mid) => -mid.exp(),
                None => TOP_SEVERITY_PENALTY,
            };
        }
    }
    c
}

fn assemble(cfg: &BridgeConfig, class_a: Cpt) -> Result<GenerativeModel> {
    let region_labels: Vec<String> = (1..=N_REGIONS).map(|r| r.to_string()).collect();
    let factors = vec![
        FactorSpec::new("omega", N_REGIONS, 1, true).with_labels(&region_labels),
        FactorSpec::new("delta", N_DELTA_STATES, 4, true).with_labels(&delta_labels()),
        FactorSpec::new("epi", 2, 4, false).with_labels(&["epi", "nonepi"]),
    ];
    let action_names: Vec<&str> = BridgeAction::ALL.iter().map(|a| a.name()).collect();
    let modalities = vec![
        ModalitySpec::new("class", N_CLASSES, false),
        ModalitySpec::new("action", 4, false).with_labels(&action_names),
    ];
    let b = vec![
        omega_transitions()?,
        delta_transitions()?,
        epi_transitions()?,
    ];
    let dirichlet_b = vec![
        Some(DirichletParams::from_cpt(&b[0], cfg.b_concentration_scale)?),
        Some(DirichletParams::from_cpt(&b[1], cfg.b_concentration_scale)?),
        None,
    ];
    let model = GenerativeModel {
        factors,
        modalities,
        actions: action_names.iter().map(|s| s.to_string()).collect(),
        a: vec![class_a, action_likelihood()?],
        b,
        c: vec![class_preferences(), ACTION_PREFERENCE.to_vec()],
        d: vec![
            Categorical::uniform(N_REGIONS),
            Categorical::dirac(N_DELTA_STATES, 0),
            Categorical::uniform(2),
        ],
        dirichlet_a: vec![None, None],
        dirichlet_b,
        dirichlet_d: vec![None, None, None],
        control_map: BridgeAction::ALL
            .iter()
            .map(|a| vec![0, a.index(), a.index()])
            .collect(),
    };
    let report = model.validate();
    if !report.is_valid() {
        return Err(Error::InvalidModel(report));
    }
    Ok(model)
}

/// Agent generative model. Draws the confusion matrix from the `CONFUSION` sub-stream of
/// `rng` and the entropic likelihood component from its `MODEL` sub-stream.
pub fn build_bridge_model(cfg: &BridgeConfig, rng: &SimRng) -> Result<GenerativeModel> {
    Ok(build_twin(cfg, rng)?.model)
}

pub fn build_twin(cfg: &BridgeConfig, rng: &SimRng) -> Result<BridgeTwin> {
    cfg.validate()?;
    let confusion =
        synth_confusion_matrix(cfg.confusion_accuracy, &mut rng.split(streams::CONFUSION))?;
    let class_a = class_likelihood(&confusion, cfg.alpha, &mut rng.split(streams::MODEL))?;
    let model = assemble(cfg, class_a)?;
    let channels = sensing_channels(
        &confusion,
        cfg.alpha,
        &mut rng.split(streams::WORLD_CHANNEL),
    )?;
    Ok(BridgeTwin {
        model,
        channels,
        confusion,
    })
}

/// Class likelihood with a noiseless (floored) channel in both epistemic slices.
pub(crate) fn identity_class_likelihood() -> Cpt {
    let mut eye = ArrayD::zeros(IxDyn(&[N_CLASSES, N_REGIONS, N_DELTA_STATES]));
    for w in 0..N_REGIONS {
        for d in 0..N_DELTA_STATES {
            eye[IxDyn(&[class_of_states(w, d), w, d])] = 1.0;
        }
    }
    let floored = normalize(eye.mapv(|x| x + LIKELIHOOD_FLOOR)).expect("positive columns");
    stack_epi(&floored, &floored)
}
