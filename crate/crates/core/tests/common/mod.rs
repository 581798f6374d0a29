#![allow(dead_code)]

use adtwin::categorical::{normalize, normalize_vec};
use adtwin::{Belief, Categorical, Cpt, FactorSpec, GenerativeModel, ModalitySpec, SimRng};
use ndarray::{ArrayD, IxDyn};

/// Column-normalized random CPT; `sparsity` is the chance of an exact zero entry.
pub fn random_cpt(shape: &[usize], rng: &mut SimRng, sparsity: f64) -> Cpt {
    let n: usize = shape.iter().product();
    let rows = shape[0];
    let stride = n / rows;
    let mut data: Vec<f64> = (0..n)
        .map(|_| {
            if rng.uniform() < sparsity {
                0.0
            } else {
                rng.uniform() + 1e-3
            }
        })
        .collect();
    for col in 0..stride {
        if (0..rows).all(|r| data[r * stride + col] == 0.0) {
            data[col] = 1.0;
        }
    }
    normalize(ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()).unwrap()
}

pub fn random_categorical(n: usize, rng: &mut SimRng) -> Categorical {
    let v: Vec<f64> = (0..n).map(|_| rng.uniform() + 1e-3).collect();
    normalize_vec(&v).unwrap()
}

pub fn random_belief(dims: &[usize], rng: &mut SimRng) -> Belief {
    Belief::new(dims.iter().map(|&n| random_categorical(n, rng)).collect())
}

pub fn random_model(
    state_dims: &[usize],
    obs_dims: &[usize],
    n_actions: usize,
    sparsity: f64,
    rng: &mut SimRng,
) -> GenerativeModel {
    let a = obs_dims
        .iter()
        .map(|&o| {
            let mut shape = vec![o];
            shape.extend(state_dims);
            random_cpt(&shape, rng, sparsity)
        })
        .collect();
    let b = state_dims
        .iter()
        .map(|&n| random_cpt(&[n, n, n_actions], rng, 0.0))
        .collect();
    let c = obs_dims
        .iter()
        .map(|&o| (0..o).map(|_| 4.0 * rng.uniform() - 2.0).collect())
        .collect();
    let d = state_dims
        .iter()
        .map(|&n| random_categorical(n, rng))
        .collect();
    GenerativeModel {
        factors: state_dims
            .iter()
            .enumerate()
            .map(|(i, &n)| FactorSpec::new(&format!("f{i}"), n, n_actions, true))
            .collect(),
        modalities: obs_dims
            .iter()
            .enumerate()
            .map(|(i, &n)| ModalitySpec::new(&format!("m{i}"), n, false))
            .collect(),
        actions: (0..n_actions).map(|u| format!("u{u}")).collect(),
        a,
        b,
        c,
        d,
        dirichlet_a: vec![None; obs_dims.len()],
        dirichlet_b: vec![None; state_dims.len()],
        dirichlet_d: vec![None; state_dims.len()],
        control_map: (0..n_actions).map(|u| vec![u; state_dims.len()]).collect(),
    }
}

pub fn flat_index(coords: &[usize], dims: &[usize]) -> usize {
    coords.iter().zip(dims).fold(0, |acc, (&c, &n)| acc * n + c)
}

pub fn coords(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &n) in out.iter_mut().zip(dims).rev() {
        *slot = flat % n;
        flat /= n;
    }
    out
}

/// `p(o^m | joint state)` for every modality, column `j` of the flattened joint.
pub fn likelihood_columns(model: &GenerativeModel, m: usize) -> Vec<Vec<f64>> {
    let n_joint = model.joint_size();
    let n_o = model.modalities[m].cardinality;
    let data = model.a[m].as_slice();
    (0..n_o)
        .map(|o| data[o * n_joint..(o + 1) * n_joint].to_vec())
        .collect()
}

/// Exact Bayes posterior marginals for a single-factor model.
pub fn exact_posterior(
    model: &GenerativeModel,
    prior: &Categorical,
    obs: &[Option<usize>],
) -> (Vec<f64>, f64) {
    let mut w: Vec<f64> = prior.probs().to_vec();
    for (m, o) in obs.iter().enumerate() {
        if let Some(o) = o {
            let rows = likelihood_columns(model, m);
            for (x, l) in w.iter_mut().zip(&rows[*o]) {
                *x *= l;
            }
        }
    }
    let evidence: f64 = w.iter().sum();
    (w.iter().map(|x| x / evidence).collect(), evidence)
}

/// Brute-force `Σ_m E_{Q(o^m)} KL[Q(D | o^m) || Q(D)]` under the mean-field joint.
pub fn brute_force_epistemic(model: &GenerativeModel, belief: &Belief) -> f64 {
    let joint = belief.joint();
    let mut total = 0.0;
    for m in 0..model.n_modalities() {
        for row in likelihood_columns(model, m) {
            let q_o: f64 = row.iter().zip(&joint).map(|(a, q)| a * q).sum();
            if q_o <= 0.0 {
                continue;
            }
            let mut kl = 0.0;
            for (a, q) in row.iter().zip(&joint) {
                let post = a * q / q_o;
                if post > 0.0 {
                    kl += post * (post / q).ln();
                }
            }
            total += q_o * kl;
        }
    }
    total
}
