//! Categorical distributions, conditional probability tables and Dirichlet
//! concentration arrays.
//!
//! A CPT stores the child variable on axis 0; every lane along axis 0 (a
//! "column", one per parent configuration) is a categorical distribution.
//! Logs follow the `0 ln 0 = 0` convention instead of epsilon flooring, so
//! deliberately sparse tables stay exact.

use ndarray::{ArrayD, Axis, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Absolute tolerance for probability comparisons.
pub const PROB_TOL: f64 = 1e-12;

/// `x ln x` with the `0 ln 0 = 0` convention.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy of a probability slice in nats.
pub fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().map(|&x| xlogx(x)).sum::<f64>()
}

/// Numerically stable `ln Σ exp(x)`; `-inf` entries are ignored.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalized probability vector over a finite support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Categorical(Vec<f64>);

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (index, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFiniteInput { index });
            }
            if p < 0.0 {
                return Err(Error::NegativeEntry { index, value: p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL.max(probs.len() as f64 * f64::EPSILON) {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self(probs))
    }

    /// Wraps a vector the caller has already normalized.
    pub fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(!probs.is_empty());
        Self(probs)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn dirac(n: usize, k: usize) -> Self {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.0)
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

impl TryFrom<Vec<f64>> for Categorical {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Categorical::new(v)
    }
}

impl From<Categorical> for Vec<f64> {
    fn from(c: Categorical) -> Self {
        c.0
    }
}

/// First index of the maximum; NaN entries never win.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Conditional probability table; axis 0 is the child variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt(ArrayD<f64>);

impl Cpt {
    /// Validates that every column is a categorical distribution.
    pub fn new(values: ArrayD<f64>) -> Result<Self> {
        check_nonnegative(&values)?;
        for (column, lane) in values.lanes(Axis(0)).into_iter().enumerate() {
            let sum = lane.sum();
            if sum == 0.0 {
                return Err(Error::ZeroColumn { column });
            }
            if (sum - 1.0).abs() > PROB_TOL.max(lane.len() as f64 * f64::EPSILON) {
                return Err(Error::NotNormalized { sum });
            }
        }
        Ok(Self(values.as_standard_layout().into_owned()))
    }

    /// Wraps an array without checking column sums. Used for defect injection
    /// and for documents that are validated afterwards.
    pub fn from_array_unchecked(values: ArrayD<f64>) -> Self {
        Self(values.as_standard_layout().into_owned())
    }

    pub fn array(&self) -> &ArrayD<f64> {
        &self.0
    }

    pub fn array_mut(&mut self) -> &mut ArrayD<f64> {
        &mut self.0
    }

    pub fn into_array(self) -> ArrayD<f64> {
        self.0
    }

    pub fn shape(&self) -> &[usize] {
        self.0.shape()
    }

    /// Number of parent configurations (columns).
    pub fn n_columns(&self) -> usize {
        self.0.len() / self.0.shape()[0]
    }

    /// Contiguous row-major data; the layout is always standard.
    pub fn as_slice(&self) -> &[f64] {
        self.0
            .as_slice()
            .expect("CPT arrays are kept in standard layout")
    }
}

/// Strictly positive pseudo-counts shadowing a CPT.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletParams(ArrayD<f64>);

impl DirichletParams {
    pub fn new(conc: ArrayD<f64>) -> Result<Self> {
        for (index, &c) in conc.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFiniteInput { index });
            }
            if c <= 0.0 {
                return Err(Error::NonPositiveConcentration { index, value: c });
            }
        }
        Ok(Self(conc.as_standard_layout().into_owned()))
    }

    /// Concentrations proportional to a CPT: `scale * cpt`.
    pub fn from_cpt(cpt: &Cpt, scale: f64) -> Result<Self> {
        Self::new(cpt.array().mapv(|p| p * scale))
    }

    pub fn array(&self) -> &ArrayD<f64> {
        &self.0
    }

    pub(crate) fn array_mut(&mut self) -> &mut ArrayD<f64> {
        &mut self.0
    }

    pub fn shape(&self) -> &[usize] {
        self.0.shape()
    }

    pub fn total(&self) -> f64 {
        self.0.sum()
    }
}

fn check_nonnegative(values: &ArrayD<f64>) -> Result<()> {
    for (index, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteInput { index });
        }
        if v < 0.0 {
            return Err(Error::NegativeEntry { index, value: v });
        }
    }
    Ok(())
}

/// Column-normalizes a nonnegative array along axis 0.
pub fn normalize(raw: ArrayD<f64>) -> Result<Cpt> {
    check_nonnegative(&raw)?;
    let mut out = raw.as_standard_layout().into_owned();
    for (column, mut lane) in out.lanes_mut(Axis(0)).into_iter().enumerate() {
        let sum = lane.sum();
        if sum <= 0.0 {
            return Err(Error::ZeroColumn { column });
        }
        lane.mapv_inplace(|v| v / sum);
    }
    Ok(Cpt(out))
}

/// Normalizes a single nonnegative vector.
pub fn normalize_vec(raw: &[f64]) -> Result<Categorical> {
    let arr =
        ArrayD::from_shape_vec(IxDyn(&[raw.len()]), raw.to_vec()).map_err(|_| Error::EmptyInput)?;
    if raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(Categorical(normalize(arr)?.0.into_raw_vec_and_offset().0))
}

/// `σ(γ·x)` with the max logit subtracted before exponentiation.
pub fn softmax(logits: &[f64], gamma: f64) -> Result<Categorical> {
    if logits.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(index) = logits.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput { index });
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "precision must be positive, got {gamma}"
        )));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logits.iter().map(|&x| gamma * (x - max)).collect();
    Ok(softmax_log_weights(&scaled))
}

/// Normalizes unnormalized log-weights. `-inf` entries receive zero mass;
/// at least one entry must be finite.
pub(crate) fn softmax_log_weights(log_w: &[f64]) -> Categorical {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = log_w.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    Categorical(out)
}

/// `ln σ(x)`, the log of the softmax with unit precision.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&x| x - lse).collect()
}

/// `KL[q || p]`; errors when `q` is not absolutely continuous w.r.t. `p`.
pub fn kl_divergence(q: &Categorical, p: &Categorical) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::SupportMismatch {
            left: q.len(),
            right: p.len(),
        });
    }
    let mut kl = 0.0;
    for (index, (&qi, &pi)) in q.0.iter().zip(&p.0).enumerate() {
        if qi > 0.0 {
            if pi <= 0.0 {
                return Err(Error::AbsoluteContinuityViolation { index });
            }
            kl += qi * (qi.ln() - pi.ln());
        }
    }
    Ok(kl.max(0.0))
}

pub fn entropy(q: &Categorical) -> f64 {
    q.entropy()
}

/// Outer product of vectors; the result has one axis per factor.
pub fn outer_product(factors: &[&[f64]]) -> Result<ArrayD<f64>> {
    if factors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let shape: Vec<usize> = factors.iter().map(|f| f.len()).collect();
    let data = outer_flat(factors);
    Ok(ArrayD::from_shape_vec(IxDyn(&shape), data).expect("shape matches product length"))
}

/// Row-major flattened outer product.
pub(crate) fn outer_flat(factors: &[&[f64]]) -> Vec<f64> {
    let mut data = vec![1.0];
    for f in factors {
        let mut next = Vec::with_capacity(data.len() * f.len());
        for &a in &data {
            next.extend(f.iter().map(|&b| a * b));
        }
        data = next;
    }
    data
}

/// Expected categorical parameters under a Dirichlet: column-normalized concentrations.
pub fn dirichlet_mean(d: &DirichletParams) -> Cpt {
    normalize(d.0.clone()).expect("positive concentrations normalize")
}

/// Inverse-CDF draw. Identical generator state yields the identical index.
pub fn sample(q: &Categorical, rng: &mut SimRng) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in q.0.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_vec(&[2.0, 2.0]).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(
            normalize_vec(&[1.0, 0.0, 0.0]).unwrap().probs(),
            &[1.0, 0.0, 0.0]
        );
        let mut col = vec![0.9139 + 1e-5];
        col.extend(std::iter::repeat_n(0.0861 / 36.0 + 1e-5, 36));
        let c = normalize_vec(&col).unwrap();
        assert!((c.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_errors() {
        let zero = ArrayD::from_shape_vec(IxDyn(&[2, 2]), vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            normalize(zero),
            Err(Error::ZeroColumn { column: 1 })
        ));
        assert!(matches!(
            normalize_vec(&[1.0, -0.5]),
            Err(Error::NegativeEntry { index: 1, .. })
        ));
    }

    #[test]
    fn normalize_columns_of_matrix() {
        let raw = arr2(&[[1.0, 3.0], [1.0, 1.0]]).into_dyn();
        let cpt = normalize(raw).unwrap();
        assert_eq!(cpt.as_slice(), &[0.5, 0.75, 0.5, 0.25]);
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(
            softmax(&[1.0, 1.0, 1.0], 3.0).unwrap().probs(),
            Categorical::uniform(3).probs()
        );
        let s = softmax(&[0.0, 3f64.ln()], 1.0).unwrap();
        assert_abs_diff_eq!(s.probs()[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.probs()[1], 0.75, epsilon = 1e-15);
        let sharp = softmax(&[0.0, 1.0], 1000.0).unwrap();
        assert!(sharp.probs()[1] > 1.0 - 1e-9);
        assert!(matches!(
            softmax(&[0.0, f64::NAN], 1.0),
            Err(Error::NonFiniteInput { index: 1 })
        ));
        assert!(matches!(
            softmax(&[f64::INFINITY], 1.0),
            Err(Error::NonFiniteInput { index: 0 })
        ));
    }

    #[test]
    fn kl_examples() {
        let p = Categorical::new(vec![0.2, 0.8]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let q = Categorical::dirac(2, 0);
        let u = Categorical::uniform(2);
        assert_abs_diff_eq!(kl_divergence(&q, &u).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert!(matches!(
            kl_divergence(&u, &q),
            Err(Error::AbsoluteContinuityViolation { index: 1 })
        ));
        assert!(matches!(
            kl_divergence(&u, &Categorical::uniform(3)),
            Err(Error::SupportMismatch { .. })
        ));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(Categorical::dirac(3, 1).entropy(), 0.0);
        assert_abs_diff_eq!(
            Categorical::uniform(4).entropy(),
            4f64.ln(),
            epsilon = 1e-15
        );
        // -(0.75 ln 0.75 + 0.25 ln 0.25)
        let h = Categorical::new(vec![0.75, 0.25]).unwrap().entropy();
        assert_abs_diff_eq!(h, 0.562_335_144_618_808_6, epsilon = 1e-12);
    }

    #[test]
    fn outer_product_examples() {
        let one = outer_product(&[&[0.2, 0.8]]).unwrap();
        assert_eq!(one.as_slice().unwrap(), &[0.2, 0.8]);
        let two = outer_product(&[&[1.0, 0.0], &[0.3, 0.7]]).unwrap();
        assert_eq!(two.shape(), &[2, 2]);
        assert_eq!(two.as_slice().unwrap(), &[0.3, 0.7, 0.0, 0.0]);
        let u2 = Categorical::uniform(2);
        let u3 = Categorical::uniform(3);
        let u4 = Categorical::uniform(4);
        let three = outer_product(&[u2.probs(), u3.probs(), u4.probs()]).unwrap();
        assert_eq!(three.shape(), &[2, 3, 4]);
        for &v in three.iter() {
            assert_abs_diff_eq!(v, 1.0 / 24.0, epsilon = 1e-15);
        }
        assert!(matches!(outer_product(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn dirichlet_mean_examples() {
        let d = DirichletParams::new(ArrayD::from_shape_vec(IxDyn(&[3]), vec![1.0; 3]).unwrap())
            .unwrap();
        for &p in dirichlet_mean(&d).as_slice() {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
        let d = DirichletParams::new(ArrayD::from_shape_vec(IxDyn(&[2]), vec![8.0, 2.0]).unwrap())
            .unwrap();
        assert_eq!(dirichlet_mean(&d).as_slice(), &[0.8, 0.2]);
        let bad = ArrayD::from_shape_vec(IxDyn(&[2]), vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            DirichletParams::new(bad),
            Err(Error::NonPositiveConcentration { index: 1, .. })
        ));
    }

    #[test]
    fn sample_examples() {
        let dirac = Categorical::dirac(5, 3);
        for seed in 0..20 {
            assert_eq!(sample(&dirac, &mut SimRng::new(seed)), 3);
        }
        let u = Categorical::uniform(2);
        let mut rng = SimRng::new(11);
        let n = 100_000;
        let zeros = (0..n).filter(|_| sample(&u, &mut rng) == 0).count();
        let f = zeros as f64 / n as f64;
        assert!((0.49..=0.51).contains(&f), "frequency {f}");
        let mut a = SimRng::new(5);
        let mut b = SimRng::new(5);
        let q = Categorical::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let xs: Vec<usize> = (0..50).map(|_| sample(&q, &mut a)).collect();
        let ys: Vec<usize> = (0..50).map(|_| sample(&q, &mut b)).collect();
        assert_eq!(xs, ys);
    }

    fn arb_simplex(max_len: usize) -> impl Strategy<Value = Categorical> {
        prop::collection::vec(0.0f64..1.0, 1..=max_len).prop_filter_map("zero sum", |v| {
            if v.iter().sum::<f64>() > 1e-6 {
                normalize_vec(&v).ok()
            } else {
                None
            }
        })
    }

    fn arb_simplex_n(n: usize) -> impl Strategy<Value = Categorical> {
        prop::collection::vec(1e-3f64..1.0, n).prop_map(|v| normalize_vec(&v).unwrap())
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(v in prop::collection::vec(0.01f64..10.0, 1..12)) {
            let once = normalize_vec(&v).unwrap();
            let twice = normalize_vec(once.probs()).unwrap();
            for (a, b) in once.probs().iter().zip(twice.probs()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }

        #[test]
        fn kl_zero_iff_equal((q, p) in (1usize..=6).prop_flat_map(|n| (arb_simplex_n(n), arb_simplex_n(n)))) {
            let positive_p = p.probs().iter().all(|&x| x > 0.0);
            prop_assume!(positive_p);
            let kl = kl_divergence(&q, &p).unwrap();
            let maxdiff = q.probs().iter().zip(p.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if maxdiff == 0.0 {
                prop_assert_eq!(kl, 0.0);
            } else {
                prop_assert!(kl > 0.0 || maxdiff < 1e-12);
            }
            prop_assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
        }

        #[test]
        fn softmax_shift_invariant(
            v in prop::collection::vec(-8.0f64..8.0, 1..10),
            shift in -50.0f64..50.0,
            gamma in 0.1f64..20.0,
        ) {
            // Exact invariance requires the shift to be representable without
            // rounding at the scaled exponent; integer shifts of small logits are.
            let shift = shift.round();
            let v: Vec<f64> = v.iter().map(|x| (x * 8.0).round() / 8.0).collect();
            let gamma = gamma.round().max(1.0);
            let a = softmax(&v, gamma).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            let b = softmax(&shifted, gamma).unwrap();
            prop_assert_eq!(a.probs(), b.probs());
        }

        #[test]
        fn softmax_preserves_argmax(v in prop::collection::vec(-5.0f64..5.0, 2..10), gamma in 0.01f64..50.0) {
            let best = argmax(&v);
            let unique = v.iter().filter(|&&x| x == v[best]).count() == 1;
            prop_assume!(unique);
            prop_assert_eq!(softmax(&v, gamma).unwrap().argmax(), best);
        }

        #[test]
        fn entropy_additive_over_outer(q1 in arb_simplex(5), q2 in arb_simplex(5)) {
            let joint = outer_product(&[q1.probs(), q2.probs()]).unwrap();
            let h = entropy_of(joint.as_slice().unwrap());
            prop_assert!((h - q1.entropy() - q2.entropy()).abs() <= 1e-10);
        }

        #[test]
        fn entropy_bounded(q in arb_simplex(8)) {
            let h = q.entropy();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (q.len() as f64).ln() + 1e-12);
        }
    }
}
