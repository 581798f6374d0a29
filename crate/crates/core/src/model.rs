//! The factored generative model `<A, B, c, d>` and its two elementary
//! applications: observation prediction and action-conditioned propagation.
//!
//! Shapes follow the CPT convention of [`crate::categorical`]:
//!
//! * `A[m]`: `|O^m| x |D^1| x ... x |D^F|`
//! * `B[f]`: `|D^f| x |D^f| x |U^f|` (next state, previous state, control)
//! * `c[m]`: raw log-preference weights of length `|O^m|`
//! * `d[f]`: initial prior over `D^f`
//!
//! The joint hidden state is flattened row-major over factors in declaration order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::categorical::{outer_flat, Categorical, Cpt, DirichletParams, PROB_TOL};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub cardinality: usize,
    /// Number of control states acting on this factor; 1 means uncontrollable.
    pub control_cardinality: usize,
    pub learnable_transitions: bool,
    /// Optional human-readable state labels.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

impl FactorSpec {
    pub fn new(
        name: &str,
        cardinality: usize,
        control_cardinality: usize,
        learnable: bool,
    ) -> Self {
        Self {
            name: name.to_string(),
            cardinality,
            control_cardinality,
            learnable_transitions: learnable,
            labels: Vec::new(),
        }
    }

    pub fn with_labels<S: AsRef<str>>(mut self, labels: &[S]) -> Self {
        self.labels = labels.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalitySpec {
    pub name: String,
    pub cardinality: usize,
    pub learnable_likelihood: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

impl ModalitySpec {
    pub fn new(name: &str, cardinality: usize, learnable: bool) -> Self {
        Self {
            name: name.to_string(),
            cardinality,
            learnable_likelihood: learnable,
            labels: Vec::new(),
        }
    }

    pub fn with_labels<S: AsRef<str>>(mut self, labels: &[S]) -> Self {
        self.labels = labels.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }
}

/// Per-factor posterior (or prior) at one time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief {
    pub factors: Vec<Categorical>,
}

impl Belief {
    pub fn new(factors: Vec<Categorical>) -> Self {
        Self { factors }
    }

    pub fn factor(&self, f: usize) -> &Categorical {
        &self.factors[f]
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// Row-major joint of the mean-field product.
    pub fn joint(&self) -> Vec<f64> {
        let slices: Vec<&[f64]> = self.factors.iter().map(|q| q.probs()).collect();
        outer_flat(&slices)
    }

    pub fn max_abs_diff(&self, other: &Belief) -> f64 {
        self.factors
            .iter()
            .zip(&other.factors)
            .flat_map(|(a, b)| a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// One invariant violation found by [`GenerativeModel::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Cardinality {
        what: String,
    },
    Shape {
        array: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    Normalization {
        array: String,
        column: usize,
        sum: f64,
    },
    InvalidEntry {
        array: String,
        index: usize,
        value: f64,
    },
    ControlMapGap {
        action: String,
        factor: String,
    },
    ControlIndexOutOfRange {
        action: String,
        factor: String,
        index: usize,
    },
    Count {
        what: String,
        expected: usize,
        actual: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cardinality { what } => write!(f, "zero cardinality: {what}"),
            Violation::Shape {
                array,
                expected,
                actual,
            } => write!(f, "{array}: expected shape {expected:?}, found {actual:?}"),
            Violation::Normalization { array, column, sum } => {
                write!(f, "{array}: column {column} sums to {sum}")
            }
            Violation::InvalidEntry {
                array,
                index,
                value,
            } => {
                write!(f, "{array}: invalid entry {value} at flat index {index}")
            }
            Violation::ControlMapGap { action, factor } => {
                write!(
                    f,
                    "control map has no entry for action {action} on factor {factor}"
                )
            }
            Violation::ControlIndexOutOfRange {
                action,
                factor,
                index,
            } => write!(
                f,
                "action {action} maps factor {factor} to control index {index}, out of range"
            ),
            Violation::Count {
                what,
                expected,
                actual,
            } => write!(f, "{what}: expected {expected}, found {actual}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerativeModel {
    pub factors: Vec<FactorSpec>,
    pub modalities: Vec<ModalitySpec>,
    /// Names of the global actions; indices into this list are the action ids.
    pub actions: Vec<String>,
    pub a: Vec<Cpt>,
    pub b: Vec<Cpt>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Categorical>,
    pub dirichlet_a: Vec<Option<DirichletParams>>,
    pub dirichlet_b: Vec<Option<DirichletParams>>,
    pub dirichlet_d: Vec<Option<DirichletParams>>,
    /// `control_map[action][factor]` is the control index seen by that factor.
    pub control_map: Vec<Vec<usize>>,
}

impl GenerativeModel {
    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn n_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn state_dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.cardinality).collect()
    }

    /// Number of joint hidden-state configurations.
    pub fn joint_size(&self) -> usize {
        self.factors.iter().map(|f| f.cardinality).product()
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    pub fn control_index(&self, action: usize, factor: usize) -> Result<usize> {
        self.control_map
            .get(action)
            .ok_or(Error::UnknownAction(action))?
            .get(factor)
            .copied()
            .ok_or(Error::UnknownAction(action))
    }

    /// The initial prior `d` as a belief.
    pub fn initial_belief(&self) -> Belief {
        Belief::new(self.d.clone())
    }

    pub fn validate(&self) -> ValidationReport {
        let mut out = Vec::new();
        let dims = self.state_dims();

        for f in &self.factors {
            if f.cardinality == 0 {
                out.push(Violation::Cardinality {
                    what: format!("factor {}", f.name),
                });
            }
            if f.control_cardinality == 0 {
                out.push(Violation::Cardinality {
                    what: format!("controls of factor {}", f.name),
                });
            }
        }
        for m in &self.modalities {
            if m.cardinality == 0 {
                out.push(Violation::Cardinality {
                    what: format!("modality {}", m.name),
                });
            }
        }
        let counts = [
            ("A arrays", self.modalities.len(), self.a.len()),
            ("c vectors", self.modalities.len(), self.c.len()),
            (
                "dirichlet_a entries",
                self.modalities.len(),
                self.dirichlet_a.len(),
            ),
            ("B arrays", self.factors.len(), self.b.len()),
            ("d vectors", self.factors.len(), self.d.len()),
            (
                "dirichlet_b entries",
                self.factors.len(),
                self.dirichlet_b.len(),
            ),
            (
                "dirichlet_d entries",
                self.factors.len(),
                self.dirichlet_d.len(),
            ),
        ];
        for (what, expected, actual) in counts {
            if expected != actual {
                out.push(Violation::Count {
                    what: what.to_string(),
                    expected,
                    actual,
                });
            }
        }
        if !out.is_empty() {
            return ValidationReport { violations: out };
        }

        for (m, spec) in self.modalities.iter().enumerate() {
            let mut expected = vec![spec.cardinality];
            expected.extend(&dims);
            let name = format!("A[{}]", spec.name);
            check_cpt(&name, &self.a[m], &expected, &mut out);
            if let Some(conc) = &self.dirichlet_a[m] {
                check_shape(
                    &format!("dirichlet_a[{}]", spec.name),
                    conc.shape(),
                    &expected,
                    &mut out,
                );
            }
            if self.c[m].len() != spec.cardinality {
                out.push(Violation::Shape {
                    array: format!("c[{}]", spec.name),
                    expected: vec![spec.cardinality],
                    actual: vec![self.c[m].len()],
                });
            }
            if let Some(index) = self.c[m].iter().position(|x| !x.is_finite()) {
                out.push(Violation::InvalidEntry {
                    array: format!("c[{}]", spec.name),
                    index,
                    value: self.c[m][index],
                });
            }
        }
        for (f, spec) in self.factors.iter().enumerate() {
            let expected = vec![spec.cardinality, spec.cardinality, spec.control_cardinality];
            let name = format!("B[{}]", spec.name);
            check_cpt(&name, &self.b[f], &expected, &mut out);
            if let Some(conc) = &self.dirichlet_b[f] {
                check_shape(
                    &format!("dirichlet_b[{}]", spec.name),
                    conc.shape(),
                    &expected,
                    &mut out,
                );
            }
            let d = self.d[f].probs();
            if d.len() != spec.cardinality {
                out.push(Violation::Shape {
                    array: format!("d[{}]", spec.name),
                    expected: vec![spec.cardinality],
                    actual: vec![d.len()],
                });
            } else {
                check_columns(&format!("d[{}]", spec.name), d, 1, &mut out);
            }
            if let Some(conc) = &self.dirichlet_d[f] {
                check_shape(
                    &format!("dirichlet_d[{}]", spec.name),
                    conc.shape(),
                    &[spec.cardinality],
                    &mut out,
                );
            }
        }
        if self.control_map.len() != self.actions.len() {
            out.push(Violation::Count {
                what: "control map rows".to_string(),
                expected: self.actions.len(),
                actual: self.control_map.len(),
            });
        }
        for (u, action) in self.actions.iter().enumerate() {
            let row = self.control_map.get(u);
            for (f, spec) in self.factors.iter().enumerate() {
                match row.and_then(|r| r.get(f)) {
                    None => out.push(Violation::ControlMapGap {
                        action: action.clone(),
                        factor: spec.name.clone(),
                    }),
                    Some(&idx) if idx >= spec.control_cardinality => {
                        out.push(Violation::ControlIndexOutOfRange {
                            action: action.clone(),
                            factor: spec.name.clone(),
                            index: idx,
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        ValidationReport { violations: out }
    }

    /// `Σ_d A[m][o, d] Q(d)` under the mean-field joint.
    pub fn predict_observation(&self, belief: &Belief, modality: usize) -> Result<Categorical> {
        if modality >= self.modalities.len() {
            return Err(Error::UnknownModality(modality));
        }
        self.check_belief(belief)?;
        Ok(Categorical::from_vec_unchecked(
            self.predict_from_joint(modality, &belief.joint()),
        ))
    }

    /// Observation prediction from an already-flattened joint state density.
    pub fn predict_from_joint(&self, modality: usize, joint: &[f64]) -> Vec<f64> {
        let a = self.a[modality].as_slice();
        let n = joint.len();
        a.chunks_exact(n)
            .map(|row| row.iter().zip(joint).map(|(x, q)| x * q).sum())
            .collect()
    }

    /// `next^f[j] = Σ_i B^f[j, i, u_f] belief^f[i]` for each factor.
    pub fn propagate(&self, belief: &Belief, action: usize) -> Result<Belief> {
        if action >= self.actions.len() {
            return Err(Error::UnknownAction(action));
        }
        self.check_belief(belief)?;
        let factors = (0..self.factors.len())
            .map(|f| {
                let u = self.control_map[action][f];
                Categorical::from_vec_unchecked(self.transition(f, belief.factors[f].probs(), u))
            })
            .collect();
        Ok(Belief::new(factors))
    }

    pub(crate) fn transition(&self, factor: usize, q: &[f64], control: usize) -> Vec<f64> {
        let b = self.b[factor].as_slice();
        let n = q.len();
        let n_u = self.factors[factor].control_cardinality;
        (0..n)
            .map(|j| {
                let row = &b[j * n * n_u..(j + 1) * n * n_u];
                q.iter()
                    .enumerate()
                    .map(|(i, &qi)| row[i * n_u + control] * qi)
                    .sum()
            })
            .collect()
    }

    fn check_belief(&self, belief: &Belief) -> Result<()> {
        if belief.factors.len() != self.factors.len() {
            return Err(Error::LengthMismatch {
                expected: self.factors.len(),
                actual: belief.factors.len(),
            });
        }
        for (q, spec) in belief.factors.iter().zip(&self.factors) {
            if q.len() != spec.cardinality {
                return Err(Error::SupportMismatch {
                    left: spec.cardinality,
                    right: q.len(),
                });
            }
        }
        Ok(())
    }
}

fn check_shape(name: &str, actual: &[usize], expected: &[usize], out: &mut Vec<Violation>) -> bool {
    if actual != expected {
        out.push(Violation::Shape {
            array: name.to_string(),
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        });
        return false;
    }
    true
}

fn check_cpt(name: &str, cpt: &Cpt, expected: &[usize], out: &mut Vec<Violation>) {
    if !check_shape(name, cpt.shape(), expected, out) {
        return;
    }
    let stride = cpt.n_columns();
    check_columns(name, cpt.as_slice(), stride, out);
}

/// Checks a row-major array whose child axis is outermost with `stride` columns.
fn check_columns(name: &str, data: &[f64], stride: usize, out: &mut Vec<Violation>) {
    if let Some((index, &value)) = data
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        out.push(Violation::InvalidEntry {
            array: name.to_string(),
            index,
            value,
        });
        return;
    }
    let rows = data.len() / stride;
    for column in 0..stride {
        let sum: f64 = (0..rows).map(|r| data[r * stride + column]).sum();
        if (sum - 1.0).abs() > PROB_TOL.max(rows as f64 * f64::EPSILON) {
            out.push(Violation::Normalization {
                array: name.to_string(),
                column,
                sum,
            });
        }
    }
}
