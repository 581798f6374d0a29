//! Discrete active inference over factored POMDPs, plus a railway-bridge
//! active digital twin built on top of it.

pub mod bridge;
pub mod categorical;
pub mod document;
pub mod error;
pub mod harness;
pub mod inference;
pub mod learning;
pub mod model;
pub mod planning;
pub mod rng;

pub use categorical::{Categorical, Cpt, DirichletParams};
pub use error::{Error, Result};
pub use model::{Belief, FactorSpec, GenerativeModel, ModalitySpec, ValidationReport, Violation};
pub use rng::SimRng;
