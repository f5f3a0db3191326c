//! Numerical audit of Leggett-type inequalities on the two-qubit marginals
//! of the four-qubit GHZ state.
//!
//! Qubit 1 is the most significant bit of a basis index; Pauli index 0 is the
//! identity and 1, 2, 3 are X, Y, Z.

pub mod analysis;
pub mod error;
pub mod inequalities;
pub mod lambda;
pub mod nelder_mead;
pub mod pauli;
pub mod search;
pub mod settings;
pub mod verify;

pub use error::{Error, Result};
pub use inequalities::{Inequality, InequalityVerdict, Mode};
pub use lambda::{LambdaAssignment, LambdaModel};
pub use pauli::{correlation_tensor, ghz_state, CorrelationTensor, Correlator, DensityOperator, PureState};
pub use settings::{BlochVector, SettingSet};
