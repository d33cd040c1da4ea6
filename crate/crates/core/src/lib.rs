//! Deciding and synthesizing single-copy LOCC conversions between bipartite
//! quantum states.
//!
//! - [`majorization`]: prefix/tail-sum orders on Schmidt vectors.
//! - [`bipartite`]: pure and mixed states, Schmidt decomposition, fidelity.
//! - [`pure_protocols`]: exact, probabilistic and approximate pure-to-pure
//!   conversions with executable protocol certificates ([`protocol`]).
//! - [`ensemble_protocols`]: pure state to ensemble conversions through a
//!   precursor state and one commuting-Kraus measurement.
//! - [`mixed_membership`]: decomposition search for the exact, probabilistic
//!   and approximate reachable sets of mixed states.
//! - [`qubit_pair`]: closed forms for two qubits.
//! - [`positivity_maps`]: sampling checks of positivity of linear maps on
//!   the reachable sets.

#![forbid(unsafe_code)]

pub mod bipartite;
pub mod ensemble_protocols;
pub mod error;
pub mod io;
pub mod linalg;
pub mod majorization;
pub mod mixed_membership;
pub mod parallel;
pub mod positivity_maps;
pub mod protocol;
pub mod pure_protocols;
pub mod qubit_pair;
pub mod search;

pub use bipartite::{DensityMatrix, Dims, Ensemble, Party, PureState, SchmidtDecomposition};
pub use error::{Error, Result};
pub use majorization::SchmidtVector;

/// Global comparison tolerance for eigenvalue, normalization and majorization checks.
pub const TOL: f64 = 1e-9;
