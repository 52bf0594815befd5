//! Sparse Pauli-propagation simulator for Heisenberg-picture dynamics of
//! qubit chains, with Top-K truncation and operator-entropy diagnostics.

pub mod analytics;
pub mod hamiltonian;
pub mod oracle;
pub mod output;
pub mod pauli;
pub mod propagation;
pub mod sparse;
pub mod verify;

pub use hamiltonian::{build_xxz_chain, Boundary, Hamiltonian, HamiltonianError};
pub use pauli::{Pauli, PauliError, PauliWord, Phase};
pub use propagation::{
    backpropagate, staggered_magnetization, HeisenbergEvolution, MagnetizationMode, ProductState,
    PropagationError, RunConfig, TrajectoryRecord,
};
pub use sparse::{PauliSum, SparseError, TruncationKind, TruncationPolicy};
