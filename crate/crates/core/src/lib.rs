// SPDX-License-Identifier: Apache-2.0

//! Classical diagonalization of qubit Hamiltonians written as sums of Pauli
//! strings.
//!
//! A Hamiltonian `H = Σ c_j Q_j` is diagonalized by searching for a matrix
//! `K = Σ r_j e^{iθ_j} P_j` over a fixed list of Pauli strings (the ansatz)
//! that makes `K†HK` diagonal while keeping `K†K` proportional to the
//! identity. Both conditions are expressed as a single nonnegative cost
//! in the Pauli basis, minimized by gradient descent on the unit sphere in
//! `r` (or by a randomized coordinate variant with incremental updates).
//!
//! Module map:
//! - [`pauli`]: symplectic Pauli strings and phases.
//! - [`operator`]: sparse Pauli sums and the support sets of the cost.
//! - [`cost`]: the cost, orthogonality coefficients and exact gradient.
//! - [`optimizer`]: full-gradient and random-coordinate descent.
//! - [`models`]: XXZ, Hubbard, random `UDU†` and exponential-algebra families.
//! - [`verify`]: dense ground truth, error bounds and Lie-algebra closure.
//! - [`config`]: the run configuration consumed by the CLI.

pub mod config;
pub mod cost;
pub mod error;
pub mod models;
pub mod operator;
pub mod optimizer;
pub mod pauli;
pub mod verify;

pub use cost::{CostModel, CostReport, KParams};
pub use error::{Error, Result};
pub use operator::{PauliSum, SupportSets};
pub use optimizer::{LrSchedule, OptConfig, OptTrace, PenaltyWeight, StepScale, TraceRecord};
pub use pauli::{PauliString, Phase};
pub use verify::{DenseOperator, DiagReport};
