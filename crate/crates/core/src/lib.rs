//! Steepest-entropy-ascent (SEA) relaxation of the 2D toric code.
//!
//! The crate is `no_std` (it needs `alloc`) and is organised bottom-up:
//!
//! - [`hermitian`]: dense complex Hermitian operators, density matrices with a
//!   cached spectral decomposition, kernel-aware matrix functions, Pauli
//!   embeddings, partial trace / transpose and the trace norm.
//! - [`lattice`]: torus incidence structure, star/plaquette stabilizers, the
//!   toric Hamiltonian, its degenerate ground-state density matrix and the
//!   seeded perturbation recipe used to prepare initial states.
//! - [`engine`]: thermodynamic moments, the SEA dissipator (simplified and
//!   Gram-determinant forms), isolated / reservoir right-hand sides, the local
//!   dissipator of a reduced state and a fixed-step RK4 integrator.
//! - [`measures`]: entropy, relative entropy, logarithmic negativity,
//!   magnetization, coherent information, geometric entropy, Gibbs states and
//!   the equilibrium energy–entropy curve.
//!
//! Qubit 0 is the most significant tensor factor everywhere: basis index `k`
//! of an `n`-qubit register has qubit `q` in state `(k >> (n - 1 - q)) & 1`.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod engine;
pub mod error;
pub mod hermitian;
pub mod lattice;
mod math;
pub mod measures;

pub use error::{Error, Result};
pub use hermitian::{DensityMatrix, Operator, Spectrum, C64};
