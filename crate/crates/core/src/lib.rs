//! Synthesis of shallow stair-patterned quantum circuits that prepare a
//! target many-qubit state, given as a matrix product state, from |0…0⟩.
//!
//! The crate covers the full pipeline:
//!
//! * dense complex tensor algebra and factorizations ([`tensor`], [`linalg`]),
//! * matrix product states with canonical forms, gate application and
//!   entanglement diagnostics ([`mps`]),
//! * spin-chain Hamiltonians with exact and DMRG ground-state solvers for
//!   producing physically interesting targets ([`hamiltonian`], [`dmrg`]),
//! * the stair circuit itself — layers of two-qubit gates parametrized by
//!   unconstrained latent matrices that are projected onto the unitary
//!   group ([`circuit`], [`evolve`]),
//! * gradient-based training of those latents against a log-fidelity loss,
//!   including layer growth ([`optimizer`]),
//! * experiment orchestration used by the `stairprep` binary
//!   ([`experiment`]).

extern crate blas_src;

pub mod circuit;
pub mod dmrg;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod hamiltonian;
pub mod io;
pub mod linalg;
pub mod mps;
pub mod optimizer;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
