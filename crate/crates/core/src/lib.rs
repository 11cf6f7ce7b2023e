//! Contraction calculus for multiple Wiener-Itô and Wigner integrals of
//! step-function kernels on `[0,1]^p`.
//!
//! Kernels are dense tensors over a uniform `m`-grid. Every quantity the
//! moment formulas need (contractions, symmetrizations, chaos products,
//! iterated contractions over the index sets `A_k ⊇ B_k = C_k ∪ E_k`) is
//! computed either exactly over the rationals or in binary64, depending on
//! the [`Scalar`] the kernel is built over.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod budget;
pub mod chaos;
pub mod combinatorics;
pub mod contract;
mod error;
pub mod family;
mod index;
pub mod kernel;
pub mod moments;
pub mod network;
pub mod scalar;
mod tensor;
pub mod wick;

pub use budget::{entry_budget, set_entry_budget, DEFAULT_ENTRY_BUDGET};
pub use chaos::{moment_via_expansion, ChaosExpansion};
pub use combinatorics::{ContractionTuple, TupleClass};
pub use error::{Error, ErrorKind, Result};
pub use family::{family_kernel, Family};
pub use kernel::{normalize_variance, GridKernel, Model, ScaledKernel};
pub use moments::{
    classical_fourth_identity, classical_moment, contraction_profile, convergence_report,
    fourth_moment_gap, free_fourth_identity, free_moment, ContractionProfile, ConvergenceRow,
    Evaluation, MomentPath, MomentReport,
};
pub use scalar::{NumericMode, Rational, Scalar};
pub use wick::wick_oracle_moment;
