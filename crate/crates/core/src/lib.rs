//! Pfaffian point processes on finite ground sets built from covariance
//! operators on the doubled one-particle space `l2(X) + l2(X)`.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is pure
//! computation: Pfaffians and Fredholm Pfaffians, the covariance-to-kernel
//! map, brute-force measure tables, an explicit Fock-space oracle, conditional
//! kernels and an exact sequential sampler, the Koopman/intertwiner checks,
//! and the concrete model families (KMS states, orthogonal polynomial
//! ensembles, Schur and shifted Schur measures).
//!
//! IO, file formats and the command line live in the `pfpp` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod conditioning;
pub mod covariance;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod measure;
pub mod models;
pub mod perfectness;
pub mod skewalg;
pub mod tol;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

/// Exact site label (integers and half-integers without float drift).
pub type Label = num_rational::Ratio<i64>;
