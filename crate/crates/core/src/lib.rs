//! Finite-dimensional approximation of the discrete spectrum of families
//! `M^λ = A + K^λ` of self-adjoint operators with a spectral gap.
//!
//! The unperturbed operator is `diag(−Δ + 1 + m, Δ − 1 − m)` on the circle or,
//! after harmonic confinement `ε x²`, on the real line. Sections onto the
//! first `n` eigenfunctions of each block give symmetric matrices whose
//! eigenvalues inside the gap window approximate the discrete spectrum; the
//! [`sweep`] module measures how those window spectra move with `λ`, `n`
//! and `ε` in the Hausdorff metric.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod error;
pub mod galerkin;
pub mod model;
pub mod oracles;
pub mod perturbation;
pub mod quadrature;
pub mod spectral;
pub mod sweep;

pub use eigen::{eigenvalues_symmetric, symmetric_eigen, SymmetricEigen};
pub use error::{Error, Result};
pub use galerkin::{assemble_hat, assemble_truncated, symmetrize, TruncatedOperator};
pub use model::{BasisSpec, BlockSign, Blocks, Confinement, ModelSpec, Space};
pub use perturbation::{
    Bases, Coupling, Factor, Interval, Kernel, PerturbationSpec, Profile, Strength, Support, VelocityProfile,
    VelocityWeight,
};
pub use quadrature::QuadratureSpec;
pub use spectral::{gap_slice, hausdorff_distance, Crossing, GapWindow, SpectrumSlice};
pub use sweep::{Problem, SweepResult};

pub use nalgebra::DMatrix;
