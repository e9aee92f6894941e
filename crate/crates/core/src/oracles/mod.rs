//! Reference computations that do not go through the Galerkin path.

pub mod counterexample;
pub mod fd;
pub mod neumann;

pub use counterexample::shift_counterexample_norms;
pub use fd::{fd_eigenvalues_in_window, fd_spectrum, Boundary, FdGrid, FdSpectrum};
pub use neumann::{geometric_rate, neumann_resolvent_check, NeumannReport};
