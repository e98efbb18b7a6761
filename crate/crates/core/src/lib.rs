//! Probabilistic cellular automaton (PCA) dynamics for the two-dimensional
//! Ising model.
//!
//! The crate covers three kernels (reversible with plus or periodic boundary
//! conditions, irreversible on the torus), exact enumeration of their
//! stationary measures on small boxes, the Peierls contour representation
//! used to control `π_G(f^k)`, a Kotecký–Preiss convergence checker, and a
//! parallel, bit-reproducible sweep sampler for large lattices.

pub mod contours;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod mc;
pub mod measures;
pub mod rng;
pub mod spins;

pub use error::{Error, Result};
pub use hamiltonian::{KernelKind, ModelParams};
pub use lattice::{Boundary, Geometry};
pub use spins::SpinConfig;
