use thiserror::Error;

use crate::hamiltonian::KernelKind;
use crate::lattice::{Bond, Boundary};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("side {side} is not allowed for {boundary} boundary conditions (minimum {min})")]
    InvalidSide {
        side: usize,
        boundary: Boundary,
        min: usize,
    },

    #[error("side {side} exceeds the largest supported side {max}")]
    SideTooLarge { side: usize, max: usize },

    #[error("bond {0:?} is not part of this lattice")]
    UnknownBond(Bond),

    #[error("kernel `{kind}` cannot run on a lattice with {boundary} boundary conditions")]
    KindMismatch { kind: KernelKind, boundary: Boundary },

    #[error("{what} enumerates 2^{sites} configurations; the limit is 2^{limit}")]
    TooLarge {
        what: &'static str,
        sites: usize,
        limit: usize,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("floating-point overflow in {0}; use the log-domain variant")]
    Overflow(&'static str),

    #[error("parse error: {0}")]
    Parse(String),
}
