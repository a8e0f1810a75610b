//! The soft top-k operator contract.
//!
//! An operator maps `(E: n×d, v: n, k)` to a k×d soft selection and records a
//! [`Tape`] from which the output can be replayed and gradients computed.

use crate::error::{integrity, Result};
use crate::halving::HalvingTape;
use crate::iterative::IterativeTape;
use crate::matrix::{GradientPair, Matrix, Scores};

/// Forward result: the k×d output and the tape that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSelection {
    pub output: Matrix,
    pub tape: Tape,
}

/// Recorded intermediates of one forward pass, tagged by operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Tape {
    Iterative(IterativeTape),
    Halving(HalvingTape),
}

impl Tape {
    pub fn kind(&self) -> &'static str {
        match self {
            Tape::Iterative(_) => "iterative",
            Tape::Halving(_) => "halving",
        }
    }

    /// Recomputes the forward output from the tape alone.
    pub fn replay(&self) -> Result<Matrix> {
        match self {
            Tape::Iterative(t) => t.replay(),
            Tape::Halving(t) => t.replay(),
        }
    }

    pub fn as_iterative(&self) -> Result<&IterativeTape> {
        match self {
            Tape::Iterative(t) => Ok(t),
            other => Err(integrity(format!("expected an iterative tape, got a {} tape", other.kind()))),
        }
    }

    pub fn as_halving(&self) -> Result<&HalvingTape> {
        match self {
            Tape::Halving(t) => Ok(t),
            other => Err(integrity(format!("expected a halving tape, got a {} tape", other.kind()))),
        }
    }
}

/// A differentiable relaxation of top-k row selection.
pub trait SoftTopK: Sync {
    fn name(&self) -> &'static str;

    fn forward(&self, embeddings: &Matrix, scores: &Scores, k: usize) -> Result<SoftSelection>;

    /// Gradients of `L` with respect to `(E, v)` given `d_out = ∂L/∂output`.
    fn backward(&self, tape: &Tape, d_out: &Matrix) -> Result<GradientPair>;
}

impl<T: SoftTopK + ?Sized> SoftTopK for &T {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn forward(&self, embeddings: &Matrix, scores: &Scores, k: usize) -> Result<SoftSelection> {
        (**self).forward(embeddings, scores, k)
    }

    fn backward(&self, tape: &Tape, d_out: &Matrix) -> Result<GradientPair> {
        (**self).backward(tape, d_out)
    }
}
