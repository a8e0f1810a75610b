//! Differentiable relaxations of top-k row selection.
//!
//! Given candidate rows `E` (n×d) and scores `v` (n), both operators return a
//! k×d matrix approximating the k highest-scoring rows, plus a tape for the
//! backward pass:
//!
//! * [`IterativeTopK`]: k peaked-softmax passes over all scores, `O(k n d)`.
//! * [`HalvingTopK`]: sort-and-pair tournament rounds with a boosted two-way
//!   softmax, `log2(n/k)` rounds and `O(n d)` work in total.
//!
//! [`exact_topk`], [`nccs`] and [`gradcheck_operator`] are the reference
//! selection, quality metric and gradient oracle used to evaluate them.

pub mod error;
pub mod gradcheck;
pub mod halving;
pub mod instance;
pub mod iterative;
pub mod matrix;
pub mod operator;
pub mod oracle;
pub mod softmax;

pub use error::{Error, Result};
pub use gradcheck::{finite_diff_grad, gradcheck_operator, Coordinate, GradCheckConfig, GradCheckReport};
pub use halving::{HalvingTape, HalvingTopK};
pub use instance::{generate_instance, Instance, InstanceConfig};
pub use iterative::{IterativeTape, IterativeTopK};
pub use matrix::{GradientPair, Matrix, Scores};
pub use operator::{SoftSelection, SoftTopK, Tape};
pub use oracle::{exact_topk, nccs};
pub use softmax::{boosted_softmax, boosted_softmax_backward, PeakedKernel, SoftmaxMode};
