//! Iterative soft top-k: `k` peaked-softmax passes over the whole score
//! vector, masking the current maximum after each pass.
//!
//! Step `i` on a working copy `u` of the scores:
//!
//! ```text
//! m = max(u), a = argmax(u)          (lowest index on ties)
//! p = peaked(-(u - m)^2)
//! out_i = p^T E
//! u_a = mask                         (default -10000)
//! ```
//!
//! Cost is `O(k n d)`. The backward pass treats `a` as locally constant and
//! routes the gradient of `m` to `u_a`; masked slots are constants.

use crate::error::{integrity, size, Error, Result};
use crate::matrix::{check_pair, GradientPair, Matrix, Scores};
use crate::operator::{SoftSelection, SoftTopK, Tape};
use crate::softmax::{argmax_first, PeakedKernel};

/// Value written over the selected score after each step.
pub const DEFAULT_MASK_VALUE: f64 = -10000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeTopK {
    pub kernel: PeakedKernel,
    pub mask_value: f64,
}

impl Default for IterativeTopK {
    fn default() -> Self {
        IterativeTopK { kernel: PeakedKernel::verbatim(), mask_value: DEFAULT_MASK_VALUE }
    }
}

impl IterativeTopK {
    pub fn new(kernel: PeakedKernel) -> Self {
        IterativeTopK { kernel, ..Default::default() }
    }

    pub fn with_mask_value(mut self, mask_value: f64) -> Self {
        self.mask_value = mask_value;
        self
    }
}

/// One selection step as recorded by the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativeStep {
    /// Kernel output `p_i`, one weight per candidate.
    pub weights: Vec<f64>,
    /// Index masked at the end of the step.
    pub masked: usize,
    /// Working-copy maximum before masking.
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeTape {
    pub embeddings: Matrix,
    /// Scores as passed to the forward, before any masking.
    pub scores: Vec<f64>,
    pub kernel: PeakedKernel,
    pub mask_value: f64,
    pub k: usize,
    pub steps: Vec<IterativeStep>,
}

impl IterativeTape {
    /// Checks internal consistency, including that the recorded argmax and
    /// max sequence is the one the recorded scores produce.
    pub fn validate(&self) -> Result<()> {
        let n = self.scores.len();
        if self.embeddings.rows() != n {
            return Err(integrity(format!("embeddings have {} rows, scores {n}", self.embeddings.rows())));
        }
        if self.steps.len() != self.k {
            return Err(integrity(format!("expected {} steps, found {}", self.k, self.steps.len())));
        }
        let mut working = self.scores.clone();
        for (i, step) in self.steps.iter().enumerate() {
            if step.weights.len() != n {
                return Err(integrity(format!(
                    "step {i} has {} weights for {n} candidates",
                    step.weights.len()
                )));
            }
            let a = argmax_first(&working);
            if step.masked != a || step.max.to_bits() != working[a].to_bits() {
                return Err(integrity(format!("step {i} does not match the recorded scores")));
            }
            working[a] = self.mask_value;
        }
        Ok(())
    }

    pub fn replay(&self) -> Result<Matrix> {
        self.validate()?;
        let mut out = Matrix::zeros(self.k, self.embeddings.cols());
        for (i, step) in self.steps.iter().enumerate() {
            combine_rows(&step.weights, &self.embeddings, out.row_mut(i));
        }
        Ok(out)
    }
}

/// `row = Σ_j w_j E_j`.
fn combine_rows(weights: &[f64], e: &Matrix, row: &mut [f64]) {
    row.fill(0.0);
    for (&w, src) in weights.iter().zip(e.row_iter()) {
        if w == 0.0 {
            continue;
        }
        for (o, &x) in row.iter_mut().zip(src) {
            *o += w * x;
        }
    }
}

fn peaked_input(working: &[f64], max: f64) -> Vec<f64> {
    working.iter().map(|&u| -(u - max) * (u - max)).collect()
}

impl SoftTopK for IterativeTopK {
    fn name(&self) -> &'static str {
        "iterative"
    }

    fn forward(&self, embeddings: &Matrix, scores: &Scores, k: usize) -> Result<SoftSelection> {
        check_pair(embeddings, scores)?;
        self.kernel.validate()?;
        let n = scores.len();
        if k < 1 || k > n {
            return Err(size(format!("k must satisfy 1 <= k <= n, got k={k} n={n}")));
        }
        if n < self.kernel.min_len() {
            return Err(size(format!(
                "{} peaked softmax needs n >= {}, got {n}",
                self.kernel.mode(),
                self.kernel.min_len()
            )));
        }
        if let Some(i) = scores.as_slice().iter().position(|&s| s <= self.mask_value) {
            return Err(Error::Config(format!(
                "score {i} ({}) is not above the mask value {}",
                scores[i], self.mask_value
            )));
        }

        let mut working = scores.as_slice().to_vec();
        let mut output = Matrix::zeros(k, embeddings.cols());
        let mut steps = Vec::with_capacity(k);
        for i in 0..k {
            let a = argmax_first(&working);
            let max = working[a];
            let weights = self.kernel.apply(&peaked_input(&working, max))?;
            combine_rows(&weights, embeddings, output.row_mut(i));
            working[a] = self.mask_value;
            steps.push(IterativeStep { weights, masked: a, max });
        }

        let tape = IterativeTape {
            embeddings: embeddings.clone(),
            scores: scores.as_slice().to_vec(),
            kernel: self.kernel,
            mask_value: self.mask_value,
            k,
            steps,
        };
        Ok(SoftSelection { output, tape: Tape::Iterative(tape) })
    }

    fn backward(&self, tape: &Tape, d_out: &Matrix) -> Result<GradientPair> {
        let tape = tape.as_iterative()?;
        tape.validate()?;
        let e = &tape.embeddings;
        let (n, d) = e.shape();
        if d_out.shape() != (tape.k, d) {
            return Err(size(format!(
                "upstream gradient is {:?}, output was {:?}",
                d_out.shape(),
                (tape.k, d)
            )));
        }

        let mut d_e = Matrix::zeros(n, d);
        let mut d_v = vec![0.0; n];
        let mut working = tape.scores.clone();
        let mut masked = vec![false; n];
        let mut d_weights = vec![0.0; n];

        for (i, step) in tape.steps.iter().enumerate() {
            let g = d_out.row(i);
            for j in 0..n {
                let w = step.weights[j];
                let (src, dst) = (e.row(j), d_e.row_mut(j));
                let mut acc = 0.0;
                for c in 0..d {
                    acc += g[c] * src[c];
                    dst[c] += w * g[c];
                }
                d_weights[j] = acc;
            }

            let x = peaked_input(&working, step.max);
            let d_x = tape.kernel.backward(&x, &step.weights, &d_weights);
            // x_j = -(u_j - m)^2: ∂/∂u_j = -2(u_j - m), ∂/∂m = 2(u_j - m).
            let mut d_max = 0.0;
            for j in 0..n {
                let diff = working[j] - step.max;
                d_max += d_x[j] * 2.0 * diff;
                if !masked[j] {
                    d_v[j] -= d_x[j] * 2.0 * diff;
                }
            }
            d_v[step.masked] += d_max;

            masked[step.masked] = true;
            working[step.masked] = tape.mask_value;
        }

        Ok(GradientPair { d_embeddings: d_e, d_scores: d_v })
    }
}
