//! Weighting kernels used by the two operators.
//!
//! The peaked kernel weights every candidate of the iterative operator, the
//! boosted two-way softmax weights each tournament pair. All exponentials are
//! taken after subtracting the running maximum.

use std::fmt;
use std::str::FromStr;

use crate::error::{size, Error, Result};
use crate::matrix::check_finite;

/// Denominator floor for the verbatim peaked kernel.
pub const DEFAULT_PEAKED_EPS: f64 = 1e-12;

/// Which peaked-softmax variant the iterative operator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SoftmaxMode {
    /// `exp(x_i) / (Σ_j exp(x_j) - exp(max x))`, unnormalized.
    Verbatim,
    /// Temperature softmax `exp(α x_i) / Σ_j exp(α x_j)`.
    Normalized,
}

impl SoftmaxMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SoftmaxMode::Verbatim => "verbatim",
            SoftmaxMode::Normalized => "normalized",
        }
    }
}

impl fmt::Display for SoftmaxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SoftmaxMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verbatim" => Ok(SoftmaxMode::Verbatim),
            "normalized" => Ok(SoftmaxMode::Normalized),
            other => Err(Error::Config(format!(
                "unknown softmax mode {other:?} (expected verbatim or normalized)"
            ))),
        }
    }
}

/// A peaked kernel together with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakedKernel {
    Verbatim { eps: f64 },
    Normalized { alpha: f64 },
}

impl PeakedKernel {
    pub fn verbatim() -> Self {
        PeakedKernel::Verbatim { eps: DEFAULT_PEAKED_EPS }
    }

    pub fn normalized(alpha: f64) -> Self {
        PeakedKernel::Normalized { alpha }
    }

    /// Kernel for `mode`; `alpha` is ignored in verbatim mode.
    pub fn for_mode(mode: SoftmaxMode, alpha: f64) -> Self {
        match mode {
            SoftmaxMode::Verbatim => Self::verbatim(),
            SoftmaxMode::Normalized => Self::normalized(alpha),
        }
    }

    pub fn mode(&self) -> SoftmaxMode {
        match self {
            PeakedKernel::Verbatim { .. } => SoftmaxMode::Verbatim,
            PeakedKernel::Normalized { .. } => SoftmaxMode::Normalized,
        }
    }

    /// Smallest input length the kernel accepts.
    pub fn min_len(&self) -> usize {
        match self {
            PeakedKernel::Verbatim { .. } => 2,
            PeakedKernel::Normalized { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (name, value) = match *self {
            PeakedKernel::Verbatim { eps } => ("eps", eps),
            PeakedKernel::Normalized { alpha } => ("alpha", alpha),
        };
        if value > 0.0 && value.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("{name} must be finite and > 0, got {value}")))
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match *self {
            PeakedKernel::Verbatim { eps } => peaked_softmax_verbatim(x, eps),
            PeakedKernel::Normalized { alpha } => peaked_softmax_normalized(x, alpha),
        }
    }

    /// Vector-Jacobian product: given the kernel input `x`, its output `w`
    /// and the upstream gradient `g = ∂L/∂w`, returns `∂L/∂x`.
    pub fn backward(&self, x: &[f64], w: &[f64], g: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), w.len());
        debug_assert_eq!(x.len(), g.len());
        match *self {
            PeakedKernel::Verbatim { eps } => {
                let (top, rest_log) = verbatim_denominator(x);
                if rest_log < eps.ln() {
                    // Clamped denominator is a constant.
                    return w.iter().zip(g).map(|(w, g)| w * g).collect();
                }
                // ∂w_i/∂x_j = δ_ij w_i − w_i w_j [j ≠ top]; exp(max) cancels in
                // the denominator so the argmax slot has no denominator term.
                let gw: f64 = g.iter().zip(w).map(|(g, w)| g * w).sum();
                (0..x.len()).map(|j| if j == top { w[j] * g[j] } else { w[j] * (g[j] - gw) }).collect()
            }
            PeakedKernel::Normalized { alpha } => {
                let gw: f64 = g.iter().zip(w).map(|(g, w)| g * w).sum();
                w.iter().zip(g).map(|(w, g)| alpha * w * (g - gw)).collect()
            }
        }
    }
}

/// First index of the maximum and `ln(Σ_{j≠top} exp(x_j))`, computed without
/// forming `Σ exp(x) − exp(max)` (which cancels catastrophically).
fn verbatim_denominator(x: &[f64]) -> (usize, f64) {
    let top = argmax_first(x);
    let max = x[top];
    let rest: f64 = x.iter().enumerate().filter(|&(j, _)| j != top).map(|(_, &xj)| (xj - max).exp()).sum();
    (top, max + rest.ln())
}

/// Index of the largest element, lowest index on ties.
pub fn argmax_first(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &xi) in x.iter().enumerate().skip(1) {
        if xi > x[best] {
            best = i;
        }
    }
    best
}

/// `exp(x_i) / max(Σ_j exp(x_j) − exp(max x), eps)`.
///
/// The denominator is evaluated as `exp(max) · Σ_{j≠argmax} exp(x_j − max)`,
/// which is the same quantity without cancellation or overflow. The output
/// does not sum to one.
pub fn peaked_softmax_verbatim(x: &[f64], eps: f64) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(size(format!("verbatim peaked softmax needs at least 2 inputs, got {}", x.len())));
    }
    check_finite("peaked softmax input", x)?;
    let (top, rest_log) = verbatim_denominator(x);
    let max = x[top];
    let out: Vec<f64> = if rest_log < eps.ln() {
        x.iter().map(|&xi| xi.exp() / eps).collect()
    } else {
        let scale = (max - rest_log).exp();
        x.iter().map(|&xi| (xi - max).exp() * scale).collect()
    };
    check_finite("peaked softmax output", &out)?;
    Ok(out)
}

/// `exp(α x_i) / Σ_j exp(α x_j)`.
pub fn peaked_softmax_normalized(x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(size("normalized peaked softmax needs at least 1 input"));
    }
    check_finite("peaked softmax input", x)?;
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|&xi| (alpha * (xi - max)).exp()).collect();
    let sum: f64 = out.iter().sum();
    for w in &mut out {
        *w /= sum;
    }
    Ok(out)
}

/// Two-way softmax of `(C a, C b)`: returns `(w0, w1)` with `w0 + w1 = 1`.
#[inline]
pub fn boosted_softmax(a: f64, b: f64, c: f64) -> (f64, f64) {
    let t = c * (a - b);
    if t >= 0.0 {
        let e = (-t).exp();
        let w0 = 1.0 / (1.0 + e);
        (w0, e * w0)
    } else {
        let e = t.exp();
        let w1 = 1.0 / (1.0 + e);
        (e * w1, w1)
    }
}

/// Partials of `w0` with respect to `(a, b)`, scaled by `dw0`.
///
/// Callers fold any `w1` gradient in first: `w1 = 1 − w0`, so the effective
/// upstream is `dw0 − dw1`.
#[inline]
pub fn boosted_softmax_backward(a: f64, b: f64, c: f64, dw0: f64) -> (f64, f64) {
    let (w0, w1) = boosted_softmax(a, b, c);
    let da = dw0 * c * w0 * w1;
    (da, -da)
}
