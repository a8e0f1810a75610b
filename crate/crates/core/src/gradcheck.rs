//! Central finite differences and an operator-level gradient check.

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Scores};
use crate::operator::SoftTopK;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate `i`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("step h must be finite and > 0, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::Oracle { coord: i });
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Relative error with the denominator floored at `1e-8`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Dot product evaluated as if in twice the working precision (Dot2 of
/// Ogita, Rump and Oishi), so that `L` itself adds no rounding noise to the
/// finite differences.
pub fn accurate_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut sum, mut err) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (p, p_err) = two_product(x, y);
        let (s, s_err) = two_sum(sum, p);
        sum = s;
        err += p_err + s_err;
    }
    sum + err
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Dekker's split product; exact without a fused multiply-add.
fn two_product(a: f64, b: f64) -> (f64, f64) {
    fn split(x: f64) -> (f64, f64) {
        let c = 134_217_729.0 * x; // 2^27 + 1
        let hi = c - (c - x);
        (hi, x - hi)
    }
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, al * bl - (((p - ah * bh) - al * bh) - ah * bl))
}

/// An input coordinate of a soft top-k operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    Embedding { row: usize, col: usize },
    Score(usize),
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coordinate::Embedding { row, col } => write!(f, "E[{row},{col}]"),
            Coordinate::Score(i) => write!(f, "v[{i}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub h: f64,
    /// Pass threshold on the maximum relative error.
    pub tol: f64,
    /// Instances with two scores closer than this are skipped.
    pub min_gap: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig { h: 1e-6, tol: 1e-5, min_gap: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest relative error over all coordinates; decides `passed`.
    pub max_rel_error: f64,
    /// Estimated absolute noise of the central differences,
    /// `ε Σ|probe ⊙ output| / 2h`, largest over checked instances.
    pub fd_noise: f64,
    /// Relative error with the denominator floored at `fd_noise / tol`
    /// instead of `1e-8`: coordinates whose gradient is below what the
    /// differences can resolve no longer dominate. Diagnostic only.
    pub noise_adjusted_error: f64,
    pub worst: Option<Coordinate>,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
    pub skipped: usize,
    pub tol: f64,
    pub passed: bool,
}

impl GradCheckReport {
    fn empty(tol: f64) -> Self {
        GradCheckReport {
            max_rel_error: 0.0,
            fd_noise: 0.0,
            noise_adjusted_error: 0.0,
            worst: None,
            analytic_at_worst: 0.0,
            numeric_at_worst: 0.0,
            checked: 0,
            skipped: 0,
            tol,
            passed: true,
        }
    }

    /// Folds another instance's report into this one.
    pub fn merge(&mut self, other: &GradCheckReport) {
        if other.max_rel_error > self.max_rel_error || self.worst.is_none() && other.worst.is_some() {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
            self.analytic_at_worst = other.analytic_at_worst;
            self.numeric_at_worst = other.numeric_at_worst;
        }
        self.fd_noise = self.fd_noise.max(other.fd_noise);
        self.noise_adjusted_error = self.noise_adjusted_error.max(other.noise_adjusted_error);
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.passed = self.max_rel_error < self.tol;
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} max_rel_error={:.3e} tol={:.1e} checked={} skipped={}",
            if self.passed { "PASS" } else { "FAIL" },
            self.max_rel_error,
            self.tol,
            self.checked,
            self.skipped
        )?;
        write!(f, " noise_adjusted={:.3e} fd_noise={:.1e}", self.noise_adjusted_error, self.fd_noise)?;
        if let Some(c) = self.worst {
            write!(
                f,
                " worst={c} (analytic={:.9e}, numeric={:.9e})",
                self.analytic_at_worst, self.numeric_at_worst
            )?;
        }
        Ok(())
    }
}

/// Compares `op.backward` against central differences of
/// `L(E, v) = <probe, op.forward(E, v, k).output>` in every coordinate of `E`
/// and `v`.
///
/// Instances whose scores come within `cfg.min_gap` of each other sit on a
/// sort/argmax discontinuity; they are counted as skipped, not checked.
pub fn gradcheck_operator<O: SoftTopK + ?Sized>(
    op: &O,
    embeddings: &Matrix,
    scores: &Scores,
    k: usize,
    probe: &Matrix,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let mut report = GradCheckReport::empty(cfg.tol);
    if scores.min_pairwise_gap() <= cfg.min_gap {
        report.skipped = 1;
        return Ok(report);
    }

    let selection = op.forward(embeddings, scores, k)?;
    let grads = op.backward(&selection.tape, probe)?;

    let (n, d) = embeddings.shape();
    let mut point = embeddings.as_slice().to_vec();
    point.extend_from_slice(scores.as_slice());
    let loss = |x: &[f64]| -> f64 {
        let e = Matrix::from_vec(n, d, x[..n * d].to_vec());
        let v = Scores::new(x[n * d..].to_vec());
        match (e, v) {
            (Ok(e), Ok(v)) => op
                .forward(&e, &v, k)
                .map(|s| accurate_dot(s.output.as_slice(), probe.as_slice()))
                .unwrap_or(f64::NAN),
            _ => f64::NAN,
        }
    };
    let numeric = finite_diff_grad(loss, &point, cfg.h)?;

    let magnitude: f64 =
        selection.output.as_slice().iter().zip(probe.as_slice()).map(|(o, p)| (o * p).abs()).sum();
    report.fd_noise = f64::EPSILON * magnitude / (2.0 * cfg.h);
    let adjusted_floor = (report.fd_noise / cfg.tol).max(1e-8);

    let analytic = grads.d_embeddings.as_slice().iter().chain(&grads.d_scores);
    for (idx, (&a, &num)) in analytic.zip(&numeric).enumerate() {
        let err = relative_error(a, num);
        let adjusted = (a - num).abs() / a.abs().max(num.abs()).max(adjusted_floor);
        report.noise_adjusted_error = report.noise_adjusted_error.max(adjusted);
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = err;
            report.worst = Some(if idx < n * d {
                Coordinate::Embedding { row: idx / d, col: idx % d }
            } else {
                Coordinate::Score(idx - n * d)
            });
            report.analytic_at_worst = a;
            report.numeric_at_worst = num;
        }
    }
    report.checked = 1;
    report.passed = report.max_rel_error < cfg.tol;
    Ok(report)
}
