//! Exact hard top-k and the normalized Chamfer cosine similarity used to
//! score approximations against it.

use crate::error::{size, Result};
use crate::matrix::{check_pair, Matrix, Scores};

/// Rows of `E` with the `k` largest scores, best first; ties go to the lower
/// index.
pub fn exact_topk(e: &Matrix, v: &Scores, k: usize) -> Result<Matrix> {
    check_pair(e, v)?;
    if k < 1 || k > v.len() {
        return Err(size(format!("k must satisfy 1 <= k <= n, got k={k} n={}", v.len())));
    }
    let v = v.as_slice();
    let mut perm: Vec<usize> = (0..v.len()).collect();
    // Stable, so equal scores keep index order.
    perm.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).expect("scores are finite"));
    perm.truncate(k);
    Ok(e.gather_rows(&perm))
}

/// Cosine similarity, defined as 0 when either vector is zero.
pub fn cosine(u: &[f64], w: &[f64]) -> f64 {
    let (mut uw, mut uu, mut ww) = (0.0, 0.0, 0.0);
    for (&a, &b) in u.iter().zip(w) {
        uw += a * b;
        uu += a * a;
        ww += b * b;
    }
    if uu == 0.0 || ww == 0.0 {
        return 0.0;
    }
    (uw / (uu.sqrt() * ww.sqrt())).clamp(-1.0, 1.0)
}

/// `(1/k) Σ_i max_j cos(y_i, ŷ_j)`: each reference row `y_i` is matched to
/// its closest approximation row.
pub fn nccs(reference: &Matrix, approx: &Matrix) -> Result<f64> {
    if reference.shape() != approx.shape() {
        return Err(size(format!(
            "nCCS needs equal shapes, got {:?} and {:?}",
            reference.shape(),
            approx.shape()
        )));
    }
    let total: f64 = reference
        .row_iter()
        .map(|y| approx.row_iter().map(|yh| cosine(y, yh)).fold(f64::NEG_INFINITY, f64::max))
        .sum();
    Ok(total / reference.rows() as f64)
}
