//! Successive-halving soft top-k.
//!
//! Each round sorts the candidates by descending score and plays a
//! tournament: the i-th best is paired with the i-th worst and the pair is
//! replaced by its boosted-softmax-weighted combination (rows and scores
//! alike). Every round halves the candidate count, so `log2(n/k)` rounds
//! leave exactly `k` rows.
//!
//! When `n/k` is not a power of two the input is first padded to
//! `k * 2^ceil(log2(n/k))` rows with zero embeddings and score
//! [`PAD_SCORE`]; pads lose every pairing.
//!
//! Backward treats each round's sort permutation as a constant gather and
//! differentiates through the pair weights and the recombined scores that
//! feed later rounds.

use crate::error::{integrity, size, Error, Result};
use crate::matrix::{check_pair, GradientPair, Matrix, Scores};
use crate::operator::{SoftSelection, SoftTopK, Tape};
use crate::softmax::{boosted_softmax, boosted_softmax_backward};

/// Score given to padding rows.
pub const PAD_SCORE: f64 = -1e6;

pub const DEFAULT_BOOST: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalvingTopK {
    /// Sharpness `C` of the pairwise softmax.
    pub boost: f64,
}

impl Default for HalvingTopK {
    fn default() -> Self {
        HalvingTopK { boost: DEFAULT_BOOST }
    }
}

impl HalvingTopK {
    pub fn new(boost: f64) -> Self {
        HalvingTopK { boost }
    }
}

/// Original and padded candidate counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Padding {
    pub original_n: usize,
    pub padded_n: usize,
}

/// Number of halving rounds for `(n, k)`: the least `r` with `k * 2^r >= n`.
pub fn round_count(n: usize, k: usize) -> Result<u32> {
    if k < 1 || k > n {
        return Err(size(format!("k must satisfy 1 <= k <= n, got k={k} n={n}")));
    }
    let mut rounds = 0;
    while k << rounds < n {
        rounds += 1;
    }
    Ok(rounds)
}

/// Pads `(E, v)` to `k * 2^ceil(log2(n/k))` rows.
pub fn pad_to_tournament(e: &Matrix, v: &Scores, k: usize) -> Result<(Matrix, Scores, Padding)> {
    check_pair(e, v)?;
    let n = v.len();
    let padded_n = k << round_count(n, k)?;
    let padding = Padding { original_n: n, padded_n };
    if padded_n == n {
        return Ok((e.clone(), v.clone(), padding));
    }
    let mut data = e.as_slice().to_vec();
    data.resize(padded_n * e.cols(), 0.0);
    let mut scores = v.as_slice().to_vec();
    scores.resize(padded_n, PAD_SCORE);
    Ok((Matrix::from_vec(padded_n, e.cols(), data)?, Scores::new(scores)?, padding))
}

/// Stable descending sort permutation: `sorted[t] = v[perm[t]]`.
pub fn descending_permutation(v: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..v.len()).collect();
    perm.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    perm
}

/// Sorts rows of `E` and entries of `v` by descending score (stable).
pub fn sort_by_score(e: &Matrix, v: &[f64]) -> Result<(Matrix, Vec<f64>, Vec<usize>)> {
    if e.rows() != v.len() {
        return Err(size(format!("{} rows but {} scores", e.rows(), v.len())));
    }
    let perm = descending_permutation(v);
    let sorted = perm.iter().map(|&i| v[i]).collect();
    Ok((e.gather_rows(&perm), sorted, perm))
}

/// One tournament over scores sorted in descending order.
///
/// Pairs are `(i, len-1-i)` 0-indexed, the `(i, len-i+1)` 1-indexed pairing
/// of the pseudocode. Returns the halved rows, halved scores and the
/// `(w0, w1)` weight of each pair.
pub fn tournament_round(e: &Matrix, v: &[f64], boost: f64) -> Result<(Matrix, Vec<f64>, Vec<(f64, f64)>)> {
    let len = v.len();
    if e.rows() != len {
        return Err(size(format!("{} rows but {} scores", e.rows(), len)));
    }
    if len < 2 || !len.is_multiple_of(2) {
        return Err(size(format!("tournament needs an even size >= 2, got {len}")));
    }
    let half = len / 2;
    let mut out = Matrix::zeros(half, e.cols());
    let mut scores = Vec::with_capacity(half);
    let mut weights = Vec::with_capacity(half);
    for i in 0..half {
        let j = len - 1 - i;
        let (w0, w1) = boosted_softmax(v[i], v[j], boost);
        for ((o, &a), &b) in out.row_mut(i).iter_mut().zip(e.row(i)).zip(e.row(j)) {
            *o = a * w0 + b * w1;
        }
        scores.push(v[i] * w0 + v[j] * w1);
        weights.push((w0, w1));
    }
    Ok((out, scores, weights))
}

/// One recorded round.
#[derive(Debug, Clone, PartialEq)]
pub struct HalvingRound {
    /// Sort permutation applied at the start of the round.
    pub perm: Vec<usize>,
    /// Scores entering the round, before sorting.
    pub scores: Vec<f64>,
    /// Pair weights `(w0, w1)`, one per output row.
    pub weights: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalvingTape {
    /// Padded input rows.
    pub embeddings: Matrix,
    pub padding: Padding,
    pub k: usize,
    pub boost: f64,
    pub rounds: Vec<HalvingRound>,
}

impl HalvingTape {
    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let Padding { original_n, padded_n } = self.padding;
        let expected = round_count(original_n, self.k).map_err(|e| integrity(e.to_string()))?;
        if self.rounds.len() != expected as usize {
            return Err(integrity(format!(
                "expected {expected} rounds for n={original_n} k={}, found {}",
                self.k,
                self.rounds.len()
            )));
        }
        if padded_n != self.k << expected || self.embeddings.rows() != padded_n {
            return Err(integrity(format!(
                "padded size {padded_n} inconsistent with k={} and {} embedding rows",
                self.k,
                self.embeddings.rows()
            )));
        }
        let mut len = padded_n;
        let mut seen = Vec::new();
        for (r, round) in self.rounds.iter().enumerate() {
            if round.perm.len() != len || round.scores.len() != len || round.weights.len() != len / 2 {
                return Err(integrity(format!("round {r} has inconsistent lengths")));
            }
            seen.clear();
            seen.resize(len, false);
            for &p in &round.perm {
                if p >= len || std::mem::replace(&mut seen[p], true) {
                    return Err(integrity(format!("round {r} permutation is not a permutation")));
                }
            }
            len /= 2;
        }
        Ok(())
    }

    /// Re-runs the rounds from the recorded permutations and weights and
    /// returns each round's sorted input rows together with the output.
    fn replay_trace(&self) -> Result<(Vec<Matrix>, Matrix)> {
        self.validate()?;
        let mut current = self.embeddings.clone();
        let mut trace = Vec::with_capacity(self.rounds.len());
        for (r, round) in self.rounds.iter().enumerate() {
            let sorted_scores: Vec<f64> = round.perm.iter().map(|&i| round.scores[i]).collect();
            if sorted_scores.windows(2).any(|w| w[0] < w[1]) {
                return Err(integrity(format!("round {r} permutation does not sort its scores")));
            }
            let sorted = current.gather_rows(&round.perm);
            let (next, next_scores, weights) = tournament_round(&sorted, &sorted_scores, self.boost)?;
            if weights != round.weights {
                return Err(integrity(format!("round {r} weights do not match its scores")));
            }
            if let Some(following) = self.rounds.get(r + 1) {
                if following.scores != next_scores {
                    return Err(integrity(format!("round {} score snapshot is inconsistent", r + 1)));
                }
            }
            trace.push(sorted);
            current = next;
        }
        Ok((trace, current))
    }

    pub fn replay(&self) -> Result<Matrix> {
        self.replay_trace().map(|(_, out)| out)
    }
}

impl SoftTopK for HalvingTopK {
    fn name(&self) -> &'static str {
        "halving"
    }

    fn forward(&self, embeddings: &Matrix, scores: &Scores, k: usize) -> Result<SoftSelection> {
        if !(self.boost > 0.0 && self.boost.is_finite()) {
            return Err(Error::Config(format!("boost must be finite and > 0, got {}", self.boost)));
        }
        let (padded, padded_scores, padding) = pad_to_tournament(embeddings, scores, k)?;
        let n_rounds = round_count(padding.original_n, k)? as usize;

        let mut current = padded.clone();
        let mut current_scores = padded_scores.into_vec();
        let mut rounds = Vec::with_capacity(n_rounds);
        for _ in 0..n_rounds {
            let (sorted, sorted_scores, perm) = sort_by_score(&current, &current_scores)?;
            let (next, next_scores, weights) = tournament_round(&sorted, &sorted_scores, self.boost)?;
            rounds.push(HalvingRound { perm, scores: current_scores, weights });
            current = next;
            current_scores = next_scores;
        }

        let tape = HalvingTape { embeddings: padded, padding, k, boost: self.boost, rounds };
        Ok(SoftSelection { output: current, tape: Tape::Halving(tape) })
    }

    fn backward(&self, tape: &Tape, d_out: &Matrix) -> Result<GradientPair> {
        let tape = tape.as_halving()?;
        let (trace, _) = tape.replay_trace()?;
        let d = tape.embeddings.cols();
        if d_out.shape() != (tape.k, d) {
            return Err(size(format!(
                "upstream gradient is {:?}, output was {:?}",
                d_out.shape(),
                (tape.k, d)
            )));
        }

        let mut d_rows = d_out.clone();
        let mut d_scores = vec![0.0; tape.k];
        for (round, sorted) in tape.rounds.iter().zip(&trace).rev() {
            let len = round.perm.len();
            let sorted_scores: Vec<f64> = round.perm.iter().map(|&i| round.scores[i]).collect();
            let mut d_sorted = Matrix::zeros(len, d);
            let mut d_sorted_scores = vec![0.0; len];
            for (i, &(w0, w1)) in round.weights.iter().enumerate() {
                let j = len - 1 - i;
                let g = d_rows.row(i);
                let gv = d_scores[i];
                // w1 = 1 - w0, so the pair weight sees dw0 - dw1.
                let mut d_w = gv * (sorted_scores[i] - sorted_scores[j]);
                for (c, &gc) in g.iter().enumerate() {
                    d_w += gc * (sorted[(i, c)] - sorted[(j, c)]);
                    d_sorted[(i, c)] += w0 * gc;
                    d_sorted[(j, c)] += w1 * gc;
                }
                let (da, db) = boosted_softmax_backward(sorted_scores[i], sorted_scores[j], tape.boost, d_w);
                d_sorted_scores[i] += gv * w0 + da;
                d_sorted_scores[j] += gv * w1 + db;
            }
            // Scatter back through the constant sort permutation.
            let mut d_prev = Matrix::zeros(len, d);
            let mut d_prev_scores = vec![0.0; len];
            for (t, &src) in round.perm.iter().enumerate() {
                d_prev.row_mut(src).copy_from_slice(d_sorted.row(t));
                d_prev_scores[src] = d_sorted_scores[t];
            }
            d_rows = d_prev;
            d_scores = d_prev_scores;
        }

        // Drop padding rows.
        let n = tape.padding.original_n;
        let mut d_e = d_rows.into_vec();
        d_e.truncate(n * d);
        d_scores.truncate(n);
        Ok(GradientPair { d_embeddings: Matrix::from_vec(n, d, d_e)?, d_scores })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(v: &[f64]) -> Scores {
        Scores::new(v.to_vec()).unwrap()
    }

    #[test]
    fn padding_sizes() {
        let e = Matrix::zeros(16, 2);
        let (p, _, desc) = pad_to_tournament(&e, &scores(&[0.0; 16]), 4).unwrap();
        assert_eq!((p.rows(), desc.padded_n), (16, 16));

        let e = Matrix::filled(12, 2, 1.0);
        let (p, v, desc) = pad_to_tournament(&e, &scores(&[0.5; 12]), 4).unwrap();
        assert_eq!(desc, Padding { original_n: 12, padded_n: 16 });
        assert!(v.as_slice()[12..].iter().all(|&s| s == PAD_SCORE));
        assert!(p.as_slice()[24..].iter().all(|&x| x == 0.0));
        assert!(p.as_slice()[..24].iter().all(|&x| x == 1.0));

        let e = Matrix::zeros(5, 1);
        let (_, _, desc) = pad_to_tournament(&e, &scores(&[0.0; 5]), 5).unwrap();
        assert_eq!(desc.padded_n, 5);
        assert_eq!(round_count(5, 5).unwrap(), 0);

        assert!(matches!(pad_to_tournament(&e, &scores(&[0.0; 5]), 6), Err(Error::Size(_))));
    }

    #[test]
    fn sort_cases() {
        let e = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let (se, sv, perm) = sort_by_score(&e, &[0.1, 0.9, 0.4]).unwrap();
        assert_eq!(perm, vec![1, 2, 0]);
        assert_eq!(sv, vec![0.9, 0.4, 0.1]);
        assert_eq!(se.as_slice(), &[1.0, 2.0, 0.0]);
        assert_eq!(sort_by_score(&e, &[3.0, 2.0, 1.0]).unwrap().2, vec![0, 1, 2]);
        let e2 = Matrix::zeros(2, 1);
        assert_eq!(sort_by_score(&e2, &[0.5, 0.5]).unwrap().2, vec![0, 1]);
    }

    #[test]
    fn single_round_closed_form() {
        let e = Matrix::from_rows(&[[2.0], [4.0]]).unwrap();
        let c = 3f64.ln() / 0.8;
        let (out, v, w) = tournament_round(&e, &[0.9, 0.1], c).unwrap();
        assert!((w[0].0 - 0.75).abs() < 1e-12 && (w[0].1 - 0.25).abs() < 1e-12);
        assert!((out[(0, 0)] - 2.5).abs() < 1e-12);
        assert!((v[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn tied_pairs_average_and_saturated_pairs_pass_through() {
        let e = Matrix::from_rows(&[[1.0, 0.0], [2.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let (out, _, _) = tournament_round(&e, &[0.5; 4], 3.0).unwrap();
        assert_eq!(out.row(0), &[3.0, 3.0]);
        assert_eq!(out.row(1), &[2.5, 3.0]);

        let v = [0.9, 0.6, 0.3, 0.1];
        let (out, s, _) = tournament_round(&e, &v, 1e4).unwrap();
        assert!(out.max_abs_diff(&e.gather_rows(&[0, 1])).unwrap() < 1e-12);
        assert!((s[0] - 0.9).abs() < 1e-12 && (s[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn odd_round_is_rejected() {
        let e = Matrix::zeros(3, 1);
        assert!(matches!(tournament_round(&e, &[0.3, 0.2, 0.1], 1.0), Err(Error::Size(_))));
    }

    #[test]
    fn forward_small_cases() {
        let e = Matrix::from_rows(&[[2.0], [4.0]]).unwrap();
        let op = HalvingTopK::new(3f64.ln() / 0.8);
        let s = op.forward(&e, &scores(&[0.1, 0.9]), 1).unwrap();
        assert!((s.output[(0, 0)] - 3.5).abs() < 1e-12);
        assert_eq!(s.tape.as_halving().unwrap().rounds[0].perm, vec![1, 0]);

        let e = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let s = op.forward(&e, &scores(&[0.1, 0.9, 0.4]), 3).unwrap();
        assert_eq!(s.output, e);
        assert_eq!(s.tape.as_halving().unwrap().round_count(), 0);
    }

    #[test]
    fn identity_backward_when_k_equals_n() {
        let e = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let op = HalvingTopK::default();
        let s = op.forward(&e, &scores(&[0.2, 0.8]), 2).unwrap();
        let up = Matrix::from_rows(&[[0.5, -1.0], [2.0, 3.0]]).unwrap();
        let g = op.backward(&s.tape, &up).unwrap();
        assert_eq!(g.d_embeddings, up);
        assert_eq!(g.d_scores, vec![0.0, 0.0]);
    }

    #[test]
    fn tape_integrity() {
        let e = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0], [5.0]]).unwrap();
        let op = HalvingTopK::new(5.0);
        let s = op.forward(&e, &scores(&[0.3, 0.1, 0.7, 0.2, 0.9]), 1).unwrap();
        assert_eq!(s.tape.replay().unwrap(), s.output);

        let Tape::Halving(mut t) = s.tape.clone() else { unreachable!() };
        t.rounds.pop();
        assert!(matches!(t.replay(), Err(Error::Integrity(_))));

        let Tape::Halving(mut t) = s.tape.clone() else { unreachable!() };
        t.rounds[0].perm.swap(0, 1);
        assert!(matches!(t.replay(), Err(Error::Integrity(_))));

        let Tape::Halving(mut t) = s.tape else { unreachable!() };
        t.rounds[1].weights[0].0 += 1e-3;
        assert!(matches!(t.replay(), Err(Error::Integrity(_))));
    }
}
