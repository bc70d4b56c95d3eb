//! Lead-lag embedding and exact truncated signatures of piecewise-linear
//! paths.
//!
//! A linear segment with increment `Δ` has signature `exp(Δ)` in the
//! truncated tensor algebra: the coefficient of the word `w = i_1 … i_k` is
//! `Δ_{i_1} ⋯ Δ_{i_k} / k!`. Signatures of concatenated segments are
//! multiplied with Chen's identity, so the signature of a piecewise-linear
//! path is exact up to floating-point rounding.
//!
//! Words over the alphabet `{1, …, d}` are stored level by level. Within a
//! level the word `i_1 … i_k` lives at offset `Σ (i_j - 1) d^(k-j)`, which is
//! lexicographic order.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Two-dimensional staircase path `(lead, lag)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadLagPath {
    points: Vec<[f64; 2]>,
}

impl LeadLagPath {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Increments between consecutive points.
    pub fn increments(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.points
            .windows(2)
            .map(|w| [w[1][0] - w[0][0], w[1][1] - w[0][1]])
    }

    pub fn as_path(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.to_vec()).collect()
    }
}

/// Lead-lag embedding of a stream `x_0, …, x_n`.
///
/// Produces `2n + 1` points: `(x_0, x_0)`, then for every step
/// `(x_{j+1}, x_j)` followed by `(x_{j+1}, x_{j+1})`. The stream is shifted so
/// that `x_0 = 0`; the signature is translation invariant, so this only
/// pins the start of the path to the origin.
pub fn lead_lag(stream: &[f64]) -> Result<LeadLagPath> {
    if stream.len() < 2 {
        return Err(Error::Precondition(format!(
            "lead-lag needs at least 2 values, got {}",
            stream.len()
        )));
    }
    if let Some(pos) = stream.iter().position(|x| !x.is_finite()) {
        return Err(Error::Data(format!("non-finite stream value at index {pos}")));
    }
    let base = stream[0];
    let mut points = Vec::with_capacity(2 * stream.len() - 1);
    points.push([0.0, 0.0]);
    for w in stream.windows(2) {
        let (prev, next) = (w[0] - base, w[1] - base);
        points.push([next, prev]);
        points.push([next, next]);
    }
    Ok(LeadLagPath { points })
}

/// Running sum of `increments` prefixed with 0.
pub fn cumulative_path(increments: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &r in increments {
        acc += r;
        out.push(acc);
    }
    out
}

/// Number of coefficients of a depth-`depth` signature over `dim` letters,
/// empty word included.
pub fn coefficient_count(dim: usize, depth: usize) -> usize {
    (0..=depth).map(|k| dim.pow(k as u32)).sum()
}

/// Signature truncated at a fixed depth.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSignature {
    dim: usize,
    depth: usize,
    /// `levels[k]` has `dim^k` entries; `levels[0] == [1.0]`.
    levels: Vec<Vec<f64>>,
}

impl TruncatedSignature {
    /// Signature of the constant path: 1 on the empty word, 0 elsewhere.
    pub fn identity(dim: usize, depth: usize) -> Self {
        let levels = (0..=depth)
            .map(|k| {
                let mut level = vec![0.0; dim.pow(k as u32)];
                if k == 0 {
                    level[0] = 1.0;
                }
                level
            })
            .collect();
        Self { dim, depth, levels }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn coefficient_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Coefficient of a word given by 1-based letters, e.g. `&[1, 2, 1]`.
    pub fn coefficient(&self, word: &[usize]) -> Option<f64> {
        if word.len() > self.depth {
            return None;
        }
        let mut offset = 0;
        for &letter in word {
            if letter == 0 || letter > self.dim {
                return None;
            }
            offset = offset * self.dim + (letter - 1);
        }
        Some(self.levels[word.len()][offset])
    }

    /// Every `(word, coefficient)` pair in level-then-lexicographic order,
    /// empty word first.
    pub fn words(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.levels.iter().enumerate().flat_map(move |(k, level)| {
            level
                .iter()
                .enumerate()
                .map(move |(offset, &c)| (decode_word(offset, k, self.dim), c))
        })
    }

    /// Lévy area of the first two coordinates, `(S^{12} - S^{21}) / 2`.
    pub fn levy_area(&self) -> f64 {
        assert!(self.dim >= 2 && self.depth >= 2, "Lévy area needs d >= 2, M >= 2");
        let l2 = &self.levels[2];
        (l2[1] - l2[self.dim]) / 2.0
    }

    /// Inverse in the truncated tensor algebra (signature of the reversed path).
    pub fn inverse(&self) -> Self {
        // For group-like elements S^{-1} = Σ_k (-1)^k (S - 1)^{⊗k}.
        let mut x = self.clone();
        x.levels[0][0] = 0.0;
        let mut result = Self::identity(self.dim, self.depth);
        let mut power = Self::identity(self.dim, self.depth);
        for k in 1..=self.depth {
            power = tensor_product(&power, &x);
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            for (dst, src) in result.levels.iter_mut().zip(&power.levels) {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += sign * s;
                }
            }
        }
        result
    }
}

fn decode_word(mut offset: usize, len: usize, dim: usize) -> Vec<usize> {
    let mut word = vec![0; len];
    for slot in word.iter_mut().rev() {
        *slot = offset % dim + 1;
        offset /= dim;
    }
    word
}

/// Renders a word as a digit string, e.g. `[1, 2, 1]` → `"121"`.
pub fn word_label(word: &[usize]) -> String {
    word.iter().map(|l| l.to_string()).collect()
}

/// Truncated tensor exponential of one linear increment.
pub fn segment_signature(increment: &[f64], depth: usize) -> Result<TruncatedSignature> {
    if depth == 0 {
        return Err(Error::Precondition("signature depth must be at least 1".into()));
    }
    if increment.is_empty() {
        return Err(Error::Precondition("increment must have at least one coordinate".into()));
    }
    if increment.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("non-finite increment".into()));
    }
    let dim = increment.len();
    let mut levels = Vec::with_capacity(depth + 1);
    levels.push(vec![1.0]);
    for k in 1..=depth {
        let prev: &Vec<f64> = &levels[k - 1];
        let inv_k = 1.0 / k as f64;
        let mut level = Vec::with_capacity(prev.len() * dim);
        for &p in prev {
            let scaled = p * inv_k;
            level.extend(increment.iter().map(|&x| scaled * x));
        }
        levels.push(level);
    }
    Ok(TruncatedSignature { dim, depth, levels })
}

fn tensor_product(a: &TruncatedSignature, b: &TruncatedSignature) -> TruncatedSignature {
    let dim = a.dim;
    let mut levels = Vec::with_capacity(a.depth + 1);
    for k in 0..=a.depth {
        let mut level = vec![0.0; dim.pow(k as u32)];
        for i in 0..=k {
            let left = &a.levels[i];
            let right = &b.levels[k - i];
            let right_len = right.len();
            for (u, &x) in left.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let dst = &mut level[u * right_len..(u + 1) * right_len];
                for (d, &y) in dst.iter_mut().zip(right) {
                    *d += x * y;
                }
            }
        }
        levels.push(level);
    }
    TruncatedSignature {
        dim,
        depth: a.depth,
        levels,
    }
}

/// Chen product: signature of `first` followed by `second`.
pub fn chen_concat(first: &TruncatedSignature, second: &TruncatedSignature) -> Result<TruncatedSignature> {
    if first.dim != second.dim || first.depth != second.depth {
        return Err(Error::Dimension(format!(
            "cannot concatenate signatures with (d, M) = ({}, {}) and ({}, {})",
            first.dim, first.depth, second.dim, second.depth
        )));
    }
    Ok(tensor_product(first, second))
}

/// Signature of a piecewise-linear path given by its vertices.
pub fn signature_of_points<P: AsRef<[f64]>>(points: &[P], depth: usize) -> Result<TruncatedSignature> {
    if depth == 0 {
        return Err(Error::Precondition("signature depth must be at least 1".into()));
    }
    if points.len() < 2 {
        return Err(Error::Precondition(format!(
            "path needs at least 2 points, got {}",
            points.len()
        )));
    }
    let dim = points[0].as_ref().len();
    if points.iter().any(|p| p.as_ref().len() != dim) {
        return Err(Error::Dimension("path points have differing dimensions".into()));
    }
    let mut sig = TruncatedSignature::identity(dim, depth);
    let mut increment = vec![0.0; dim];
    for w in points.windows(2) {
        let (a, b) = (w[0].as_ref(), w[1].as_ref());
        for (d, (x, y)) in increment.iter_mut().zip(a.iter().zip(b)) {
            *d = y - x;
        }
        if increment.iter().all(|&d| d == 0.0) {
            continue;
        }
        let seg = segment_signature(&increment, depth)?;
        sig = tensor_product(&sig, &seg);
    }
    // level 1 is the total increment; take it from the end points directly
    let (first, last) = (points[0].as_ref(), points[points.len() - 1].as_ref());
    for (c, (a, b)) in sig.levels[1].iter_mut().zip(first.iter().zip(last)) {
        *c = b - a;
    }
    Ok(sig)
}

/// Truncated signature of a lead-lag path (left fold of Chen products).
pub fn path_signature(path: &LeadLagPath, depth: usize) -> Result<TruncatedSignature> {
    signature_of_points(&path.points, depth)
}

/// Coefficients of word length `1..=M` in level-then-lexicographic order.
pub fn signature_feature_vector(sig: &TruncatedSignature) -> Vec<f64> {
    sig.levels[1..].iter().flatten().copied().collect()
}

/// Writes `ticker,word,coefficient` rows for every coefficient of every
/// signature (the empty word renders as an empty string).
pub fn write_signature_dump(
    path: impl AsRef<Path>,
    tickers: &[String],
    signatures: &[TruncatedSignature],
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "ticker,word,coefficient").map_err(io)?;
    for (ticker, sig) in tickers.iter().zip(signatures) {
        for (word, c) in sig.words() {
            writeln!(out, "{ticker},{},{c:.16e}", word_label(&word)).map_err(io)?;
        }
    }
    out.flush().map_err(io)?;
    Ok(())
}
