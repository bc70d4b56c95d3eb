//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sigcomm::community::{GainMatrix, GainMode};
use sigcomm::matrix::Square;

// 4-point Gauss-Legendre on [0, 1]; exact for polynomials of degree <= 7.
const GL_NODES: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_9,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

/// All words of length `1..=depth` over `{1..=dim}` in level-then-lexicographic order.
pub fn all_words(dim: usize, depth: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut level: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..depth {
        let mut next = Vec::new();
        for w in &level {
            for a in 1..=dim {
                let mut v = w.clone();
                v.push(a);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// Iterated integrals `∫…∫ dX^{w_1} ⋯ dX^{w_k}` of a piecewise-linear path
/// by nested Gauss-Legendre quadrature in time, segment by segment.
pub struct QuadratureOracle<'a> {
    increments: Vec<Vec<f64>>,
    points: &'a [Vec<f64>],
}

impl<'a> QuadratureOracle<'a> {
    pub fn new(points: &'a [Vec<f64>]) -> Self {
        let increments = points
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| b - a).collect())
            .collect();
        Self { increments, points }
    }

    /// Value of the iterated integral of `word` over the whole path.
    pub fn integral(&self, word: &[usize]) -> f64 {
        // boundary values of every prefix of `word`
        let k = word.len();
        let mut at_start = vec![0.0; k + 1];
        at_start[0] = 1.0;
        for seg in 0..self.increments.len() {
            let mut at_end = vec![0.0; k + 1];
            at_end[0] = 1.0;
            for len in 1..=k {
                at_end[len] = self.within(word, len, seg, 1.0, &at_start);
            }
            at_start = at_end;
        }
        let _ = self.points;
        at_start[k]
    }

    /// Prefix integral of length `len` at local time `s` in segment `seg`.
    fn within(&self, word: &[usize], len: usize, seg: usize, s: f64, at_start: &[f64]) -> f64 {
        if len == 0 {
            return 1.0;
        }
        let rate = self.increments[seg][word[len - 1] - 1];
        let mut acc = 0.0;
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let u = node * s;
            acc += weight * s * self.within(word, len - 1, seg, u, at_start) * rate;
        }
        at_start[len] + acc
    }
}

pub fn random_path(rng: &mut ChaCha8Rng, max_segments: usize) -> Vec<Vec<f64>> {
    let segments = rng.random_range(1..=max_segments);
    let mut p = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let mut pts = vec![p.clone()];
    for _ in 0..segments {
        p[0] += rng.random_range(-1.0..1.0);
        p[1] += rng.random_range(-1.0..1.0);
        pts.push(p.clone());
    }
    pts
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random symmetric gain matrix with entries in [-1, 1] and `c = Σ|B_ij|`.
pub fn random_gain(rng: &mut ChaCha8Rng, n: usize) -> GainMatrix {
    let mut b = Square::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..1.0);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let c = b.as_slice().iter().map(|x| x.abs()).sum::<f64>();
    GainMatrix::new(b, c, GainMode::Custom).unwrap()
}

/// Two-block gain: `±signal` by block membership plus symmetric Gaussian
/// noise of unit scale.
pub fn planted_gain(rng: &mut ChaCha8Rng, n: usize, signal: f64) -> (GainMatrix, Vec<usize>) {
    let mut labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    // scatter the blocks so index order carries no information
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let mut b = Square::zeros(n);
    for i in 0..n {
        for j in i..n {
            let base = if labels[i] == labels[j] { signal } else { -signal };
            let v = base + normal(rng);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let c = b.as_slice().iter().map(|x| x.abs()).sum::<f64>();
    (GainMatrix::new(b, c, GainMode::Custom).unwrap(), labels)
}

/// Best modularity over every labelling in `{0..n-1}^n` (independent of the
/// restricted-growth enumeration).
pub fn exhaustive_labelling_max(gain: &GainMatrix) -> f64 {
    let n = gain.n();
    let mut labels = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    loop {
        best = best.max(sigcomm::community::modularity(gain, &labels));
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            labels[pos] += 1;
            if labels[pos] < n {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

/// Determinant by cofactor expansion.
pub fn determinant(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    let mut det = 0.0;
    for col in 0..n {
        let minor: Vec<Vec<f64>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, v)| *v).collect())
            .collect();
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m[0][col] * determinant(&minor);
    }
    det
}
