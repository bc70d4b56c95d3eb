//! Correlation and signature-based similarity matrices.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ReturnsPanel;
use crate::matrix::{MatrixKind, SymMatrix};
use crate::signature::{cumulative_path, lead_lag, path_signature, signature_feature_vector, TruncatedSignature};

/// Dimension of a lead-lag path.
pub const LEAD_LAG_DIM: usize = 2;
pub const DEFAULT_DEPTH: usize = 3;

/// Pearson correlation with population (`1/T`) moments.
pub fn correlation_matrix(returns: &ReturnsPanel) -> Result<SymMatrix> {
    let n = returns.n_series();
    if n < 2 {
        return Err(Error::Precondition(format!("correlation needs at least 2 series, got {n}")));
    }
    let t = returns.n_obs();
    if t < 2 {
        return Err(Error::Precondition(format!("correlation needs at least 2 observations, got {t}")));
    }
    let inv_t = 1.0 / t as f64;
    let mut centered = Vec::with_capacity(n);
    let mut scale = Vec::with_capacity(n);
    for (ticker, row) in returns.tickers().iter().zip(returns.rows()) {
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if lo == hi {
            return Err(Error::ZeroVariance { ticker: ticker.clone() });
        }
        let mean = row.iter().sum::<f64>() * inv_t;
        let c: Vec<f64> = row.iter().map(|x| x - mean).collect();
        let var = c.iter().map(|x| x * x).sum::<f64>() * inv_t;
        if !(var > 0.0) {
            return Err(Error::ZeroVariance { ticker: ticker.clone() });
        }
        scale.push(var.sqrt());
        centered.push(c);
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    let cov = dot(&centered[i], &centered[j]) * inv_t;
                    (cov / (scale[i] * scale[j])).clamp(-1.0, 1.0)
                })
                .collect()
        })
        .collect();
    Ok(SymMatrix::from_upper(n, MatrixKind::Correlation, 1.0, |i, j| rows[i][j - i - 1]))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Which stream is fed to the lead-lag transform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathInput {
    /// Cumulative log-returns, starting at 0.
    #[default]
    Cumulative,
    /// The raw return sequence, prefixed with 0.
    Increments,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureScaling {
    #[default]
    None,
    /// Column-wise z-score across series; constant columns become 0.
    Standardize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub input: PathInput,
    pub scaling: FeatureScaling,
}

/// `N × F` matrix of signature features, one row per series.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Dimension("feature rows have differing lengths".into()));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(Self { rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn standardized(mut self) -> Self {
        let n = self.rows.len() as f64;
        for col in 0..self.n_features() {
            let mean = self.rows.iter().map(|r| r[col]).sum::<f64>() / n;
            let var = self.rows.iter().map(|r| (r[col] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for r in &mut self.rows {
                r[col] = if sd > 0.0 { (r[col] - mean) / sd } else { 0.0 };
            }
        }
        self
    }
}

/// The stream handed to the lead-lag transform for one return series.
pub fn input_stream(returns: &[f64], input: PathInput) -> Vec<f64> {
    match input {
        PathInput::Cumulative => cumulative_path(returns),
        PathInput::Increments => std::iter::once(0.0).chain(returns.iter().copied()).collect(),
    }
}

/// Truncated signature of the lead-lag path of one return series.
pub fn stream_signature(returns: &[f64], depth: usize, input: PathInput) -> Result<TruncatedSignature> {
    path_signature(&lead_lag(&input_stream(returns, input))?, depth)
}

/// Signature feature vector of one return stream.
pub fn stream_features(returns: &[f64], depth: usize, input: PathInput) -> Result<Vec<f64>> {
    Ok(signature_feature_vector(&stream_signature(returns, depth, input)?))
}

/// One row of truncated-signature features per series.
pub fn signature_features(returns: &ReturnsPanel, depth: usize, options: &FeatureOptions) -> Result<FeatureMatrix> {
    if depth == 0 {
        return Err(Error::Precondition("signature depth must be at least 1".into()));
    }
    let rows = returns
        .rows()
        .par_iter()
        .map(|r| stream_features(r, depth, options.input))
        .collect::<Result<Vec<_>>>()?;
    let features = FeatureMatrix::from_rows(rows)?;
    Ok(match options.scaling {
        FeatureScaling::None => features,
        FeatureScaling::Standardize => features.standardized(),
    })
}

/// Builds the upper triangle row-parallel; each entry is computed once.
fn pairwise(features: &FeatureMatrix, kind: MatrixKind, f: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> SymMatrix {
    let n = features.n_rows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| f(features.row(i), features.row(j))).collect())
        .collect();
    SymMatrix::from_upper(n, kind, 1.0, |i, j| rows[i][j - i - 1])
}

/// `p_ij = 1 / (1 + ‖f_i − f_j‖₂)`.
pub fn similarity_ed(features: &FeatureMatrix) -> SymMatrix {
    pairwise(features, MatrixKind::SimilarityEd, |a, b| 1.0 / (1.0 + sq_dist(a, b).sqrt()))
}

/// `p_ij = (1 + cos(f_i, f_j)) / 2`.
pub fn similarity_cs(features: &FeatureMatrix) -> Result<SymMatrix> {
    let norms: Vec<f64> = features.rows().iter().map(|r| dot(r, r).sqrt()).collect();
    if let Some(i) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::Data(format!(
            "feature row {i} is zero; cosine similarity is undefined"
        )));
    }
    let n = features.n_rows();
    let index: Vec<usize> = (0..n).collect();
    let rows: Vec<Vec<f64>> = index
        .par_iter()
        .map(|&i| {
            ((i + 1)..n)
                .map(|j| {
                    let cos = (dot(features.row(i), features.row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
                    (1.0 + cos) / 2.0
                })
                .collect()
        })
        .collect();
    Ok(SymMatrix::from_upper(n, MatrixKind::SimilarityCs, 1.0, |i, j| rows[i][j - i - 1]))
}

/// RBF bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Gamma {
    Fixed(f64),
    /// `γ = 1 / (2 m²)` with `m` the median off-diagonal distance.
    #[default]
    Median,
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Fixed(g) => write!(f, "{g}"),
            Gamma::Median => f.write_str("median"),
        }
    }
}

impl FromStr for Gamma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("median") {
            return Ok(Gamma::Median);
        }
        let g: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("gamma must be a positive number or `median`, got `{s}`")))?;
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {g}")));
        }
        Ok(Gamma::Fixed(g))
    }
}

impl Serialize for Gamma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(g) => Gamma::from_str(&g.to_string()),
            Raw::Str(s) => Gamma::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Median of the off-diagonal pairwise Euclidean distances.
pub fn median_distance(features: &FeatureMatrix) -> f64 {
    let n = features.n_rows();
    let mut d: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist(features.row(i), features.row(j)).sqrt())
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        (d[m / 2 - 1] + d[m / 2]) / 2.0
    }
}

/// Resolves the bandwidth actually used by [`similarity_rbf`].
pub fn resolve_gamma(features: &FeatureMatrix, gamma: Gamma) -> Result<f64> {
    match gamma {
        Gamma::Fixed(g) if g > 0.0 && g.is_finite() => Ok(g),
        Gamma::Fixed(g) => Err(Error::Config(format!("gamma must be positive, got {g}"))),
        Gamma::Median => {
            let m = median_distance(features);
            if !(m > 0.0) {
                return Err(Error::Numeric(
                    "median pairwise distance is zero; RBF bandwidth undefined".into(),
                ));
            }
            Ok(1.0 / (2.0 * m * m))
        }
    }
}

/// `p_ij = exp(−γ ‖f_i − f_j‖²)`.
pub fn similarity_rbf(features: &FeatureMatrix, gamma: Gamma) -> Result<SymMatrix> {
    let g = resolve_gamma(features, gamma)?;
    Ok(pairwise(features, MatrixKind::SimilarityRbf, |a, b| (-g * sq_dist(a, b)).exp()))
}
