//! Dense square matrices and the tagged symmetric matrices produced by the
//! similarity stage.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense `n × n` matrix.
#[derive(Clone, PartialEq)]
pub struct Square {
    n: usize,
    data: Vec<f64>,
}

impl Square {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from nested rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn matmul(&self, other: &Square) -> Result<Square> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "cannot multiply {0}x{0} by {1}x{1}",
                self.n, other.n
            )));
        }
        let n = self.n;
        let mut out = Square::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for j in 0..n {
                    dst[j] += a * src[j];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self += scale * v vᵀ`
    pub fn add_outer(&mut self, scale: f64, v: &[f64]) {
        for i in 0..self.n {
            let si = scale * v[i];
            let row = self.row_mut(i);
            for (dst, &vj) in row.iter_mut().zip(v) {
                *dst += si * vj;
            }
        }
    }

    pub fn add(&self, other: &Square) -> Square {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Square { n: self.n, data }
    }

    pub fn sub(&self, other: &Square) -> Square {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Square { n: self.n, data }
    }

    /// Trace inner product `tr(Aᵀ B)`.
    pub fn frobenius_dot(&self, other: &Square) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Applies the node permutation `perm` (new index `k` holds old node `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Square {
        Square::from_fn(self.n, |i, j| self[(perm[i], perm[j])])
    }
}

impl Index<(usize, usize)> for Square {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Square {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl fmt::Debug for Square {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.n).map(|i| self.row(i)).collect();
        f.debug_struct("Square").field("n", &self.n).field("rows", &rows).finish()
    }
}

/// Which construction produced a [`SymMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    Correlation,
    SimilarityEd,
    SimilarityCs,
    SimilarityRbf,
    /// Anything built by hand (tests, user input).
    Generic,
}

impl MatrixKind {
    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Correlation => "correlation",
            MatrixKind::SimilarityEd => "similarity-ed",
            MatrixKind::SimilarityCs => "similarity-cs",
            MatrixKind::SimilarityRbf => "similarity-rbf",
            MatrixKind::Generic => "generic",
        }
    }
}

/// Symmetric matrix with a kind tag.
///
/// Correlation and similarity constructors guarantee a unit diagonal and
/// exact symmetry (entries are computed once for `i < j` and mirrored).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    kind: MatrixKind,
    values: Square,
}

/// Tolerance used to accept hand-built matrices as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

impl SymMatrix {
    /// Wraps an arbitrary square matrix after checking symmetry.
    pub fn new(values: Square, kind: MatrixKind) -> Result<Self> {
        let asym = values.max_asymmetry();
        if !(asym <= SYMMETRY_TOL) {
            return Err(Error::Precondition(format!(
                "matrix is not symmetric (max |a_ij - a_ji| = {asym:e})"
            )));
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("matrix has non-finite entries".into()));
        }
        Ok(Self { kind, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Square::from_rows(rows)?, MatrixKind::Generic)
    }

    /// Builds a symmetric matrix from its strict upper triangle; the diagonal
    /// is set to `diag`.
    pub(crate) fn from_upper(n: usize, kind: MatrixKind, diag: f64, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Square::zeros(n);
        for i in 0..n {
            values[(i, i)] = diag;
            for j in (i + 1)..n {
                let v = f(i, j);
                values[(i, j)] = v;
                values[(j, i)] = v;
            }
        }
        Self { kind, values }
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.values.n()
    }

    pub fn values(&self) -> &Square {
        &self.values
    }

    pub fn into_values(self) -> Square {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn permuted(&self, perm: &[usize]) -> SymMatrix {
        SymMatrix {
            kind: self.kind,
            values: self.values.permuted(perm),
        }
    }

    /// Off-diagonal entries `(i, j, value)` with `i < j`, row-major.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j, self.get(i, j))))
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a square CSV with a ticker header row and column.
pub fn write_matrix_csv(path: impl AsRef<Path>, tickers: &[String], matrix: &Square) -> Result<()> {
    let path = path.as_ref();
    if tickers.len() != matrix.n() {
        return Err(Error::Dimension(format!(
            "{} tickers for a {}x{} matrix",
            tickers.len(),
            matrix.n(),
            matrix.n()
        )));
    }
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec!["ticker".to_string()];
    header.extend(tickers.iter().cloned());
    wtr.write_record(&header)?;
    for (i, t) in tickers.iter().enumerate() {
        let mut rec = vec![t.clone()];
        rec.extend(matrix.row(i).iter().map(|&v| fmt_full(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
