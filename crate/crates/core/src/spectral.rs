//! Symmetric eigendecomposition, Marcenko-Pastur noise band, the
//! noise/market/structure split, and threshold (asset graph) filtering.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{MatrixKind, Square, SymMatrix, SYMMETRY_TOL};

pub const MAX_SWEEPS: usize = 100;
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
/// Eigenvalues this close to `λ+` count as noise.
pub const NOISE_EDGE_TOL: f64 = 1e-12;

/// Eigenvalues (descending) with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    pub vectors: Square,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    /// `Σ λ_k v_k v_kᵀ` over the selected indices.
    pub fn partial_sum(&self, indices: impl IntoIterator<Item = usize>) -> Square {
        let mut out = Square::zeros(self.n());
        for k in indices {
            out.add_outer(self.values[k], &self.vector(k));
        }
        out
    }

    pub fn reconstruct(&self) -> Square {
        self.partial_sum(0..self.n())
    }
}

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Each eigenvector is signed so that its entry of largest magnitude is
/// positive.
pub fn eigh(matrix: &SymMatrix) -> Result<SpectralDecomposition> {
    eigh_square(matrix.values())
}

pub fn eigh_square(matrix: &Square) -> Result<SpectralDecomposition> {
    let asym = matrix.max_asymmetry();
    if !(asym <= SYMMETRY_TOL) {
        return Err(Error::Precondition(format!(
            "eigh needs a symmetric matrix (max |a_ij - a_ji| = {asym:e})"
        )));
    }
    let n = matrix.n();
    let mut a = matrix.clone();
    // rows of `vt` are the eigenvectors
    let mut vt = Square::identity(n);
    let scale = matrix.frobenius_norm();
    let target = OFF_DIAGONAL_TOL * scale;

    let mut converged = off_diagonal_norm(&a) <= target;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps (off-diagonal norm {:e})",
                off_diagonal_norm(&a)
            )));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                if sweep > 3 && (apq.abs() * 1e2 + app.abs() == app.abs()) && (apq.abs() * 1e2 + aqq.abs() == aqq.abs()) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotate(&mut a, &mut vt, p, q);
            }
        }
        sweep += 1;
        converged = off_diagonal_norm(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let mut vectors = Square::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        let v = vt.row(k);
        let mut lead = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[lead].abs() {
                lead = i;
            }
        }
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for (i, &x) in v.iter().enumerate() {
            vectors[(i, col)] = sign * x;
        }
    }
    Ok(SpectralDecomposition { values, vectors })
}

fn off_diagonal_norm(a: &Square) -> f64 {
    let n = a.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Annihilates `a[p][q]` with a plane rotation and accumulates it into `vt`.
fn rotate(a: &mut Square, vt: &mut Square, p: usize, q: usize) {
    let n = a.n();
    let apq = a[(p, q)];
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(p, k)];
        let akq = a[(q, k)];
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        a[(p, k)] = new_p;
        a[(k, p)] = new_p;
        a[(q, k)] = new_q;
        a[(k, q)] = new_q;
    }
    for k in 0..n {
        let vp = vt[(p, k)];
        let vq = vt[(q, k)];
        vt[(p, k)] = c * vp - s * vq;
        vt[(q, k)] = s * vp + c * vq;
    }
}

/// Marcenko-Pastur support `(λ−, λ+)` with `Q = T / N`.
pub fn mp_bounds(n_series: usize, n_obs: usize, sigma2: f64) -> Result<(f64, f64)> {
    if n_series < 2 {
        return Err(Error::Precondition(format!("need at least 2 series, got {n_series}")));
    }
    if n_obs <= n_series {
        return Err(Error::Precondition(format!(
            "random matrix bounds need T > N (T = {n_obs}, N = {n_series})"
        )));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Precondition(format!("sigma2 must be positive, got {sigma2}")));
    }
    let root = (n_series as f64 / n_obs as f64).sqrt();
    Ok((sigma2 * (1.0 - root).powi(2), sigma2 * (1.0 + root).powi(2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    Noise,
    Market,
    Structure,
}

/// `C = C_r + C_m + C_g`.
#[derive(Debug, Clone)]
pub struct RmtSplit {
    pub noise: Square,
    pub market: Square,
    pub structure: Square,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub lambda_max: f64,
    pub sigma2: f64,
    /// `1 − λ_max / N` was not positive and `σ² = 1` was used instead.
    pub sigma2_fallback: bool,
    pub n_obs: usize,
    pub eigenvalues: Vec<f64>,
    pub buckets: Vec<Bucket>,
    pub market_vector: Vec<f64>,
}

impl RmtSplit {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn count(&self, bucket: Bucket) -> usize {
        self.buckets.iter().filter(|&&b| b == bucket).count()
    }

    pub fn report(&self, kind: MatrixKind) -> SpectralReport {
        SpectralReport {
            kind,
            n: self.n(),
            n_obs: self.n_obs,
            eigenvalues: self.eigenvalues.clone(),
            lambda_minus: self.lambda_minus,
            lambda_plus: self.lambda_plus,
            lambda_max: self.lambda_max,
            sigma2: self.sigma2,
            sigma2_fallback: self.sigma2_fallback,
            counts: BucketCounts {
                noise: self.count(Bucket::Noise),
                structure: self.count(Bucket::Structure),
                market: self.count(Bucket::Market),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BucketCounts {
    pub noise: usize,
    pub structure: usize,
    pub market: usize,
}

/// JSON summary of a decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub kind: MatrixKind,
    pub n: usize,
    pub n_obs: usize,
    pub eigenvalues: Vec<f64>,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub lambda_max: f64,
    pub sigma2: f64,
    pub sigma2_fallback: bool,
    pub counts: BucketCounts,
}

/// Splits a correlation or similarity matrix into noise, market mode and
/// structure using the Marcenko-Pastur band with `σ² = 1 − λ_max / N`.
pub fn rmt_decompose(matrix: &SymMatrix, n_obs: usize) -> Result<RmtSplit> {
    let n = matrix.n();
    if n < 3 {
        return Err(Error::Precondition(format!(
            "noise/market/structure split needs at least 3 series, got {n}"
        )));
    }
    if n_obs <= n {
        return Err(Error::Precondition(format!(
            "random matrix filtering needs T > N (T = {n_obs}, N = {n})"
        )));
    }
    let eig = eigh(matrix)?;
    let lambda_max = eig.values[0];
    let mut sigma2 = 1.0 - lambda_max / n as f64;
    let sigma2_fallback = !(sigma2 > 0.0);
    if sigma2_fallback {
        log::warn!("1 - λ_max/N = {sigma2} is not positive; using σ² = 1");
        sigma2 = 1.0;
    }
    let (lambda_minus, lambda_plus) = mp_bounds(n, n_obs, sigma2)?;

    let buckets: Vec<Bucket> = eig
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            if k == 0 {
                Bucket::Market
            } else if v <= lambda_plus + NOISE_EDGE_TOL {
                Bucket::Noise
            } else {
                Bucket::Structure
            }
        })
        .collect();
    let pick = |b: Bucket| buckets.iter().enumerate().filter(move |(_, &x)| x == b).map(|(k, _)| k);
    Ok(RmtSplit {
        noise: eig.partial_sum(pick(Bucket::Noise)),
        market: eig.partial_sum(pick(Bucket::Market)),
        structure: eig.partial_sum(pick(Bucket::Structure)),
        lambda_minus,
        lambda_plus,
        lambda_max,
        sigma2,
        sigma2_fallback,
        n_obs,
        market_vector: eig.vector(0),
        eigenvalues: eig.values,
        buckets,
    })
}

/// Binary symmetric adjacency without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    links: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut links = vec![false; n * n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Dimension(format!("edge ({i}, {j}) outside {n} nodes")));
            }
            if i == j {
                return Err(Error::Precondition(format!("self-loop on node {i}")));
            }
            links[i * n + j] = true;
            links[j * n + i] = true;
        }
        Ok(Self { n, links })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.links[i * self.n + j]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.links[i * self.n..(i + 1) * self.n].iter().filter(|&&b| b).count()
    }

    pub fn edge_count(&self) -> usize {
        self.links.iter().filter(|&&b| b).count() / 2
    }

    /// Edge count over `N(N−1)/2`.
    pub fn density(&self) -> f64 {
        let pairs = self.n * self.n.saturating_sub(1) / 2;
        if pairs == 0 {
            0.0
        } else {
            self.edge_count() as f64 / pairs as f64
        }
    }

    /// No edges at all. Legal, but modularity is undefined on it.
    pub fn is_disconnected(&self) -> bool {
        self.edge_count() == 0
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Keeps `a_ij = 1` iff `i ≠ j` and `m_ij ≥ θ`.
pub fn threshold_filter(matrix: &SymMatrix, theta: f64) -> AdjacencyMatrix {
    let n = matrix.n();
    let mut links = vec![false; n * n];
    for (i, j, v) in matrix.upper_entries() {
        if v >= theta {
            links[i * n + j] = true;
            links[j * n + i] = true;
        }
    }
    AdjacencyMatrix { n, links }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdChoice {
    pub theta: f64,
    pub density: f64,
}

/// Smallest off-diagonal value `θ` whose asset graph has edge density at
/// most `target_density`.
///
/// If even the largest value gives a denser graph (ties), that value is
/// returned with its density. `target_density = 1` returns the minimum
/// off-diagonal entry.
pub fn suggest_threshold(matrix: &SymMatrix, target_density: f64) -> Result<ThresholdChoice> {
    if !(target_density > 0.0 && target_density <= 1.0) {
        return Err(Error::Config(format!(
            "target density {target_density} outside (0, 1]"
        )));
    }
    let mut values: Vec<f64> = matrix.upper_entries().map(|(_, _, v)| v).collect();
    if values.is_empty() {
        return Err(Error::Precondition("threshold selection needs at least 2 series".into()));
    }
    values.sort_by(f64::total_cmp);
    let pairs = values.len() as f64;
    let mut start = 0;
    while start < values.len() {
        let v = values[start];
        // entries >= v
        let density = (values.len() - start) as f64 / pairs;
        if density <= target_density {
            return Ok(ThresholdChoice { theta: v, density });
        }
        let mut next = start + 1;
        while next < values.len() && values[next] == v {
            next += 1;
        }
        if next == values.len() {
            return Ok(ThresholdChoice { theta: v, density });
        }
        start = next;
    }
    unreachable!("loop returns on the last distinct value")
}
