//! Modularity objectives and their maximisers.
//!
//! Both objectives share one form: given a symmetric gain matrix `B` and a
//! normaliser `c`, the quality of an assignment `η` is
//!
//! ```text
//! Q(η) = (1/c) Σ_{i,j} B_ij δ(η_i, η_j)
//! ```
//!
//! For a graph `B = A − k kᵀ / 2l` and `c = 2l` (configuration model); for a
//! random-matrix filtered matrix `B = C_g` and `c = Σ_ij C_ij`. The diagonal
//! is included; it adds the same constant to every partition.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::SectorMap;
use crate::matrix::{Square, SymMatrix, SYMMETRY_TOL};
use crate::spectral::{AdjacencyMatrix, RmtSplit};

/// Minimum modularity gain for a Louvain move or a greedy merge.
pub const MIN_GAIN: f64 = 1e-12;
/// Largest instance accepted by [`brute_force_partition`].
pub const BRUTE_FORCE_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainMode {
    Configuration,
    Rmt,
    Custom,
}

#[derive(Debug, Clone)]
pub struct GainMatrix {
    b: Square,
    c_norm: f64,
    mode: GainMode,
}

impl GainMatrix {
    pub fn new(b: Square, c_norm: f64, mode: GainMode) -> Result<Self> {
        let asym = b.max_asymmetry();
        if !(asym <= SYMMETRY_TOL) {
            return Err(Error::Precondition(format!("gain matrix not symmetric ({asym:e})")));
        }
        if b.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("gain matrix has non-finite entries".into()));
        }
        if !(c_norm > 0.0 && c_norm.is_finite()) {
            return Err(Error::Numeric(format!("modularity normaliser must be positive, got {c_norm}")));
        }
        Ok(Self { b, c_norm, mode })
    }

    pub fn n(&self) -> usize {
        self.b.n()
    }

    pub fn b(&self) -> &Square {
        &self.b
    }

    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    pub fn mode(&self) -> GainMode {
        self.mode
    }

    /// Same objective with nodes relabelled: new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            b: self.b.permuted(perm),
            c_norm: self.c_norm,
            mode: self.mode,
        }
    }
}

/// Configuration-model gain `B_ij = A_ij − k_i k_j / 2l`, normaliser `2l`.
pub fn gain_from_adjacency(adj: &AdjacencyMatrix) -> Result<GainMatrix> {
    let links = adj.edge_count();
    if links == 0 {
        return Err(Error::Numeric("graph has no edges; modularity is undefined".into()));
    }
    let two_l = 2.0 * links as f64;
    let degree: Vec<f64> = (0..adj.n()).map(|i| adj.degree(i) as f64).collect();
    let b = Square::from_fn(adj.n(), |i, j| {
        let a = if adj.has_edge(i, j) { 1.0 } else { 0.0 };
        a - degree[i] * degree[j] / two_l
    });
    GainMatrix::new(b, two_l, GainMode::Configuration)
}

/// Gain `B = C_g` normalised by the sum of all entries of the original matrix.
pub fn gain_from_rmt(split: &RmtSplit, original: &SymMatrix) -> Result<GainMatrix> {
    if split.n() != original.n() {
        return Err(Error::Dimension(format!(
            "split has {} series, matrix has {}",
            split.n(),
            original.n()
        )));
    }
    let c_norm = original.values().sum();
    if !(c_norm > 0.0) {
        return Err(Error::Numeric(format!("C_norm = {c_norm} is not positive")));
    }
    GainMatrix::new(split.structure.clone(), c_norm, GainMode::Rmt)
}

/// `Q = (1/c) Σ_{η_i = η_j} B_ij`.
pub fn modularity(gain: &GainMatrix, assignment: &[usize]) -> f64 {
    assert_eq!(assignment.len(), gain.n(), "assignment length must equal node count");
    let n = gain.n();
    let mut total = 0.0;
    for i in 0..n {
        let row = gain.b.row(i);
        for j in 0..n {
            if assignment[i] == assignment[j] {
                total += row[j];
            }
        }
    }
    total / gain.c_norm
}

/// Community assignment with contiguous labels `0..k` and its modularity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub assignment: Vec<usize>,
    pub k: usize,
    pub q: f64,
}

impl Partition {
    /// Relabels communities in order of first appearance and scores them.
    pub fn from_labels(gain: &GainMatrix, labels: &[usize]) -> Self {
        let (assignment, k) = relabel(labels);
        let q = modularity(gain, &assignment);
        Self { assignment, k, q }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn members(&self, community: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == community)
            .map(|(i, _)| i)
            .collect()
    }

    /// True when both assignments induce the same set partition.
    pub fn same_grouping(a: &[usize], b: &[usize]) -> bool {
        a.len() == b.len() && relabel(a).0 == relabel(b).0
    }
}

/// Contiguous labels in order of first appearance, plus the label count.
pub fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let out = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// Output of a detection run.
#[derive(Debug, Clone)]
pub struct Detection {
    pub partition: Partition,
    /// Accepted moves (Louvain) or merges (greedy).
    pub steps: usize,
    /// Aggregation levels visited (Louvain only; 0 for greedy).
    pub levels: usize,
}

/// Louvain with deterministic ascending node order (or a seeded shuffle).
pub fn louvain(gain: &GainMatrix, seed: Option<u64>) -> Detection {
    louvain_observed(gain, seed, &mut |_| {})
}

/// [`louvain`] calling `observer` with the node-level assignment after every
/// accepted move.
pub fn louvain_observed(gain: &GainMatrix, seed: Option<u64>, observer: &mut dyn FnMut(&[usize])) -> Detection {
    let n = gain.n();
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut level_b = gain.b.clone();
    // original node -> node of the current level
    let mut membership: Vec<usize> = (0..n).collect();
    let mut steps = 0;
    let mut levels = 0;
    let mut flat = vec![0; n];

    loop {
        let m = level_b.n();
        levels += 1;
        let mut comm: Vec<usize> = (0..m).collect();
        let mut size = vec![1usize; m];
        let mut order: Vec<usize> = (0..m).collect();
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        let mut sums = vec![0.0; m];
        let mut moved_this_level = false;

        loop {
            let mut moved = false;
            for &i in &order {
                sums.iter_mut().for_each(|s| *s = 0.0);
                let row = level_b.row(i);
                for (j, &bij) in row.iter().enumerate() {
                    if j != i {
                        sums[comm[j]] += bij;
                    }
                }
                let current = comm[i];
                let mut best = current;
                let mut best_sum = sums[current];
                for c in 0..m {
                    // candidate communities hold at least one node other than i
                    let others = size[c] - usize::from(c == current);
                    if others == 0 || c == current {
                        continue;
                    }
                    if sums[c] > best_sum {
                        best = c;
                        best_sum = sums[c];
                    }
                }
                let delta = 2.0 * (best_sum - sums[current]) / gain.c_norm;
                if best != current && delta > MIN_GAIN {
                    comm[i] = best;
                    size[current] -= 1;
                    size[best] += 1;
                    moved = true;
                    moved_this_level = true;
                    steps += 1;
                    for (f, &node) in flat.iter_mut().zip(&membership) {
                        *f = comm[node];
                    }
                    observer(&flat);
                }
            }
            if !moved {
                break;
            }
        }

        if !moved_this_level {
            break;
        }
        let (labels, k) = relabel(&comm);
        let mut next = Square::zeros(k);
        for i in 0..m {
            let row = level_b.row(i);
            for j in 0..m {
                next[(labels[i], labels[j])] += row[j];
            }
        }
        for node in membership.iter_mut() {
            *node = labels[*node];
        }
        level_b = next;
        if k == 1 {
            break;
        }
    }

    Detection {
        partition: Partition::from_labels(gain, &membership),
        steps,
        levels,
    }
}

/// Clauset-Newman-Moore agglomeration on a dense gain matrix.
pub fn greedy_cnm(gain: &GainMatrix) -> Detection {
    greedy_cnm_observed(gain, &mut |_| {})
}

/// [`greedy_cnm`] calling `observer` with the node-level assignment after
/// every merge.
pub fn greedy_cnm_observed(gain: &GainMatrix, observer: &mut dyn FnMut(&[usize])) -> Detection {
    let n = gain.n();
    // block sums between communities, indexed by the community's founding node
    let mut e = gain.b.clone();
    let mut active = vec![true; n];
    let mut label: Vec<usize> = (0..n).collect();
    let mut q = e.trace() / gain.c_norm;
    let mut best_q = q;
    let mut best_labels = label.clone();
    let mut steps = 0;

    loop {
        let mut best: Option<(usize, usize)> = None;
        let mut best_sum = f64::NEG_INFINITY;
        for a in 0..n {
            if !active[a] {
                continue;
            }
            let row = e.row(a);
            for b in (a + 1)..n {
                if active[b] && row[b] > best_sum {
                    best_sum = row[b];
                    best = Some((a, b));
                }
            }
        }
        let Some((a, b)) = best else { break };
        let delta = 2.0 * best_sum / gain.c_norm;
        if !(delta > MIN_GAIN) {
            break;
        }

        let e_ab = e[(a, b)];
        let e_bb = e[(b, b)];
        for k in 0..n {
            if active[k] && k != a && k != b {
                let v = e[(a, k)] + e[(b, k)];
                e[(a, k)] = v;
                e[(k, a)] = v;
            }
        }
        e[(a, a)] += e_bb + 2.0 * e_ab;
        active[b] = false;
        for l in label.iter_mut() {
            if *l == b {
                *l = a;
            }
        }
        q += delta;
        steps += 1;
        observer(&label);
        if q > best_q {
            best_q = q;
            best_labels.clone_from(&label);
        }
    }

    Detection {
        partition: Partition::from_labels(gain, &best_labels),
        steps,
        levels: 0,
    }
}

/// Exact maximiser by enumerating every set partition (restricted growth
/// strings). Ties keep the first partition found; the enumeration opens new
/// blocks before joining existing ones, so all-singletons wins a full tie.
pub fn brute_force_partition(gain: &GainMatrix) -> Result<Partition> {
    let n = gain.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::Precondition(format!(
            "exhaustive search limited to {BRUTE_FORCE_MAX_N} nodes, got {n}"
        )));
    }
    let mut search = Exhaustive {
        b: &gain.b,
        labels: vec![0; n],
        best_labels: (0..n).collect(),
        best_score: f64::NEG_INFINITY,
    };
    search.descend(0, 0, 0.0);
    Ok(Partition::from_labels(gain, &search.best_labels))
}

struct Exhaustive<'a> {
    b: &'a Square,
    labels: Vec<usize>,
    best_labels: Vec<usize>,
    best_score: f64,
}

impl Exhaustive<'_> {
    fn descend(&mut self, node: usize, blocks: usize, score: f64) {
        let n = self.labels.len();
        if node == n {
            let tol = MIN_GAIN * self.best_score.abs().max(1.0);
            if score > self.best_score + tol || self.best_score == f64::NEG_INFINITY {
                self.best_score = score;
                self.best_labels.clone_from(&self.labels);
            }
            return;
        }
        let row = self.b.row(node);
        let candidates = std::iter::once(blocks).chain(0..blocks);
        for c in candidates {
            let mut add = row[node];
            for j in 0..node {
                if self.labels[j] == c {
                    add += 2.0 * row[j];
                }
            }
            self.labels[node] = c;
            let next_blocks = if c == blocks { blocks + 1 } else { blocks };
            self.descend(node + 1, next_blocks, score + add);
        }
    }
}

/// One row of the community-by-sector table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityComposition {
    pub community: usize,
    pub size: usize,
    /// Counts aligned with [`SectorOverlap::sectors`].
    pub counts: Vec<usize>,
    /// Largest sector share within the community.
    pub purity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorOverlap {
    pub sectors: Vec<String>,
    pub communities: Vec<CommunityComposition>,
}

pub const UNKNOWN_SECTOR: &str = "Unknown";

/// Contingency of communities against sector labels; unmapped tickers go to
/// an `Unknown` column.
pub fn sector_overlap(partition: &Partition, sectors: &SectorMap, tickers: &[String]) -> Result<SectorOverlap> {
    if tickers.len() != partition.assignment.len() {
        return Err(Error::Dimension(format!(
            "{} tickers for a partition of {} nodes",
            tickers.len(),
            partition.assignment.len()
        )));
    }
    let mut labels = sectors.sectors();
    if tickers.iter().any(|t| sectors.get(t).is_none()) {
        labels.push(UNKNOWN_SECTOR.to_string());
    }
    let column = |t: &str| {
        let label = sectors.get(t).unwrap_or(UNKNOWN_SECTOR);
        labels.iter().position(|l| l == label).expect("label collected above")
    };
    let mut counts = vec![vec![0usize; labels.len()]; partition.k];
    for (t, &c) in tickers.iter().zip(&partition.assignment) {
        counts[c][column(t)] += 1;
    }
    let communities = counts
        .into_iter()
        .enumerate()
        .map(|(community, counts)| {
            let size: usize = counts.iter().sum();
            let max = counts.iter().copied().max().unwrap_or(0);
            CommunityComposition {
                community,
                size,
                purity: if size == 0 { 0.0 } else { max as f64 / size as f64 },
                counts,
            }
        })
        .collect();
    Ok(SectorOverlap {
        sectors: labels,
        communities,
    })
}

/// Writes `ticker,community` rows.
pub fn write_partition_csv(path: impl AsRef<Path>, tickers: &[String], partition: &Partition) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["ticker", "community"])?;
    for (t, c) in tickers.iter().zip(&partition.assignment) {
        wtr.write_record([t.as_str(), &c.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> GainMatrix {
        let adj = AdjacencyMatrix::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        gain_from_adjacency(&adj).unwrap()
    }

    fn triangle() -> GainMatrix {
        let adj = AdjacencyMatrix::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        gain_from_adjacency(&adj).unwrap()
    }

    #[test]
    fn triangle_gain() {
        let g = triangle();
        assert_eq!(g.c_norm(), 6.0);
        assert!((g.b()[(0, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.b()[(1, 1)] + 2.0 / 3.0).abs() < 1e-15);
        for i in 0..3 {
            assert!(g.b().row(i).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn single_edge_gain() {
        let adj = AdjacencyMatrix::from_edges(2, &[(0, 1)]).unwrap();
        let g = gain_from_adjacency(&adj).unwrap();
        assert_eq!(g.c_norm(), 2.0);
        assert_eq!(g.b().row(0), &[-0.5, 0.5]);
        assert_eq!(g.b().row(1), &[0.5, -0.5]);
    }

    #[test]
    fn empty_graph_rejected() {
        let adj = AdjacencyMatrix::from_edges(3, &[]).unwrap();
        assert!(gain_from_adjacency(&adj).is_err());
    }

    #[test]
    fn modularity_examples() {
        let g = two_triangles();
        assert!(modularity(&g, &[0; 6]).abs() < 1e-12);
        assert!((modularity(&g, &[0, 0, 0, 1, 1, 1]) - 0.5).abs() < 1e-12);
        assert!((modularity(&triangle(), &[0, 1, 2]) + 1.0 / 3.0).abs() < 1e-12);
        // relabelling communities does not change Q
        assert_eq!(modularity(&g, &[0, 0, 0, 1, 1, 1]), modularity(&g, &[7, 7, 7, 2, 2, 2]));
    }

    #[test]
    fn louvain_two_triangles() {
        let d = louvain(&two_triangles(), None);
        assert_eq!(d.partition.k, 2);
        assert!((d.partition.q - 0.5).abs() < 1e-12);
        assert!(Partition::same_grouping(&d.partition.assignment, &[0, 0, 0, 1, 1, 1]));
    }

    #[test]
    fn greedy_two_triangles() {
        let d = greedy_cnm(&two_triangles());
        assert_eq!(d.partition.k, 2);
        assert!((d.partition.q - 0.5).abs() < 1e-12);
        assert!(Partition::same_grouping(&d.partition.assignment, &[0, 0, 0, 1, 1, 1]));
    }

    #[test]
    fn brute_force_examples() {
        let p = brute_force_partition(&two_triangles()).unwrap();
        assert!((p.q - 0.5).abs() < 1e-12);
        let one = GainMatrix::new(Square::from_diagonal(&[0.3]), 1.0, GainMode::Custom).unwrap();
        assert_eq!(brute_force_partition(&one).unwrap().assignment, vec![0]);
        let zero = GainMatrix::new(Square::zeros(4), 1.0, GainMode::Custom).unwrap();
        let p = brute_force_partition(&zero).unwrap();
        assert_eq!(p.assignment, vec![0, 1, 2, 3]);
        assert_eq!(p.q, 0.0);
        let big = GainMatrix::new(Square::zeros(13), 1.0, GainMode::Custom).unwrap();
        assert!(brute_force_partition(&big).is_err());
    }

    #[test]
    fn single_node() {
        let g = GainMatrix::new(Square::from_diagonal(&[0.25]), 2.0, GainMode::Custom).unwrap();
        let d = louvain(&g, None);
        assert_eq!(d.partition.assignment, vec![0]);
        assert_eq!(d.partition.q, 0.125);
        assert_eq!(greedy_cnm(&g).partition.k, 1);
    }

    #[test]
    fn negative_off_diagonal_stays_singletons() {
        let b = Square::from_fn(5, |i, j| if i == j { 1.0 } else { -0.1 });
        let g = GainMatrix::new(b, 5.0, GainMode::Custom).unwrap();
        assert_eq!(greedy_cnm(&g).partition.k, 5);
        assert_eq!(louvain(&g, None).partition.k, 5);
    }

    #[test]
    fn path_graph_matches_oracle() {
        let adj = AdjacencyMatrix::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let g = gain_from_adjacency(&adj).unwrap();
        let exact = brute_force_partition(&g).unwrap();
        let greedy = greedy_cnm(&g).partition;
        let lv = louvain(&g, None).partition;
        assert!(greedy.q <= exact.q + 1e-12);
        assert!(lv.q <= exact.q + 1e-12);
        // hand check: {0,1},{2,3} gives 2·(2 − 9/6)/6 = 1/6
        assert!((exact.q - 1.0 / 6.0).abs() < 1e-12);
        assert!((greedy.q - exact.q).abs() < 1e-12);
    }

    #[test]
    fn block_gain_recovered() {
        let blocks = [0, 0, 1, 1, 0, 1, 1, 0];
        let b = Square::from_fn(8, |i, j| if blocks[i] == blocks[j] { 1.0 } else { -1.0 });
        let g = GainMatrix::new(b, 64.0, GainMode::Custom).unwrap();
        for d in [louvain(&g, None), louvain(&g, Some(3)), greedy_cnm(&g)] {
            assert!(Partition::same_grouping(&d.partition.assignment, &blocks));
        }
        assert!(Partition::same_grouping(&brute_force_partition(&g).unwrap().assignment, &blocks));
    }

    #[test]
    fn observers_see_increasing_q() {
        let g = two_triangles();
        let mut last = modularity(&g, &(0..6).collect::<Vec<_>>());
        louvain_observed(&g, None, &mut |a| {
            let q = modularity(&g, a);
            assert!(q > last);
            last = q;
        });
        let mut last = modularity(&g, &(0..6).collect::<Vec<_>>());
        greedy_cnm_observed(&g, &mut |a| {
            let q = modularity(&g, a);
            assert!(q > last);
            last = q;
        });
    }

    #[test]
    fn sector_table() {
        let g = two_triangles();
        let p = Partition::from_labels(&g, &[0, 0, 0, 1, 1, 1]);
        let tickers: Vec<String> = (0..6).map(|i| format!("T{i}")).collect();
        let sectors = SectorMap::from_pairs(tickers.iter().enumerate().map(|(i, t)| {
            (t.clone(), if i < 3 { "Energy" } else { "Utilities" })
        }))
        .unwrap();
        let o = sector_overlap(&p, &sectors, &tickers).unwrap();
        assert_eq!(o.sectors, vec!["Energy", "Utilities"]);
        assert!(o.communities.iter().all(|c| c.purity == 1.0));

        let spread = Partition {
            assignment: vec![0; 11],
            k: 1,
            q: 0.0,
        };
        let names: Vec<String> = (0..11).map(|i| format!("S{i}")).collect();
        let map = SectorMap::from_pairs(names.iter().enumerate().map(|(i, t)| (t.clone(), format!("sector{i:02}")))).unwrap();
        let o = sector_overlap(&spread, &map, &names).unwrap();
        assert!((o.communities[0].purity - 1.0 / 11.0).abs() < 1e-15);

        let partial = SectorMap::from_pairs([("T0", "Energy")]).unwrap();
        let o = sector_overlap(&p, &partial, &tickers).unwrap();
        assert_eq!(o.sectors.last().unwrap(), UNKNOWN_SECTOR);
        assert_eq!(o.communities[1].counts, vec![0, 3]);
    }
}
