//! Spatiotemporal density, knee-point epsilon estimation, and weighted
//! neighbor-graph construction with combinatorial and normalized Laplacians.
//!
//! The density of an event is the mean *squared* distance to its k nearest
//! neighbors; the knee point of the sorted density sequence gives the graph
//! radius. The knee value lives in squared-distance units, so the radius
//! actually used for the neighborhood test is its square root (`eps_lin`).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::event::ScaledEvents;
use crate::kdtree::{dist2, KdIndex};

/// Per-event mean squared kNN distance, plus the non-increasing sort order.
#[derive(Debug, Clone)]
pub struct DensityProfile {
    pub d: Vec<f64>,
    pub knn_k: usize,
    /// Permutation such that `d[sorted_desc[0]] >= d[sorted_desc[1]] >= ...`
    pub sorted_desc: Vec<usize>,
}

/// Knee-point radius estimate, in squared-distance units.
#[derive(Debug, Clone, Copy)]
pub struct KneeEstimate {
    pub eps_sq: f64,
    /// Set when the profile is degenerate (constant or two points), in which
    /// case the largest density is returned.
    pub degenerate: bool,
}

impl KneeEstimate {
    /// Radius in linear distance units, for the neighborhood predicate.
    pub fn eps_lin(&self) -> f64 {
        self.eps_sq.max(0.0).sqrt()
    }
}

/// Undirected weighted graph in CSR form. Symmetric, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    n_nodes: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
}

impl SparseGraph {
    /// Builds from undirected edges `(i, j, w)`; each pair listed once.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<SparseGraph> {
        let mut directed: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len() * 2);
        for &(i, j, w) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("self-loop at node {i}")));
            }
            if !(w > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) has non-positive weight {w}"
                )));
            }
            directed.push((i, j, w));
            directed.push((j, i, w));
        }
        directed.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        directed.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));

        let mut row_ptr = vec![0usize; n_nodes + 1];
        for &(i, _, _) in &directed {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n_nodes {
            row_ptr[i + 1] += row_ptr[i];
        }
        let cols: Vec<usize> = directed.iter().map(|e| e.1).collect();
        let weights: Vec<f64> = directed.iter().map(|e| e.2).collect();
        let degrees: Vec<f64> = (0..n_nodes)
            .map(|i| weights[row_ptr[i]..row_ptr[i + 1]].iter().sum())
            .collect();
        Ok(SparseGraph {
            n_nodes,
            row_ptr,
            cols,
            weights,
            degrees,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.cols.len() / 2
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.weights[lo..hi].iter().copied())
    }

    /// Undirected edge list with `i < j`, sorted lexicographically.
    pub fn edge_list(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for i in 0..self.n_nodes {
            for (j, w) in self.neighbors(i) {
                if i < j {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Debug export: `i j weight` per line, sorted lexicographically.
    pub fn to_edge_list_text(&self) -> String {
        let mut s = String::new();
        for (i, j, w) in self.edge_list() {
            let _ = writeln!(s, "{i} {j} {w}");
        }
        s
    }

    /// Splits off degree-zero nodes. Returns the subgraph over the remaining
    /// nodes (in original order), the kept original indices, and the isolated
    /// original indices.
    pub fn non_isolated_subgraph(&self) -> (SparseGraph, Vec<usize>, Vec<usize>) {
        let kept: Vec<usize> = (0..self.n_nodes).filter(|&i| self.degrees[i] > 0.0).collect();
        let isolated: Vec<usize> = (0..self.n_nodes).filter(|&i| self.degrees[i] == 0.0).collect();
        let mut remap = vec![usize::MAX; self.n_nodes];
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = new;
        }
        let edges: Vec<(usize, usize, f64)> = self
            .edge_list()
            .into_iter()
            .map(|(i, j, w)| (remap[i], remap[j], w))
            .collect();
        let sub = SparseGraph::from_edges(kept.len(), &edges).expect("remapped edges are valid");
        (sub, kept, isolated)
    }
}

/// Sparse symmetric matrix in CSR form (diagonal included).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianKind {
    Combinatorial,
    Normalized,
}

/// A graph Laplacian with enough context for spectral bounds and null-space
/// bookkeeping.
#[derive(Debug, Clone)]
pub struct Laplacian {
    pub matrix: CsrMatrix,
    pub kind: LaplacianKind,
    /// W-degrees of the underlying graph nodes.
    pub graph_degrees: Vec<f64>,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.matrix.n
    }
}

/// Mean squared distance to the `knn_k` nearest neighbors, per event.
pub fn local_density(coords: &ScaledEvents, knn_k: usize) -> Result<DensityProfile> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "density profile needs at least 2 events, got {n}"
        )));
    }
    if knn_k == 0 || knn_k > n - 1 {
        return Err(Error::InvalidParameter(format!(
            "density k={knn_k} outside [1, {}]",
            n - 1
        )));
    }
    let index = KdIndex::build(coords.coords.clone());
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let nn = index.knn(i, knn_k)?;
        let mean_sq = nn.iter().map(|&(_, d2)| d2).sum::<f64>() / knn_k as f64;
        d.push(mean_sq);
    }
    let mut sorted_desc: Vec<usize> = (0..n).collect();
    sorted_desc.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap().then(a.cmp(&b)));
    Ok(DensityProfile {
        d,
        knn_k,
        sorted_desc,
    })
}

/// Knee point of the sorted density sequence: the element maximally below
/// the straight line joining the endpoints. Ties pick the smallest sorted
/// index (largest density).
pub fn knee_epsilon(profile: &DensityProfile) -> Result<KneeEstimate> {
    let n = profile.d.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "knee estimation needs at least 2 densities".into(),
        ));
    }
    let sorted: Vec<f64> = profile.sorted_desc.iter().map(|&i| profile.d[i]).collect();
    let d1 = sorted[0];
    let dn = sorted[n - 1];
    let slope = (dn - d1) / (n - 1) as f64;
    let mut best_gap = f64::NEG_INFINITY;
    let mut best_idx = 0usize;
    for (i, &dv) in sorted.iter().enumerate() {
        let line = d1 + slope * i as f64;
        let gap = line - dv;
        if gap > best_gap {
            best_gap = gap;
            best_idx = i;
        }
    }
    let degenerate = best_gap <= 0.0;
    Ok(KneeEstimate {
        eps_sq: if degenerate { d1 } else { sorted[best_idx] },
        degenerate,
    })
}

fn rbf_weight(gamma: f64, d2: f64) -> f64 {
    (-gamma * d2).exp()
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(())
}

/// Epsilon-neighbor graph: edge iff unsquared distance <= `eps_lin`,
/// RBF-weighted by the squared distance.
pub fn build_eng(coords: &ScaledEvents, eps_lin: f64, gamma: f64) -> Result<SparseGraph> {
    if eps_lin < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be non-negative, got {eps_lin}"
        )));
    }
    check_gamma(gamma)?;
    let n = coords.len();
    let index = KdIndex::build(coords.coords.clone());
    let mut edges = Vec::new();
    for i in 0..n {
        for j in index.radius(i, eps_lin)? {
            if i < j {
                let d2 = dist2(&coords.coords[i], &coords.coords[j]);
                edges.push((i, j, rbf_weight(gamma, d2)));
            }
        }
    }
    SparseGraph::from_edges(n, &edges)
}

/// Brute-force O(N^2) epsilon-neighbor construction, kept as the oracle path.
pub fn build_eng_brute(coords: &ScaledEvents, eps_lin: f64, gamma: f64) -> Result<SparseGraph> {
    if eps_lin < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be non-negative, got {eps_lin}"
        )));
    }
    check_gamma(gamma)?;
    let n = coords.len();
    let eps2 = eps_lin * eps_lin;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = dist2(&coords.coords[i], &coords.coords[j]);
            if d2 <= eps2 {
                edges.push((i, j, rbf_weight(gamma, d2)));
            }
        }
    }
    SparseGraph::from_edges(n, &edges)
}

/// k-nearest-neighbor graph, symmetrized by union, RBF weights.
pub fn build_knng(coords: &ScaledEvents, k: usize, gamma: f64) -> Result<SparseGraph> {
    check_gamma(gamma)?;
    let n = coords.len();
    if n < 2 || k == 0 || k > n - 1 {
        return Err(Error::InvalidParameter(format!(
            "knng k={k} outside [1, {}]",
            n.saturating_sub(1)
        )));
    }
    let index = KdIndex::build(coords.coords.clone());
    let mut edges = Vec::new();
    for i in 0..n {
        for (j, d2) in index.knn(i, k)? {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            edges.push((a, b, rbf_weight(gamma, d2)));
        }
    }
    SparseGraph::from_edges(n, &edges)
}

/// Per-node greedy neighbor budgets for the varied-k graph: node `i` admits
/// nearest neighbors while the cumulative admitted distance stays within
/// `1/N` of its total distance to all other nodes.
pub fn vknng_admitted(coords: &ScaledEvents) -> Result<Vec<Vec<usize>>> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "vknng needs at least 2 events, got {n}"
        )));
    }
    let mut admitted = Vec::with_capacity(n);
    for i in 0..n {
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist2(&coords.coords[i], &coords.coords[j]).sqrt(), j))
            .collect();
        let budget = dists.iter().map(|d| d.0).sum::<f64>() / n as f64;
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut acc = 0.0;
        let mut mine = Vec::new();
        for &(d, j) in &dists {
            if acc + d <= budget {
                acc += d;
                mine.push(j);
            } else {
                break;
            }
        }
        admitted.push(mine);
    }
    Ok(admitted)
}

/// Varied-k nearest-neighbor graph, symmetrized by union, RBF weights.
pub fn build_vknng(coords: &ScaledEvents, gamma: f64) -> Result<SparseGraph> {
    check_gamma(gamma)?;
    let n = coords.len();
    let admitted = vknng_admitted(coords)?;
    let mut edges = Vec::new();
    for (i, mine) in admitted.iter().enumerate() {
        for &j in mine {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            let d2 = dist2(&coords.coords[a], &coords.coords[b]);
            edges.push((a, b, rbf_weight(gamma, d2)));
        }
    }
    SparseGraph::from_edges(n, &edges)
}

/// Combinatorial Laplacian L = D - W over all nodes.
pub fn laplacian(graph: &SparseGraph) -> Laplacian {
    let n = graph.n_nodes();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        let mut placed_diag = false;
        for (j, w) in graph.neighbors(i) {
            if !placed_diag && j > i {
                cols.push(i);
                vals.push(graph.degrees()[i]);
                placed_diag = true;
            }
            cols.push(j);
            vals.push(-w);
        }
        if !placed_diag {
            cols.push(i);
            vals.push(graph.degrees()[i]);
        }
        row_ptr.push(cols.len());
    }
    Laplacian {
        matrix: CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        },
        kind: LaplacianKind::Combinatorial,
        graph_degrees: graph.degrees().to_vec(),
    }
}

/// Normalized Laplacian on the non-isolated subgraph. Returns the Laplacian
/// (with subgraph degrees for null-space handling) and the isolated nodes'
/// original indices.
pub fn normalized_laplacian(graph: &SparseGraph) -> (Laplacian, Vec<usize>) {
    let (sub, _kept, isolated) = graph.non_isolated_subgraph();
    let n = sub.n_nodes();
    let inv_sqrt: Vec<f64> = sub.degrees().iter().map(|&d| 1.0 / d.sqrt()).collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        let mut placed_diag = false;
        for (j, w) in sub.neighbors(i) {
            if !placed_diag && j > i {
                cols.push(i);
                vals.push(1.0);
                placed_diag = true;
            }
            cols.push(j);
            vals.push(-w * inv_sqrt[i] * inv_sqrt[j]);
        }
        if !placed_diag {
            cols.push(i);
            vals.push(1.0);
        }
        row_ptr.push(cols.len());
    }
    (
        Laplacian {
            matrix: CsrMatrix {
                n,
                row_ptr,
                cols,
                vals,
            },
            kind: LaplacianKind::Normalized,
            graph_degrees: sub.degrees().to_vec(),
        },
        isolated,
    )
}
