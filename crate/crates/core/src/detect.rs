//! Turning eigenvector support into binary real/noise labels, plus a
//! union-find connected-components oracle.

use serde::{Deserialize, Serialize};

use crate::graph::SparseGraph;
use crate::spectral::EigenPair;

/// Eigenvalue floor excluding (numerically) zero eigenpairs in multi mode:
/// component indicators sit at the closed end of the interval and are not
/// evidence of a real cluster.
pub const EIG_VALUE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionMode {
    Single,
    Multi,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub mode: DetectionMode,
    /// Support threshold relative to the vector's max absolute entry.
    pub support_threshold_rel: f64,
    /// Multi mode keeps eigenpairs with value strictly below this cutoff.
    pub eig_cutoff: f64,
    /// Number of eigenvectors extracted in multi mode (power solver).
    pub num_eigvecs: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            mode: DetectionMode::Multi,
            support_threshold_rel: 1e-3,
            eig_cutoff: 1.0,
            num_eigvecs: 20,
        }
    }
}

/// Binary labels: `true` = real, `false` = noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    pub y: Vec<bool>,
    /// Set when detection was degenerate (all-zero vector, empty pair list).
    pub degenerate: bool,
}

impl LabelVector {
    pub fn all_noise(n: usize) -> Self {
        LabelVector {
            y: vec![false; n],
            degenerate: false,
        }
    }

    pub fn real_count(&self) -> usize {
        self.y.iter().filter(|&&b| b).count()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// Marks supported entries true in `y`, mapping subgraph indices back to
/// original indices through `kept`.
fn mark_support(y: &mut [bool], vector: &[f64], threshold: f64, kept: &[usize]) {
    for (sub_idx, &v) in vector.iter().enumerate() {
        if v.abs() >= threshold {
            y[kept[sub_idx]] = true;
        }
    }
}

/// Original indices covered by the eigenvector domain: all nodes except the
/// isolated ones, in order.
fn kept_indices(n_total: usize, isolated: &[usize]) -> Vec<usize> {
    let mut is_isolated = vec![false; n_total];
    for &i in isolated {
        is_isolated[i] = true;
    }
    (0..n_total).filter(|&i| !is_isolated[i]).collect()
}

/// Single-cluster detection: real where the Fiedler vector has support.
/// Isolated nodes are always noise.
pub fn detect_single(
    fiedler: &EigenPair,
    n_total: usize,
    isolated: &[usize],
    cfg: &DetectionConfig,
) -> LabelVector {
    let kept = kept_indices(n_total, isolated);
    debug_assert_eq!(kept.len(), fiedler.vector.len());
    let mut out = LabelVector::all_noise(n_total);
    let m = max_abs(&fiedler.vector);
    if m == 0.0 {
        out.degenerate = true;
        return out;
    }
    mark_support(&mut out.y, &fiedler.vector, cfg.support_threshold_rel * m, &kept);
    out
}

/// Multi-cluster detection: real where some eigenvector with eigenvalue in
/// `(floor, eig_cutoff)` has support. Zero-eigenvalue pairs are excluded.
pub fn detect_multi(
    pairs: &[EigenPair],
    n_total: usize,
    isolated: &[usize],
    cfg: &DetectionConfig,
) -> LabelVector {
    let kept = kept_indices(n_total, isolated);
    let mut out = LabelVector::all_noise(n_total);
    if pairs.is_empty() {
        out.degenerate = true;
        return out;
    }
    for pair in pairs {
        if pair.value <= EIG_VALUE_FLOOR || pair.value >= cfg.eig_cutoff {
            continue;
        }
        let m = max_abs(&pair.vector);
        if m == 0.0 {
            continue;
        }
        mark_support(&mut out.y, &pair.vector, cfg.support_threshold_rel * m, &kept);
    }
    out
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Connected components via union-find; component ids are assigned in order
/// of each component's smallest member index.
pub fn connected_components(graph: &SparseGraph) -> Vec<usize> {
    let n = graph.n_nodes();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for (j, _) in graph.neighbors(i) {
            uf.union(i, j);
        }
    }
    let mut id_of_root = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0usize; n];
    for i in 0..n {
        let r = uf.find(i);
        if id_of_root[r] == usize::MAX {
            id_of_root[r] = next;
            next += 1;
        }
        out[i] = id_of_root[r];
    }
    out
}

/// Ground-truth realization of the density prior: a node is real iff its
/// component has at least `min_component_size` members.
pub fn oracle_labels(graph: &SparseGraph, min_component_size: usize) -> LabelVector {
    let comp = connected_components(graph);
    let n_comp = comp.iter().copied().max().map_or(0, |c| c + 1);
    let mut sizes = vec![0usize; n_comp];
    for &c in &comp {
        sizes[c] += 1;
    }
    LabelVector {
        y: comp.iter().map(|&c| sizes[c] >= min_component_size).collect(),
        degenerate: false,
    }
}
