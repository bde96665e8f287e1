//! Exact k-nearest-neighbor and fixed-radius queries over 3-D points.
//!
//! A static, balanced kd-tree over the scaled event coordinates. Results are
//! exact: every query matches a brute-force scan, including the tie-break
//! rule (equal squared distances prefer the lower point index).

use crate::error::{Error, Result};

/// Squared Euclidean distance between two 3-D points.
#[inline]
pub fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug)]
pub struct KdIndex {
    points: Vec<[f64; 3]>,
    // Node layout: nodes[v] holds the median point of its subtree; children
    // are separate node ids. The build-time permutation is discarded.
    nodes: Vec<Node>,
    root: usize,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    axis: u8,
    point: u32,       // index into `points`
    left: u32,        // node id or NONE
    right: u32,       // node id or NONE
}

const NONE: u32 = u32::MAX;

impl KdIndex {
    pub fn build(points: Vec<[f64; 3]>) -> KdIndex {
        let n = points.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(n);
        let root = build_rec(&points, &mut order, 0, n, &mut nodes);
        KdIndex {
            points,
            nodes,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// The `k` nearest neighbors of point `query_row`, excluding itself,
    /// sorted ascending by squared distance (ties by lower index).
    pub fn knn(&self, query_row: usize, k: usize) -> Result<Vec<(usize, f64)>> {
        let n = self.points.len();
        if query_row >= n {
            return Err(Error::InvalidParameter(format!(
                "query row {query_row} out of range for {n} points"
            )));
        }
        if k == 0 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "k={k} outside [1, {}]",
                n.saturating_sub(1)
            )));
        }
        let q = self.points[query_row];
        let mut best = KnnHeap::new(k);
        self.knn_rec(self.root, &q, query_row, &mut best);
        Ok(best.into_sorted())
    }

    fn knn_rec(&self, node: usize, q: &[f64; 3], skip: usize, best: &mut KnnHeap) {
        if node == NONE as usize {
            return;
        }
        let nd = self.nodes[node];
        let p = nd.point as usize;
        if p != skip {
            best.offer(dist2(q, &self.points[p]), p);
        }
        let axis = nd.axis as usize;
        let diff = q[axis] - self.points[p][axis];
        let (near, far) = if diff < 0.0 {
            (nd.left, nd.right)
        } else {
            (nd.right, nd.left)
        };
        self.knn_rec(near as usize, q, skip, best);
        // Equality matters: a point at exactly the current worst distance can
        // still win the lower-index tie-break.
        if !best.full() || diff * diff <= best.worst_dist() {
            self.knn_rec(far as usize, q, skip, best);
        }
    }

    /// All neighbors of `query_row` within Euclidean distance `eps`
    /// (boundary inclusive), sorted by index.
    pub fn radius(&self, query_row: usize, eps: f64) -> Result<Vec<usize>> {
        let n = self.points.len();
        if query_row >= n {
            return Err(Error::InvalidParameter(format!(
                "query row {query_row} out of range for {n} points"
            )));
        }
        if eps < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "radius must be non-negative, got {eps}"
            )));
        }
        let q = self.points[query_row];
        let mut out = Vec::new();
        self.radius_rec(self.root, &q, query_row, eps * eps, &mut out);
        out.sort_unstable();
        Ok(out)
    }

    fn radius_rec(&self, node: usize, q: &[f64; 3], skip: usize, eps2: f64, out: &mut Vec<usize>) {
        if node == NONE as usize {
            return;
        }
        let nd = self.nodes[node];
        let p = nd.point as usize;
        if p != skip && dist2(q, &self.points[p]) <= eps2 {
            out.push(p);
        }
        let axis = nd.axis as usize;
        let diff = q[axis] - self.points[p][axis];
        let (near, far) = if diff < 0.0 {
            (nd.left, nd.right)
        } else {
            (nd.right, nd.left)
        };
        self.radius_rec(near as usize, q, skip, eps2, out);
        if diff * diff <= eps2 {
            self.radius_rec(far as usize, q, skip, eps2, out);
        }
    }
}

fn build_rec(
    points: &[[f64; 3]],
    order: &mut [u32],
    lo: usize,
    hi: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    if lo >= hi {
        return NONE as usize;
    }
    // Split along the widest axis of the cell's bounding box.
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for &i in &order[lo..hi] {
        let p = &points[i as usize];
        for d in 0..3 {
            min[d] = min[d].min(p[d]);
            max[d] = max[d].max(p[d]);
        }
    }
    let mut axis = 0;
    for d in 1..3 {
        if max[d] - min[d] > max[axis] - min[axis] {
            axis = d;
        }
    }
    let mid = (lo + hi) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let point = order[mid];
    let id = nodes.len();
    nodes.push(Node {
        axis: axis as u8,
        point,
        left: NONE,
        right: NONE,
    });
    let left = build_rec(points, order, lo, mid, nodes);
    let right = build_rec(points, order, mid + 1, hi, nodes);
    nodes[id].left = left as u32;
    nodes[id].right = right as u32;
    id
}

/// Bounded max-heap over (distance, index) with lexicographic order, so the
/// kept set is exactly the k smallest under the tie-break rule.
struct KnnHeap {
    k: usize,
    heap: Vec<(f64, usize)>,
}

impl KnnHeap {
    fn new(k: usize) -> Self {
        KnnHeap {
            k,
            heap: Vec::with_capacity(k + 1),
        }
    }

    fn full(&self) -> bool {
        self.heap.len() == self.k
    }

    fn worst_dist(&self) -> f64 {
        self.heap.first().map_or(f64::INFINITY, |w| w.0)
    }

    fn offer(&mut self, d: f64, idx: usize) {
        if self.full() {
            let worst = self.heap[0];
            if (d, idx) >= (worst.0, worst.1) {
                return;
            }
            self.pop_root();
        }
        self.heap.push((d, idx));
        // sift up
        let mut i = self.heap.len() - 1;
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.heap[parent] < self.heap[i] {
                self.heap.swap(parent, i);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn pop_root(&mut self) {
        let last = self.heap.len() - 1;
        self.heap.swap(0, last);
        self.heap.pop();
        let mut i = 0;
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut biggest = i;
            if l < self.heap.len() && self.heap[l] > self.heap[biggest] {
                biggest = l;
            }
            if r < self.heap.len() && self.heap[r] > self.heap[biggest] {
                biggest = r;
            }
            if biggest == i {
                break;
            }
            self.heap.swap(i, biggest);
            i = biggest;
        }
    }

    fn into_sorted(self) -> Vec<(usize, f64)> {
        let mut v: Vec<(f64, usize)> = self.heap;
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.into_iter().map(|(d, i)| (i, d)).collect()
    }
}

/// Brute-force kNN used as the oracle in tests and the `--brute-force` path.
pub fn knn_brute(points: &[[f64; 3]], query_row: usize, k: usize) -> Vec<(usize, f64)> {
    let q = &points[query_row];
    let mut all: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != query_row)
        .map(|(i, p)| (dist2(q, p), i))
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.truncate(k);
    all.into_iter().map(|(d, i)| (i, d)).collect()
}

/// Brute-force radius query oracle.
pub fn radius_brute(points: &[[f64; 3]], query_row: usize, eps: f64) -> Vec<usize> {
    let q = &points[query_row];
    let eps2 = eps * eps;
    points
        .iter()
        .enumerate()
        .filter(|&(i, p)| i != query_row && dist2(q, p) <= eps2)
        .map(|(i, _)| i)
        .collect()
}
