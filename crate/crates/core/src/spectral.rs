//! Matrix-free spectral reordering, power iteration with deflation, and a
//! dense eigendecomposition oracle.
//!
//! The reordered operator is
//!
//! ```text
//! S = M (I - M^w),   M = I - (2 / rho_max) L
//! ```
//!
//! which maps a Laplacian eigenvalue `lambda` to
//! `f(lambda) = mu (1 - mu^w)` with `mu = 1 - 2 lambda / rho_max`. Zero
//! eigenvalues map to zero and small non-zero eigenvalues become dominant,
//! so plain power iteration extracts eigenvectors for small eigenvalues.
//! Repeated rank-one deflation exposes the next pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, Laplacian, LaplacianKind};

/// Strictness margin on the spectral bound: the convergence argument needs
/// |1 - 2 lambda / rho_max| < 1 strictly, and degree-based bounds are tight
/// on e.g. star graphs.
const RHO_MARGIN: f64 = 1.0 + 1e-9;

/// An approximate eigenpair of a Laplacian. `value` is the Rayleigh quotient
/// with respect to the Laplacian itself (never the reordered operator);
/// `residual` is `||L v - value * v||`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

/// Strict upper bound on the largest eigenvalue of a Laplacian.
///
/// Combinatorial: `min(max_edge(d_u + d_v), 2 max_deg)` with a margin.
/// Normalized: `2` with a margin. Edgeless: `1` (spectrum is `{0}`).
pub fn rho_max_bound(base: &Laplacian) -> f64 {
    match base.kind {
        LaplacianKind::Normalized => 2.0 * RHO_MARGIN,
        LaplacianKind::Combinatorial => {
            let m = &base.matrix;
            let deg = &base.graph_degrees;
            let mut edge_bound: f64 = 0.0;
            let mut has_edge = false;
            for i in 0..m.n {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    let j = m.cols[k];
                    if j != i {
                        has_edge = true;
                        edge_bound = edge_bound.max(deg[i] + deg[j]);
                    }
                }
            }
            if !has_edge {
                return 1.0;
            }
            let max_deg = deg.iter().cloned().fold(0.0, f64::max);
            edge_bound.min(2.0 * max_deg) * RHO_MARGIN
        }
    }
}

/// The reordered operator plus deflation state. Applies `S x` via sparse
/// matvecs; `S` is never materialized.
pub struct SpectralOperator<'a> {
    base: &'a Laplacian,
    pub rho_max: f64,
    pub omega: u32,
    /// Rank-one terms `(s_value, unit vector)` already removed.
    deflated: Vec<(f64, Vec<f64>)>,
    /// Orthonormal null-space directions (component indicators), projected
    /// out of iterates for numerical robustness.
    null_basis: Vec<Vec<f64>>,
}

impl<'a> SpectralOperator<'a> {
    pub fn new(base: &'a Laplacian, omega: u32) -> Result<Self> {
        if omega < 2 {
            return Err(Error::InvalidParameter(format!(
                "omega must be >= 2, got {omega}"
            )));
        }
        Ok(SpectralOperator {
            rho_max: rho_max_bound(base),
            base,
            omega,
            deflated: Vec::new(),
            null_basis: Vec::new(),
        })
    }

    pub fn base(&self) -> &Laplacian {
        self.base
    }

    pub fn deflated(&self) -> &[(f64, Vec<f64>)] {
        &self.deflated
    }

    /// Removes a rank-one term `s_value * v v^T`. `v` must be unit norm and
    /// orthogonal (1e-8) to previously deflated vectors.
    pub fn deflate(&mut self, s_value: f64, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.base.n() {
            return Err(Error::DimensionMismatch {
                expected: self.base.n(),
                got: vector.len(),
            });
        }
        for (_, prev) in &self.deflated {
            if dot(prev, &vector).abs() > 1e-8 {
                return Err(Error::numerical(
                    "deflation vector not orthogonal to previous pairs",
                ));
            }
        }
        self.deflated.push((s_value, vector));
        Ok(())
    }

    /// Registers orthonormal null-space directions of the base Laplacian
    /// (one indicator per connected component).
    pub fn set_null_basis(&mut self, basis: Vec<Vec<f64>>) {
        self.null_basis = basis;
    }

    pub fn null_basis(&self) -> &[Vec<f64>] {
        &self.null_basis
    }

    /// `M x = x - (2 / rho_max) L x`.
    fn apply_m(&self, x: &[f64], scratch: &mut Vec<f64>) -> Vec<f64> {
        let scale = 2.0 / self.rho_max;
        self.base.matrix.matvec(x, scratch);
        x.iter()
            .zip(scratch.iter())
            .map(|(&xi, &li)| xi - scale * li)
            .collect()
    }

    /// `S x` including deflation terms (applied to the original `x`),
    /// at a cost of `omega + 1` sparse matvecs.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.base.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut scratch = vec![0.0; n];
        let mut t = x.to_vec();
        for _ in 0..self.omega {
            t = self.apply_m(&t, &mut scratch);
        }
        // y = M (x - M^w x)
        let diff: Vec<f64> = x.iter().zip(t.iter()).map(|(&a, &b)| a - b).collect();
        let mut y = self.apply_m(&diff, &mut scratch);
        for (s_val, v) in &self.deflated {
            let c = s_val * dot(v, x);
            for (yi, vi) in y.iter_mut().zip(v.iter()) {
                *yi -= c * vi;
            }
        }
        Ok(y)
    }

    /// Eigenvalue map of the reordering: `f(lambda) = mu (1 - mu^omega)`.
    pub fn eigenvalue_map(&self, lambda: f64) -> f64 {
        let mu = 1.0 - 2.0 * lambda / self.rho_max;
        mu * (1.0 - mu.powi(self.omega as i32))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(x: &mut [f64], basis: &[Vec<f64>]) {
    for v in basis {
        let c = dot(v, x);
        for (xi, vi) in x.iter_mut().zip(v.iter()) {
            *xi -= c * vi;
        }
    }
}

fn seeded_unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = norm(&v);
    for x in &mut v {
        *x /= nv;
    }
    v
}

fn rayleigh_and_residual(base: &CsrMatrix, v: &[f64]) -> (f64, f64) {
    let lv = base.apply(v);
    let value = dot(v, &lv);
    let res: f64 = lv
        .iter()
        .zip(v.iter())
        .map(|(&l, &x)| (l - value * x) * (l - value * x))
        .sum::<f64>()
        .sqrt();
    (value, res)
}

/// Power iteration on the reordered operator from a seeded random start.
///
/// Iterates `x <- S x / ||S x||`, projecting out registered null and
/// deflated directions, until the sign-aligned update moves less than `tol`
/// or `max_iters` is reached. Returns the pair with the base-Laplacian
/// Rayleigh quotient and residual.
pub fn power_iteration(
    op: &SpectralOperator,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<EigenPair> {
    Ok(power_iteration_with_partner(op, max_iters, tol, seed)?.0)
}

/// Like [`power_iteration`], but also returns the discarded Ritz direction
/// when the final separation step produced one. On (near-)bipartite spectra
/// that direction is the converged mirror eigenvector of the dominant pair;
/// deflating it too stops later extractions from wasting work on it. It is
/// returned unvalidated — callers must check its residual before trusting it.
pub fn power_iteration_with_partner(
    op: &SpectralOperator,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<(EigenPair, Option<EigenPair>)> {
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
    }
    let n = op.base.n();
    if n == 0 {
        return Err(Error::numerical("empty operator"));
    }
    let mut restarted = false;
    let mut x = seeded_unit_vector(n, seed);
    project_out(&mut x, &op.null_basis);
    let deflated_vecs: Vec<&Vec<f64>> = op.deflated.iter().map(|(_, v)| v).collect();
    for v in &deflated_vecs {
        let c = dot(v, &x);
        for (xi, vi) in x.iter_mut().zip(v.iter()) {
            *xi -= c * vi;
        }
    }
    let nx = norm(&x);
    if nx > 0.0 {
        for xi in &mut x {
            *xi /= nx;
        }
    }

    let mut iter = 0;
    loop {
        let mut y = op.apply(&x)?;
        project_out(&mut y, &op.null_basis);
        for v in &deflated_vecs {
            let c = dot(v, &y);
            for (yi, vi) in y.iter_mut().zip(v.iter()) {
                *yi -= c * vi;
            }
        }
        let ny = norm(&y);
        if ny < 1e-13 {
            if !restarted {
                restarted = true;
                x = seeded_unit_vector(n, seed ^ 0x9e37_79b9_7f4a_7c15);
                project_out(&mut x, &op.null_basis);
                for v in &deflated_vecs {
                    let c = dot(v, &x);
                    for (xi, vi) in x.iter_mut().zip(v.iter()) {
                        *xi -= c * vi;
                    }
                }
                let nx = norm(&x);
                if nx < 1e-13 {
                    return Err(Error::numerical("operator range is numerically empty"));
                }
                for xi in &mut x {
                    *xi /= nx;
                }
                continue;
            }
            return Err(Error::numerical(
                "power iteration underflow: ||S x|| vanished after restart",
            ));
        }
        for yi in &mut y {
            *yi /= ny;
        }
        let sign = if dot(&y, &x) < 0.0 { -1.0 } else { 1.0 };
        let delta: f64 = y
            .iter()
            .zip(x.iter())
            .map(|(&a, &b)| (a - sign * b) * (a - sign * b))
            .sum::<f64>()
            .sqrt();
        x = y;
        iter += 1;
        if delta < tol || iter >= max_iters {
            break;
        }
    }

    // Even omega makes f(lambda) odd in mu, so bipartite-like spectra carry
    // a +/- pair of equally dominant S-eigenvalues and the iterate stalls as
    // a two-dimensional mixture. A Rayleigh-Ritz step on span{x, Sx}
    // separates the pair; keep the small-base-eigenvalue direction.
    let mut partner: Option<Vec<f64>> = None;
    let mut z = op.apply(&x)?;
    project_out(&mut z, &op.null_basis);
    for v in &deflated_vecs {
        let c = dot(v, &z);
        for (zi, vi) in z.iter_mut().zip(v.iter()) {
            *zi -= c * vi;
        }
    }
    let nz = norm(&z);
    if nz > 1e-13 {
        for zi in &mut z {
            *zi /= nz;
        }
        let c = dot(&z, &x);
        let mut q2: Vec<f64> = z.iter().zip(x.iter()).map(|(&a, &b)| a - c * b).collect();
        let nq = norm(&q2);
        if nq > 1e-10 {
            for v in &mut q2 {
                *v /= nq;
            }
            let lx = op.base.matrix.apply(&x);
            let lq = op.base.matrix.apply(&q2);
            let (a, b, d) = (dot(&x, &lx), dot(&q2, &lx), dot(&q2, &lq));
            let gap = (((a - d) / 2.0).powi(2) + b * b).sqrt();
            let combine = |lam: f64| -> Option<Vec<f64>> {
                // Eigenvector of [[a, b], [b, d]] at lam; take the better-
                // conditioned of the two equivalent component forms.
                let (c1, c2) = if (lam - a).abs() > (lam - d).abs() {
                    (b, lam - a)
                } else {
                    (lam - d, b)
                };
                let nc = (c1 * c1 + c2 * c2).sqrt();
                if nc <= 1e-12 {
                    return None;
                }
                Some(
                    x.iter()
                        .zip(q2.iter())
                        .map(|(&xi, &qi)| (c1 * xi + c2 * qi) / nc)
                        .collect(),
                )
            };
            let lo = combine((a + d) / 2.0 - gap);
            let hi = combine((a + d) / 2.0 + gap);
            if let (Some(lo), Some(hi)) = (lo, hi) {
                // Keep whichever Ritz direction stays dominant under S,
                // preferring the smaller base eigenvalue on (near-)ties.
                let s_lo = dot(&lo, &op.apply(&lo)?).abs();
                let s_hi = dot(&hi, &op.apply(&hi)?).abs();
                if s_lo >= s_hi * (1.0 - 1e-6) {
                    x = lo;
                    partner = Some(hi);
                } else {
                    x = hi;
                    partner = Some(lo);
                }
            }
        }
    }

    // Normalizing a near-degenerate q2 can amplify roundoff along already
    // deflated directions; re-orthogonalize the outputs so later deflations
    // stay consistent.
    let reproject = |v: &mut Vec<f64>| -> bool {
        project_out(v, &op.null_basis);
        for d in &deflated_vecs {
            let c = dot(d, v);
            for (vi, di) in v.iter_mut().zip(d.iter()) {
                *vi -= c * di;
            }
        }
        let nv = norm(v);
        if nv < 1e-13 {
            return false;
        }
        for vi in v.iter_mut() {
            *vi /= nv;
        }
        true
    };
    if !reproject(&mut x) {
        return Err(Error::numerical(
            "iterate collapsed onto deflated subspace",
        ));
    }
    let partner = partner.and_then(|mut v| if reproject(&mut v) { Some(v) } else { None });

    let partner = partner.map(|v| {
        let (value, residual) = rayleigh_and_residual(&op.base.matrix, &v);
        EigenPair {
            value,
            vector: v,
            residual,
        }
    });
    let (value, residual) = rayleigh_and_residual(&op.base.matrix, &x);
    Ok((
        EigenPair {
            value,
            vector: x,
            residual,
        },
        partner,
    ))
}

/// Rayleigh quotient of `v` under the reordered operator (used as the
/// deflation eigenvalue).
pub fn s_rayleigh(op: &SpectralOperator, v: &[f64]) -> Result<f64> {
    Ok(dot(v, &op.apply(v)?))
}

/// Connected components of the sparsity pattern of a symmetric CSR matrix
/// (off-diagonal nonzeros are edges). Returns a component id per node.
pub fn csr_components(m: &CsrMatrix) -> Vec<usize> {
    let mut comp = vec![usize::MAX; m.n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..m.n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                let j = m.cols[k];
                if j != i && comp[j] == usize::MAX {
                    comp[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Orthonormal null-space basis of a Laplacian: one vector per connected
/// component. Combinatorial null vectors are normalized indicators;
/// normalized-Laplacian null vectors are `D^{1/2}` indicators.
pub fn null_space_basis(base: &Laplacian) -> Vec<Vec<f64>> {
    let comp = csr_components(&base.matrix);
    let n_comp = comp.iter().copied().max().map_or(0, |c| c + 1);
    let mut basis = vec![vec![0.0; base.n()]; n_comp];
    for (i, &c) in comp.iter().enumerate() {
        basis[c][i] = match base.kind {
            LaplacianKind::Combinatorial => 1.0,
            LaplacianKind::Normalized => base.graph_degrees[i].sqrt(),
        };
    }
    for v in &mut basis {
        let nv = norm(v);
        if nv > 0.0 {
            for x in v.iter_mut() {
                *x /= nv;
            }
        }
    }
    basis
}

/// Extracts the `k` eigenpairs with smallest non-zero eigenvalues by
/// repeated power iteration and rank-one deflation, sorted ascending by
/// base Rayleigh quotient.
///
/// When the deflated operator becomes numerically null (every non-zero
/// direction already extracted), the remaining slots are filled with
/// null-space directions, whose base eigenvalue is zero.
pub fn topk_small_eigvecs(
    base: &Laplacian,
    k: usize,
    omega: u32,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<Vec<EigenPair>> {
    let n = base.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k={k} outside [1, {n}]"
        )));
    }
    let mut op = SpectralOperator::new(base, omega)?;
    let null = null_space_basis(base);
    op.set_null_basis(null.clone());

    let mut pairs: Vec<EigenPair> = Vec::with_capacity(k);
    let mut null_used = 0usize;
    for i in 0..k {
        match power_iteration_with_partner(&op, max_iters, tol, seed.wrapping_add(i as u64)) {
            Ok((pair, partner)) => {
                let s_val = s_rayleigh(&op, &pair.vector)?;
                op.deflate(s_val, pair.vector.clone())
                    .map_err(|e| e.with_stage(&format!("deflation {i}")))?;
                // The mirror Ritz direction, when converged, would otherwise
                // dominate the next extraction; deflate it too so every slot
                // yields a fresh pair. Unconverged partners are discarded.
                if let Some(p) = partner {
                    let sp = op.apply(&p.vector)?;
                    let s_p = dot(&p.vector, &sp);
                    let res: f64 = sp
                        .iter()
                        .zip(p.vector.iter())
                        .map(|(&a, &b)| (a - s_p * b) * (a - s_p * b))
                        .sum::<f64>()
                        .sqrt();
                    if res <= 1e-6 {
                        let _ = op.deflate(s_p, p.vector);
                    }
                }
                pairs.push(pair);
            }
            Err(Error::Numerical { .. }) if null_used < null.len() => {
                let v = null[null_used].clone();
                null_used += 1;
                let (value, residual) = rayleigh_and_residual(&base.matrix, &v);
                pairs.push(EigenPair {
                    value,
                    vector: v,
                    residual,
                });
            }
            Err(e) => return Err(e.with_stage(&format!("extraction {i}"))),
        }
    }

    // Deflated extractions in near-degenerate regions of the S-spectrum can
    // stall on mixtures across distinct base eigenvalues, whose Rayleigh
    // quotients are unreliable. A Rayleigh-Ritz solve over the span of all
    // extracted vectors separates such mixtures at negligible cost.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let mut v = p.vector.clone();
        for b in &basis {
            let c = dot(b, &v);
            for (vi, bi) in v.iter_mut().zip(b.iter()) {
                *vi -= c * bi;
            }
        }
        let nv = norm(&v);
        if nv > 1e-10 {
            for vi in &mut v {
                *vi /= nv;
            }
            basis.push(v);
        }
    }
    let m = basis.len();
    let lb: Vec<Vec<f64>> = basis.iter().map(|v| base.matrix.apply(v)).collect();
    let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let val = dot(&basis[i], &lb[j]);
            t[(i, j)] = val;
            t[(j, i)] = val;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(t);
    let mut pairs: Vec<EigenPair> = (0..m)
        .map(|j| {
            let mut v = vec![0.0; n];
            for (i, b) in basis.iter().enumerate() {
                let c = eig.eigenvectors[(i, j)];
                for (vi, bi) in v.iter_mut().zip(b.iter()) {
                    *vi += c * bi;
                }
            }
            let (value, residual) = rayleigh_and_residual(&base.matrix, &v);
            EigenPair {
                value,
                vector: v,
                residual,
            }
        })
        .collect();
    pairs.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    Ok(pairs)
}

/// Full dense eigendecomposition, ascending. The reference oracle and the
/// `evd` solver backend. Refuses matrices above `cap` rows.
pub fn dense_evd(base: &nalgebra::DMatrix<f64>, cap: usize) -> Result<Vec<EigenPair>> {
    let n = base.nrows();
    if n != base.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: base.ncols(),
        });
    }
    if n > cap {
        return Err(Error::InvalidParameter(format!(
            "dense EVD refused for N={n} > cap {cap}; use the power solver"
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let eig = base.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut pairs = Vec::with_capacity(n);
    for idx in order {
        let value = eig.eigenvalues[idx];
        let vector: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let lv = base * nalgebra::DVector::from_column_slice(&vector);
        let residual = (0..n)
            .map(|i| (lv[i] - value * vector[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        pairs.push(EigenPair {
            value,
            vector,
            residual,
        });
    }
    Ok(pairs)
}

/// Default dense EVD size cap.
pub const DENSE_EVD_CAP: usize = 3000;
