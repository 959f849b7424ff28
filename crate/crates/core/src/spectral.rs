//! Weighted graph Laplacians, symmetric eigendecomposition by cyclic Jacobi
//! rotations, and the node/edge coordinate inputs derived from eigenvectors.

use thiserror::Error;

use crate::molgraph::MolecularGraph;

/// Default eigensolver convergence threshold.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Sweep limit before the solver reports failure instead of looping.
pub const MAX_SWEEPS: usize = 50;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("Jacobi did not converge in {limit} sweeps (off-diagonal {off:.3e}, target {target:.3e})")]
    NoConvergence { limit: usize, off: f64, target: f64 },
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = SymMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            for (j, &x) in row.iter().enumerate() {
                m.data[i * n + j] = x;
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert_eq!(m.get(i, j), m.get(j, i), "matrix must be symmetric");
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.n + j] = x;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut sum = 0.0;
        for p in 0..self.n {
            for q in (p + 1)..self.n {
                let x = self.get(p, q);
                sum += 2.0 * x * x;
            }
        }
        sum.sqrt()
    }
}

/// `L = D - W` where `W` holds bond orders and `D` its row sums. Rows sum to
/// zero exactly by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLaplacian {
    matrix: SymMatrix,
}

impl WeightedLaplacian {
    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.n
    }
}

pub fn build_laplacian(g: &MolecularGraph) -> WeightedLaplacian {
    let n = g.node_count();
    let mut m = SymMatrix::zeros(n);
    for b in g.bonds() {
        let w = f64::from(b.order);
        m.set(b.i, b.j, -w);
        m.set(b.j, b.i, -w);
        let di = m.get(b.i, b.i) + w;
        m.set(b.i, b.i, di);
        let dj = m.get(b.j, b.j) + w;
        m.set(b.j, b.j, dj);
    }
    WeightedLaplacian { matrix: m }
}

/// Eigenvalues ascending; `eigenvectors` column `k` pairs with
/// `eigenvalues[k]` and is stored row-major (`n` rows, `n` columns).
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<f64>,
    pub n: usize,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|r| self.eigenvectors[r * self.n + k]).collect()
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Rotations sweep the upper triangle in row order until the off-diagonal
/// Frobenius norm falls below `0.5 * tol * max(1, ||A||_F)`, which bounds
/// every residual `||A v - lambda v||` by `tol * max(1, ||A||_F)`. Pairs are
/// returned in ascending eigenvalue order with a deterministic sign and
/// intra-cluster ordering convention (see `fix_order_and_signs`).
pub fn eigendecompose(m: &SymMatrix, tol: f64) -> Result<EigenDecomposition, EigenError> {
    if !(tol > 0.0) {
        return Err(EigenError::BadTolerance(tol));
    }
    let n = m.n;
    let scale = m.frobenius_norm().max(1.0);
    let target = 0.5 * tol * scale;

    let mut a = m.clone();
    let mut v = SymMatrix::zeros(n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }

    let mut converged = false;
    let mut off = a.off_diagonal_norm();
    for _sweep in 0..MAX_SWEEPS {
        if off <= target {
            converged = true;
            break;
        }
        // Rotations below this size cannot keep the off-diagonal norm above
        // the target once all of them are this small.
        let skip = target / (n.max(2) as f64);
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= skip {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = a.get(p, p);
                let aqq = a.get(q, q);
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a.get(r, p);
                    let arq = a.get(r, q);
                    let new_rp = arp - s * (arq + tau * arp);
                    let new_rq = arq + s * (arp - tau * arq);
                    a.set(r, p, new_rp);
                    a.set(p, r, new_rp);
                    a.set(r, q, new_rq);
                    a.set(q, r, new_rq);
                }
                for r in 0..n {
                    let vrp = v.get(r, p);
                    let vrq = v.get(r, q);
                    v.set(r, p, vrp - s * (vrq + tau * vrp));
                    v.set(r, q, vrq + s * (vrp - tau * vrq));
                }
            }
        }
        off = a.off_diagonal_norm();
    }
    if !converged && off > target {
        return Err(EigenError::NoConvergence { limit: MAX_SWEEPS, off, target });
    }

    let eigenvalues: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let mut decomp = EigenDecomposition { eigenvalues, eigenvectors: v.data, n };
    fix_order_and_signs(&mut decomp, tol * scale);
    Ok(decomp)
}

/// Sorts pairs by ascending eigenvalue, applies the sign convention (the
/// entry of largest absolute value per column is non-negative, abs-value
/// ties broken by lowest row index), and orders columns inside each
/// eigenvalue cluster (gap below `cluster_gap`) lexicographically.
fn fix_order_and_signs(decomp: &mut EigenDecomposition, cluster_gap: f64) {
    let n = decomp.n;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| decomp.eigenvalues[i].total_cmp(&decomp.eigenvalues[j]));

    let mut columns: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| (0..n).map(|r| decomp.eigenvectors[r * n + k]).collect())
        .collect();
    let mut values: Vec<f64> = order.iter().map(|&k| decomp.eigenvalues[k]).collect();

    for col in columns.iter_mut() {
        let mut best = 0usize;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            for x in col.iter_mut() {
                *x = -*x;
            }
        }
    }

    let mut start = 0usize;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[end] - values[end - 1]).abs() < cluster_gap {
            end += 1;
        }
        if end - start > 1 {
            let mut cluster: Vec<(Vec<f64>, f64)> =
                (start..end).map(|i| (std::mem::take(&mut columns[i]), values[i])).collect();
            cluster.sort_by(|a, b| lex_cmp(&a.0, &b.0));
            for (offset, (col, val)) in cluster.into_iter().enumerate() {
                columns[start + offset] = col;
                values[start + offset] = val;
            }
        }
        start = end;
    }

    for (k, col) in columns.iter().enumerate() {
        for r in 0..n {
            decomp.eigenvectors[r * n + k] = col[r];
        }
    }
    decomp.eigenvalues = values;
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = x.total_cmp(y);
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

/// Node coordinates: rows of the first `d` eigenvector columns, zero-padded
/// when the molecule has fewer than `d` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateSet {
    n: usize,
    d: usize,
    phi: Vec<f64>,
}

impl CoordinateSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn node(&self, i: usize) -> &[f64] {
        assert!(i < self.n, "node index {i} out of range for {} nodes", self.n);
        &self.phi[i * self.d..(i + 1) * self.d]
    }
}

pub fn node_coordinates(
    g: &MolecularGraph,
    d: usize,
    tol: f64,
) -> Result<CoordinateSet, EigenError> {
    assert!(d >= 1, "coordinate dimension must be >= 1");
    let lap = build_laplacian(g);
    let decomp = eigendecompose(lap.matrix(), tol)?;
    let n = g.node_count();
    let mut phi = vec![0.0; n * d];
    for i in 0..n {
        for k in 0..d.min(n) {
            phi[i * d + k] = decomp.eigenvectors[i * n + k];
        }
    }
    Ok(CoordinateSet { n, d, phi })
}

/// Component-wise product of the node coordinates of `i` and `j`.
pub fn edge_coordinates(cs: &CoordinateSet, i: usize, j: usize) -> Vec<f64> {
    assert_ne!(i, j, "edge coordinates need two distinct nodes");
    cs.node(i).iter().zip(cs.node(j)).map(|(a, b)| a * b).collect()
}
