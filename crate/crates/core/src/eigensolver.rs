//! Symmetric tridiagonal eigensolver (implicit-shift QL with Wilkinson-type
//! shifts and full eigenvector accumulation).

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::subspace::TridiagonalHamiltonian;

/// Per-eigenvalue sweep cap.
pub const MAX_SWEEPS: usize = 64;

/// Relative gap below which neighbouring eigenvalues are treated as one cluster
/// and their eigenvectors re-orthogonalized.
const CLUSTER_GAP: f64 = 1e-12;

/// `T = V diag(eigenvalues) Vᵀ`, eigenvalues ascending, column `m` of `V`
/// belonging to `eigenvalues[m]`. The first non-negligible entry of every
/// column is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvector `m` as an owned vector.
    pub fn vector(&self, m: usize) -> Vec<f64> {
        self.eigenvectors.column(m).to_vec()
    }

    pub fn spectral_range(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }

    /// Smallest gap between consecutive eigenvalues exceeding
    /// `1e-12 * spectral range`, if any.
    pub fn min_nonzero_gap(&self) -> Option<f64> {
        let floor = CLUSTER_GAP * self.spectral_range();
        self.eigenvalues
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|&g| g > floor && g > 0.0)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// `max |VᵀV - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let v = &self.eigenvectors;
        let gram = v.t().dot(v);
        let mut worst: f64 = 0.0;
        for ((i, j), g) in gram.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
        worst
    }

    /// `max_k |(T v_m - e_m v_m)_k|` for eigenpair `m`.
    pub fn residual(&self, h: &TridiagonalHamiltonian, m: usize) -> f64 {
        let v = self.vector(m);
        let tv = h.apply(&v);
        tv.iter()
            .zip(&v)
            .map(|(a, b)| (a - self.eigenvalues[m] * b).abs())
            .fold(0.0, f64::max)
    }
}

/// Full eigendecomposition of a real symmetric tridiagonal matrix.
pub fn decompose(h: &TridiagonalHamiltonian) -> Result<EigenDecomposition> {
    let n = h.dim();
    if h.offdiag.len() + 1 != n {
        return Err(Error::domain("malformed tridiagonal matrix"));
    }
    let mut d = h.diag.clone();
    // e[i] couples i and i+1; e[n-1] is scratch.
    let mut e = h.offdiag.clone();
    e.push(0.0);

    // Row i of `zt` is the i-th eigenvector, so every rotation touches two
    // contiguous rows.
    let mut zt = vec![0.0; n * n];
    for i in 0..n {
        zt[i * n + i] = 1.0;
    }

    ql_implicit(&mut d, &mut e, &mut zt, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut rows: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| zt[i * n..(i + 1) * n].to_vec())
        .collect();

    reorthogonalize_clusters(&eigenvalues, &mut rows);
    for row in rows.iter_mut() {
        fix_sign(row);
    }

    let eigenvectors = Array2::from_shape_fn((n, n), |(k, m)| rows[m][k]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Rotations are recorded and applied to the eigenvector rows in column
/// blocks, so each block stays cache resident across many sweeps.
struct RotationLog {
    n: usize,
    pending: Vec<(usize, f64, f64)>,
}

const ROTATION_BUFFER: usize = 1 << 18;
const COLUMN_BLOCK: usize = 32;

impl RotationLog {
    fn push(&mut self, zt: &mut [f64], i: usize, c: f64, s: f64) {
        self.pending.push((i, c, s));
        if self.pending.len() >= ROTATION_BUFFER {
            self.flush(zt);
        }
    }

    fn flush(&mut self, zt: &mut [f64]) {
        let n = self.n;
        let mut k0 = 0;
        while k0 < n {
            let k1 = (k0 + COLUMN_BLOCK).min(n);
            for &(i, c, s) in &self.pending {
                let (head, tail) = zt.split_at_mut((i + 1) * n);
                let zi = &mut head[i * n + k0..i * n + k1];
                let zi1 = &mut tail[k0..k1];
                for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                    let f = *b;
                    *b = s * *a + c * f;
                    *a = c * *a - s * f;
                }
            }
            k0 = k1;
        }
        self.pending.clear();
    }
}

fn ql_implicit(d: &mut [f64], e: &mut [f64], zt: &mut [f64], n: usize) -> Result<()> {
    let mut log = RotationLog {
        n,
        pending: Vec::new(),
    };
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() < f64::MIN_POSITIVE {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::NoConvergence {
                    index: l,
                    iterations: MAX_SWEEPS,
                });
            }

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;

            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                log.push(zt, i, c, s);
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    log.flush(zt);
    Ok(())
}

/// Modified Gram-Schmidt inside each cluster of (near-)degenerate eigenvalues.
fn reorthogonalize_clusters(eigenvalues: &[f64], rows: &mut [Vec<f64>]) {
    let n = eigenvalues.len();
    if n < 2 {
        return;
    }
    let range = eigenvalues[n - 1] - eigenvalues[0];
    let tol = CLUSTER_GAP * range;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eigenvalues[end] - eigenvalues[end - 1] <= tol {
            end += 1;
        }
        if end - start > 1 {
            for i in start..end {
                let (done, rest) = rows.split_at_mut(i);
                let v = &mut rest[0];
                for u in &done[start..i] {
                    let proj: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                    for (x, y) in v.iter_mut().zip(u) {
                        *x -= proj * y;
                    }
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
            }
        }
        start = end;
    }
}

fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}
