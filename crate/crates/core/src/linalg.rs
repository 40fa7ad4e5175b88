//! Small dense linear-algebra helpers used for initialization and alignment.
//!
//! Point sets are row-major `rows x dim` slices throughout.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)] // float methods come from std when a dependency links it
use num_traits::Float;
use rand::Rng as _;

use crate::network::DynamicNetwork;
use crate::{Error, Result, Rng};

/// Hop-count distances of the slice at time `t` as an `n x n` matrix.
///
/// Unreachable pairs get the largest finite distance plus one, so
/// disconnected slices still yield a usable dissimilarity.
pub fn shortest_path_dissimilarities(net: &DynamicNetwork, t: usize) -> Vec<f64> {
    let n = net.n_actors();
    let mut dist = vec![usize::MAX; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist[s * n + s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = dist[s * n + u];
            for (v, &y) in net.row(t, u).iter().enumerate() {
                if y == 1 && dist[s * n + v] == usize::MAX {
                    dist[s * n + v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    let max_finite = dist.iter().copied().filter(|&d| d != usize::MAX).max().unwrap_or(0);
    dist.iter().map(|&d| if d == usize::MAX { (max_finite + 1) as f64 } else { d as f64 }).collect()
}

/// Classical (Torgerson) scaling of an `n x n` dissimilarity matrix into
/// `dim` dimensions. Negative eigenvalues contribute zero coordinates.
pub fn classical_mds(dissimilarities: &[f64], n: usize, dim: usize) -> Result<Vec<f64>> {
    if dissimilarities.len() != n * n {
        return Err(Error::Dimension("dissimilarity matrix must be n x n".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let sq = DMatrix::from_fn(n, n, |i, j| {
        let d = dissimilarities[i * n + j];
        d * d
    });
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let mut out = vec![0.0; n * dim];
    for (d, &k) in order.iter().take(dim).enumerate() {
        let scale = eig.eigenvalues[k].max(0.0).sqrt();
        // Fix the sign so the largest-magnitude entry is positive.
        let col = eig.eigenvectors.column(k);
        let pivot = col.iter().copied().fold(0.0, |acc: f64, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[i * dim + d] = sign * scale * col[i];
        }
    }
    Ok(out)
}

/// Column means of a `rows x dim` point set.
pub fn centroid(points: &[f64], dim: usize) -> Vec<f64> {
    let rows = points.len() / dim.max(1);
    let mut c = vec![0.0; dim];
    for row in points.chunks_exact(dim) {
        for (ci, v) in c.iter_mut().zip(row) {
            *ci += v;
        }
    }
    if rows > 0 {
        c.iter_mut().for_each(|v| *v /= rows as f64);
    }
    c
}

/// Subtracts the centroid in place and returns it.
pub fn center_in_place(points: &mut [f64], dim: usize) -> Vec<f64> {
    let c = centroid(points, dim);
    for row in points.chunks_exact_mut(dim) {
        for (v, ci) in row.iter_mut().zip(&c) {
            *v -= ci;
        }
    }
    c
}

/// Orthogonal `Q` (row-major `dim x dim`) minimizing `||source Q - target||_F`
/// for centered point sets, from the SVD of `source' target`.
///
/// Returns `None` when the cross-covariance vanishes, in which case every
/// orthogonal matrix is optimal.
pub fn procrustes_rotation(source: &[f64], target: &[f64], dim: usize) -> Option<Vec<f64>> {
    let rows = source.len() / dim.max(1);
    let a = DMatrix::from_row_slice(rows, dim, source);
    let b = DMatrix::from_row_slice(rows, dim, target);
    let m = a.transpose() * b;
    if m.iter().all(|v| v.abs() < 1e-300) || m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let svd = m.svd(true, true);
    let q = svd.u? * svd.v_t?;
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            out[i * dim + j] = q[(i, j)];
        }
    }
    Some(out)
}

pub fn identity(dim: usize) -> Vec<f64> {
    let mut q = vec![0.0; dim * dim];
    for i in 0..dim {
        q[i * dim + i] = 1.0;
    }
    q
}

/// Right-multiplies every row of `points` by `q` in place.
pub fn apply_rotation(points: &mut [f64], q: &[f64], dim: usize) {
    let mut buf = vec![0.0; dim];
    for row in points.chunks_exact_mut(dim) {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = (0..dim).map(|k| row[k] * q[k * dim + j]).sum();
        }
        row.copy_from_slice(&buf);
    }
}

/// Squared Frobenius distance between two equally shaped point sets.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding. Returns assignments and the
/// `k x dim` centers. Clusters that lose all points keep their last center.
pub fn kmeans(points: &[f64], dim: usize, k: usize, max_iter: usize, rng: &mut Rng) -> Result<(Vec<usize>, Vec<f64>)> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::Dimension("points are not a whole number of rows".into()));
    }
    let rows = points.len() / dim;
    if k == 0 || rows == 0 {
        return Err(Error::Argument("k-means needs k >= 1 and at least one point".into()));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centers = Vec::with_capacity(k * dim);
    centers.extend_from_slice(row(rng.random_range(0..rows)));
    let mut nearest: Vec<f64> = (0..rows).map(|i| squared_distance(row(i), &centers[..dim])).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = rows - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..rows)
        };
        let start = centers.len();
        centers.extend_from_slice(row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(squared_distance(row(i), &centers[start..start + dim]));
        }
    }
    let mut assign = vec![0; rows];
    for iter in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, a) in assign.iter_mut().enumerate() {
            let best = (0..k)
                .min_by(|&x, &y| {
                    squared_distance(row(i), &centers[x * dim..(x + 1) * dim])
                        .total_cmp(&squared_distance(row(i), &centers[y * dim..(y + 1) * dim]))
                })
                .unwrap_or(0);
            changed |= best != *a;
            *a = best;
        }
        let mut sums = vec![0.0; k * dim];
        let mut sizes = vec![0usize; k];
        for (i, &a) in assign.iter().enumerate() {
            sizes[a] += 1;
            for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                for d in 0..dim {
                    centers[c * dim + d] = sums[c * dim + d] / sizes[c] as f64;
                }
            }
        }
        if !changed && iter > 0 {
            break;
        }
    }
    Ok((assign, centers))
}
