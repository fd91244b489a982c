use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `M = U diag(s) V^T`.
///
/// `u` is `m x q`, `v` is `n x q` with `q = min(m, n)`; `s` is
/// nonincreasing. The largest-magnitude entry of every column of `u` is
/// nonnegative (first such entry on ties), with `v` flipped to match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvdTriple {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl SvdTriple {
    pub fn reconstruct(&self) -> Matrix {
        let us = Matrix::from_fn(self.u.rows(), self.s.len(), |i, j| self.u.get(i, j) * self.s[j]);
        us.matmul_t(&self.v)
    }

    /// Number of singular values above `rel_tol * s[0]`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        match self.s.first() {
            Some(&s1) if s1 > 0.0 => self.s.iter().filter(|&&s| s > rel_tol * s1).count(),
            _ => 0,
        }
    }

    /// `m x m` orthonormal matrix whose first `q` columns are `u`.
    pub fn full_u(&self) -> Matrix {
        complete_basis(&self.u)
    }

    /// `n x n` orthonormal matrix whose first `q` columns are `v`.
    pub fn full_v(&self) -> Matrix {
        complete_basis(&self.v)
    }
}

/// Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
pub fn svd(m: &Matrix) -> Result<SvdTriple> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("svd of a matrix with non-finite entries".into()));
    }
    let (rows, cols) = m.shape();
    let mut out = if rows >= cols {
        let (u, s, v) = jacobi_tall(m);
        SvdTriple { u, s, v }
    } else {
        let (u, s, v) = jacobi_tall(&m.t());
        SvdTriple { u: v, s, v: u }
    };
    fix_signs(&mut out);
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Decomposes a matrix with `rows >= cols`. Returns `(u, s, v)` sorted.
fn jacobi_tall(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (rows, cols) = m.shape();
    // Column-major working copies so every rotation touches contiguous data.
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let tol = f64::EPSILON * (rows.max(1) as f64);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let alpha = dot(&a[i], &a[i]);
                let beta = dot(&a[j], &a[j]);
                let gamma = dot(&a[i], &a[j]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = a.iter().map(|col| dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let s: Vec<f64> = order.iter().map(|&k| norms[k]).collect();
    let floor = s.first().copied().unwrap_or(0.0) * 1e-14;
    let mut u = Matrix::zeros(rows, cols);
    let mut vm = Matrix::zeros(cols, cols);
    let mut missing = Vec::new();
    for (j, &k) in order.iter().enumerate() {
        vm.set_col(j, &v[k]);
        if norms[k] > floor && norms[k] > 0.0 {
            let col: Vec<f64> = a[k].iter().map(|x| x / norms[k]).collect();
            u.set_col(j, &col);
        } else {
            missing.push(j);
        }
    }
    if !missing.is_empty() {
        fill_columns(&mut u, &missing);
    }
    (u, s, vm)
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Overwrite the listed columns of `u` with unit vectors orthogonal to all
/// other columns, choosing for each the coordinate axis with the largest
/// residual after two rounds of Gram–Schmidt.
fn fill_columns(u: &mut Matrix, missing: &[usize]) {
    let rows = u.rows();
    let mut basis: Vec<Vec<f64>> = (0..u.cols())
        .filter(|j| !missing.contains(j))
        .map(|j| u.col(j))
        .collect();
    for &target in missing {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for axis in 0..rows {
            let mut cand = vec![0.0; rows];
            cand[axis] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let proj = dot(&cand, b);
                    for (c, bv) in cand.iter_mut().zip(b) {
                        *c -= proj * bv;
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if best.as_ref().is_none_or(|(n, _)| norm > *n) {
                best = Some((norm, cand));
            }
        }
        let (norm, mut cand) = best.expect("at least one row");
        for c in &mut cand {
            *c /= norm;
        }
        u.set_col(target, &cand);
        basis.push(cand);
    }
}

/// Extend the orthonormal columns of `u` (`m x q`) to an orthonormal basis
/// of the whole space, returning `m x m`.
pub fn complete_basis(u: &Matrix) -> Matrix {
    let (rows, q) = u.shape();
    let mut full = Matrix::zeros(rows, rows);
    for j in 0..q.min(rows) {
        full.set_col(j, &u.col(j));
    }
    let missing: Vec<usize> = (q.min(rows)..rows).collect();
    if !missing.is_empty() {
        fill_columns(&mut full, &missing);
    }
    full
}

fn fix_signs(t: &mut SvdTriple) {
    for j in 0..t.s.len() {
        let col = t.u.col(j);
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            for i in 0..t.u.rows() {
                t.u.set(i, j, -t.u.get(i, j));
            }
            for i in 0..t.v.rows() {
                t.v.set(i, j, -t.v.get(i, j));
            }
        }
    }
}
