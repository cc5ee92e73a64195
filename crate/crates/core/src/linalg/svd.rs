//! Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! The input is rotated column-pairwise until all columns are mutually
//! orthogonal; the column norms are then the singular values. Wide inputs
//! are handled through their transpose. Accuracy is at the level of machine
//! precision, which is what the low-rank truncation and rank selection
//! downstream rely on.

use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// `w = u · diag(sigma) · vt`, thin form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdFactorization {
    /// `m × n`, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, non-negative, length `n`.
    pub sigma: Vec<f64>,
    /// `n × cols`, orthonormal rows.
    pub vt: Matrix,
    /// `n = min(rows, cols)`.
    pub full_rank: usize,
}

impl SvdFactorization {
    /// `u · diag(sigma) · vt`
    pub fn reconstruct(&self) -> Matrix {
        truncate_unchecked(self, self.full_rank)
    }
}

/// Sweep cap per unit of `min(rows, cols)`.
const SWEEPS_PER_DIM: usize = 100;

pub fn svd(w: &Matrix) -> Result<SvdFactorization> {
    if !w.is_finite() {
        return Err(Error::InvalidInput("svd input has non-finite entries".into()));
    }
    if w.rows() >= w.cols() {
        let (u, sigma, v) = jacobi_tall(w)?;
        Ok(canonical_signs(SvdFactorization { full_rank: sigma.len(), u, sigma, vt: v.transpose() }))
    } else {
        // wᵀ = u' Σ v'ᵀ  ⇒  w = v' Σ u'ᵀ
        let (u_t, sigma, v_t) = jacobi_tall(&w.transpose())?;
        Ok(canonical_signs(SvdFactorization { full_rank: sigma.len(), u: v_t, sigma, vt: u_t.transpose() }))
    }
}

/// One-sided Jacobi for `rows >= cols`; returns `(u, sigma, v)` with `v` square.
fn jacobi_tall(w: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (m, n) = w.shape();
    let scale = w.max_abs();
    if scale == 0.0 {
        let u = complete_basis(m, Vec::new(), n);
        return Ok((u, vec![0.0; n], Matrix::identity(n)));
    }

    // column-major working copies
    let mut cols: Vec<Vec<f64>> = (0..n).map(|c| w.column(c).iter().map(|v| v / scale).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|c| (0..n).map(|r| if r == c { 1.0 } else { 0.0 }).collect()).collect();

    let tol = m as f64 * f64::EPSILON;
    // Columns at the rounding-noise floor of the whole matrix are exact zeros:
    // they can never be made orthogonal to the large columns in relative terms.
    let frob = cols.iter().map(|c| dot(c, c)).sum::<f64>().sqrt();
    let null_norm = tol * frob;
    let null_sq = null_norm * null_norm;
    let max_sweeps = SWEEPS_PER_DIM * n;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha <= null_sq || beta <= null_sq || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!("jacobi svd did not converge in {max_sweeps} sweeps")));
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep column order
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut sigma = Vec::with_capacity(n);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_sorted = Matrix::zeros(n, n);
    for (j, &src) in order.iter().enumerate() {
        let norm = norms[src];
        if norm > null_norm {
            sigma.push(norm * scale);
            u_cols.push(cols[src].iter().map(|x| x / norm).collect());
        } else {
            sigma.push(0.0);
        }
        for r in 0..n {
            v_sorted[(r, j)] = v[src][r];
        }
    }
    let u = complete_basis(m, u_cols, n);
    Ok((u, sigma, v_sorted))
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Extends orthonormal columns of length `m` to `n` columns using
/// Gram-Schmidt against the standard basis. Given columns fill the leading
/// slots; completion vectors take the remaining (zero-σ) slots in order.
fn complete_basis(m: usize, given: Vec<Vec<f64>>, n: usize) -> Matrix {
    let mut basis = given;
    let mut candidate = 0;
    while basis.len() < n && candidate < m {
        let mut e = vec![0.0; m];
        e[candidate] = 1.0;
        candidate += 1;
        for _ in 0..2 {
            for b in &basis {
                let proj = dot(b, &e);
                for (x, y) in e.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let norm = dot(&e, &e).sqrt();
        if norm > 1e-8 {
            basis.push(e.into_iter().map(|x| x / norm).collect());
        }
    }
    Matrix::from_fn(m, n, |r, c| basis[c][r])
}

/// Makes the first nonzero entry of every left singular vector non-negative.
fn canonical_signs(mut f: SvdFactorization) -> SvdFactorization {
    let cols = f.vt.cols();
    for j in 0..f.full_rank {
        let first = (0..f.u.rows()).map(|r| f.u[(r, j)]).find(|x| x.abs() > 1e-12);
        if first.is_some_and(|x| x < 0.0) {
            for r in 0..f.u.rows() {
                f.u[(r, j)] = -f.u[(r, j)];
            }
            for c in 0..cols {
                f.vt[(j, c)] = -f.vt[(j, c)];
            }
        }
    }
    f
}

/// `Σ_{i<k} σᵢ uᵢ vᵢᵀ`, the best rank-`k` approximation.
pub fn truncate(f: &SvdFactorization, k: usize) -> Result<Matrix> {
    if k == 0 || k > f.full_rank {
        return Err(Error::InvalidRank { rank: k, max: f.full_rank });
    }
    Ok(truncate_unchecked(f, k))
}

fn truncate_unchecked(f: &SvdFactorization, k: usize) -> Matrix {
    let (m, cols) = (f.u.rows(), f.vt.cols());
    let mut out = Matrix::zeros(m, cols);
    for i in 0..k {
        let s = f.sigma[i];
        if s == 0.0 {
            continue;
        }
        let v_row = f.vt.row(i);
        for r in 0..m {
            let coeff = s * f.u[(r, i)];
            for (o, &v) in out.row_mut(r).iter_mut().zip(v_row) {
                *o += coeff * v;
            }
        }
    }
    out
}
