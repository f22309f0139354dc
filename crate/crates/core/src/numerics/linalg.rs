//! Dense factorizations: singular value decomposition, Cholesky with jitter
//! escalation, symmetric eigendecomposition and the derived polar factor.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 80;
const JITTER_ESCALATIONS: usize = 8;

/// Thin singular value decomposition `A = U · diag(S) · Vt`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m × k` with orthonormal columns, `k = min(m, n)`.
    pub u: Matrix,
    /// Non-increasing singular values.
    pub s: Vec<f64>,
    /// `k × n` with orthonormal rows.
    pub vt: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (v, s) in us.row_mut(i).iter_mut().zip(&self.s) {
                *v *= s;
            }
        }
        us.matmul(&self.vt)
    }
}

/// Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
pub fn svd(a: &Matrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::Domain(
            "svd of a matrix with non-finite entries".into(),
        ));
    }
    if a.rows() >= a.cols() {
        svd_tall(a)
    } else {
        let t = svd_tall(&a.transpose())?;
        Ok(Svd {
            u: t.vt.transpose(),
            s: t.s,
            vt: t.u.transpose(),
        })
    }
}

fn svd_tall(a: &Matrix) -> Result<Svd> {
    let (m, n) = a.shape();
    // Columns of A stored as contiguous rows.
    let mut w = a.transpose();
    let mut v = Matrix::identity(n);
    let tol = f64::EPSILON;

    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let wp = w.row(p);
                    let wq = w.row(q);
                    (dot(wp, wp), dot(wq, wq), dot(wp, wq))
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Jacobi SVD of a {m}x{n} matrix did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<(usize, f64)> = (0..n)
        .map(|j| (j, dot(w.row(j), w.row(j)).sqrt()))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut u = Matrix::zeros(m, n);
    let mut vt = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &(j, sigma)) in order.iter().enumerate() {
        s.push(sigma);
        vt.row_mut(k).copy_from_slice(v.row(j));
        if sigma > 0.0 {
            for (i, &x) in w.row(j).iter().enumerate() {
                u[(i, k)] = x / sigma;
            }
        } else {
            missing.push(k);
        }
    }
    complete_orthonormal_columns(&mut u, &missing);
    Ok(Svd { u, s, vt })
}

#[inline]
fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to every other
/// column (Gram–Schmidt over the standard basis).
fn complete_orthonormal_columns(u: &mut Matrix, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let (m, k) = u.shape();
    let mut filled: Vec<bool> = (0..k).map(|j| !missing.contains(&j)).collect();
    for &target in missing {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..m {
            let mut cand = vec![0.0; m];
            cand[e] = 1.0;
            for _ in 0..2 {
                for j in (0..k).filter(|&j| filled[j]) {
                    let col = u.col(j);
                    let proj = dot(&cand, &col);
                    for (c, x) in cand.iter_mut().zip(&col) {
                        *c -= proj * x;
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, cand));
            }
            if norm > 0.7 {
                break;
            }
        }
        let (norm, cand) = best.expect("at least one basis vector");
        let col: Vec<f64> = cand.iter().map(|x| x / norm).collect();
        u.set_col(target, &col);
        filled[target] = true;
    }
}

/// Lower-triangular Cholesky factor of a symmetric matrix.
///
/// Tries jitter `0`, then `jitter`, `10·jitter`, … for up to eight
/// escalations and returns the factor of `A + j·I` for the first `j` that
/// succeeds, together with that `j`.
pub fn cholesky_psd(a: &Matrix, jitter: f64) -> Result<(Matrix, f64)> {
    if a.rows() != a.cols() {
        return Err(Error::Shape(format!(
            "cholesky of non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if !(jitter >= 0.0) || !jitter.is_finite() {
        return Err(Error::Config(format!(
            "jitter must be finite and non-negative, got {jitter}"
        )));
    }
    let mut schedule = vec![0.0];
    if jitter > 0.0 {
        schedule.extend((0..JITTER_ESCALATIONS).map(|k| jitter * 10f64.powi(k as i32)));
    }
    for &j in &schedule {
        if let Some(l) = cholesky_attempt(a, j) {
            return Ok((l, j));
        }
    }
    Err(Error::NotPsd {
        jitter: *schedule.last().unwrap(),
        attempts: schedule.len(),
    })
}

const CHOLESKY_BLOCK: usize = 64;

/// Blocked right-looking factorization of `A + jitter·I`; `None` when a pivot
/// is not positive.
fn cholesky_attempt(a: &Matrix, jitter: f64) -> Option<Matrix> {
    let n = a.rows();
    let mut d = a.as_slice().to_vec();
    for i in 0..n {
        d[i * n + i] += jitter;
    }
    for k0 in (0..n).step_by(CHOLESKY_BLOCK) {
        let k1 = (k0 + CHOLESKY_BLOCK).min(n);
        // Diagonal block, then the panel below it; both only need columns
        // k0.. because earlier blocks were already subtracted.
        for i in k0..n {
            for j in k0..=i.min(k1 - 1) {
                let s = d[i * n + j] - dot(&d[i * n + k0..i * n + j], &d[j * n + k0..j * n + j]);
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    d[i * n + i] = s.sqrt();
                } else {
                    d[i * n + j] = s / d[j * n + j];
                }
            }
        }
        // Trailing lower triangle, four target columns at a time.
        let w = k1 - k0;
        let panel: Vec<f64> = (k1..n)
            .flat_map(|i| d[i * n + k0..i * n + k1].iter().copied())
            .collect();
        let row = |i: usize| &panel[(i - k1) * w..(i - k1 + 1) * w];
        for i in k1..n {
            let ri = row(i);
            let mut j = k1;
            while j + 4 <= i + 1 {
                let s = dot4(ri, [row(j), row(j + 1), row(j + 2), row(j + 3)]);
                for (t, v) in s.iter().enumerate() {
                    d[i * n + j + t] -= v;
                }
                j += 4;
            }
            for j in j..=i {
                d[i * n + j] -= dot(ri, row(j));
            }
        }
    }
    for i in 0..n {
        for v in &mut d[i * n + i + 1..(i + 1) * n] {
            *v = 0.0;
        }
    }
    Some(Matrix::from_vec(n, n, d).expect("square"))
}

/// `[a·b₀, a·b₁, a·b₂, a·b₃]` for equal-length slices.
#[inline]
fn dot4(a: &[f64], b: [&[f64]; 4]) -> [f64; 4] {
    let mut acc = [[0.0f64; 4]; 4];
    let n = a.len();
    let chunks = n / 4;
    for c in 0..chunks {
        let o = c * 4;
        let x = &a[o..o + 4];
        for (t, bt) in b.iter().enumerate() {
            let y = &bt[o..o + 4];
            for k in 0..4 {
                acc[t][k] += x[k] * y[k];
            }
        }
    }
    let mut out = [0.0; 4];
    for t in 0..4 {
        let tail: f64 = (chunks * 4..n).map(|k| a[k] * b[t][k]).sum();
        out[t] = (acc[t][0] + acc[t][2]) + (acc[t][1] + acc[t][3]) + tail;
    }
    out
}

/// Solves `L·Lᵀ x = b` for a lower-triangular factor `L`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut z = b.to_vec();
    for i in 0..n {
        let s = dot(&l.row(i)[..i], &z[..i]);
        z[i] = (z[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[(k, i)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are returned in non-increasing order; eigenvectors are the
/// matching columns of the second value.
pub fn sym_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::Shape("sym_eigen needs a square matrix".into()));
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let tiny = m.max_abs() * f64::EPSILON * 1e-3;
    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        // A sweep without any significant rotation means the off-diagonal
        // part is negligible relative to the diagonal.
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let diag_scale = (m[(p, p)].abs() * m[(q, q)].abs()).sqrt();
                if apq.abs() <= tiny || apq.abs() <= f64::EPSILON * 1e-1 * diag_scale {
                    continue;
                }
                rotated = true;
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numerical(
            "symmetric Jacobi eigensolver did not converge".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = v.select_cols(&order);
    Ok((values, vectors))
}

/// Orthonormal polar factor `U·Vᵀ` of `A = U·D·Vᵀ`: the closest matrix with
/// orthonormal columns in Frobenius norm.
pub fn polar(a: &Matrix) -> Result<Matrix> {
    let d = svd(a)?;
    Ok(d.u.matmul(&d.vt))
}

/// `(S + eps·I)^{-1/2}` for a symmetric positive semi-definite `S`.
pub fn inv_sqrt_psd(s: &Matrix, eps: f64) -> Result<Matrix> {
    let (vals, vecs) = sym_eigen(s)?;
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let l = l + eps;
        if !(l > top * 1e-13) || l <= 0.0 {
            return Err(Error::Numerical(format!(
                "covariance is degenerate (eigenvalue {l:e} vs largest {top:e}); use a positive regularization"
            )));
        }
        let f = 1.0 / l.sqrt();
        for i in 0..scaled.rows() {
            scaled[(i, j)] *= f;
        }
    }
    Ok(scaled.matmul(&vecs.transpose()))
}
