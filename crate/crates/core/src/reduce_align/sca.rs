//! Sparse components analysis: `min ‖X − Z·B·Yᵀ‖_F` over orthonormal `Z`
//! (`n × K`), orthonormal `Y` (`L × K`) with `‖Y‖₁ ≤ γ`, and free `B`
//! (`K × K`), by block alternation.

use super::pca::{check_rank, fix_signs, preprocess, ReducedFeatures, Reduction};
use crate::error::{Error, Result};
use crate::numerics::{polar, svd, Matrix};

const MAX_ITER: usize = 200;
const TOL: f64 = 1e-6;
const BISECTION_STEPS: usize = 60;

/// Iteration record of an SCA fit.
#[derive(Debug, Clone)]
pub struct ScaFit {
    pub reduced: ReducedFeatures,
    /// Reconstruction objective after initialization and after each iteration.
    pub objective_trace: Vec<f64>,
    pub loadings_l1: f64,
}

fn l1(m: &Matrix) -> f64 {
    m.as_slice().iter().map(|v| v.abs()).sum()
}

fn soft_threshold(a: &Matrix, theta: f64) -> Matrix {
    let data = a
        .as_slice()
        .iter()
        .map(|&v| v.signum() * (v.abs() - theta).max(0.0))
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

/// Orthonormal `Y` close to `A` with `‖Y‖₁ ≤ γ`: soft-threshold `A` at the
/// smallest level (found by bisection) whose polar factor meets the budget.
fn sparse_polar(a: &Matrix, gamma: f64) -> Result<Matrix> {
    let dense = polar(a)?;
    if !gamma.is_finite() || l1(&dense) <= gamma {
        return Ok(dense);
    }
    let mut lo = 0.0;
    let mut hi = a.max_abs();
    let mut best: Option<Matrix> = None;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let cand = polar(&soft_threshold(a, mid))?;
        if l1(&cand) <= gamma {
            hi = mid;
            best = Some(cand);
        } else {
            lo = mid;
        }
    }
    match best {
        Some(y) => Ok(y),
        None => {
            let y = polar(&soft_threshold(a, hi))?;
            if l1(&y) <= gamma * (1.0 + 1e-12) {
                Ok(y)
            } else {
                Err(Error::Numerical(format!(
                    "could not meet the l1 budget {gamma} on the loadings"
                )))
            }
        }
    }
}

fn objective(x: &Matrix, z: &Matrix, b: &Matrix, y: &Matrix) -> f64 {
    x.sub(&z.matmul(b).matmul(&y.transpose())).frobenius_norm()
}

fn trace_product(y: &Matrix, a: &Matrix) -> f64 {
    y.as_slice()
        .iter()
        .zip(a.as_slice())
        .map(|(p, q)| p * q)
        .sum()
}

/// Sparse components of the centered, scaled features. `gamma = ∞` leaves the
/// loadings unconstrained; finite `gamma` must be at least `K` (the smallest
/// possible ℓ₁ norm of `K` orthonormal columns).
pub fn sca_reduce(z: &Matrix, k: usize, gamma: f64) -> Result<ReducedFeatures> {
    Ok(sca_fit(z, k, gamma)?.reduced)
}

pub fn sca_fit(z: &Matrix, k: usize, gamma: f64) -> Result<ScaFit> {
    let (n, l) = z.shape();
    check_rank(n, l, k)?;
    if !(gamma > 0.0) {
        return Err(Error::Config(format!(
            "sparsity budget must be positive, got {gamma}"
        )));
    }
    if gamma < k as f64 {
        return Err(Error::Config(format!(
            "sparsity budget {gamma} is below the minimum {k} for {k} components"
        )));
    }
    let (x, center, scale) = preprocess(z);

    // Start from the principal loadings projected onto the budget.
    let d = svd(&x)?;
    let v_k = Matrix::from_fn(l, k, |i, j| d.vt[(j, i)]);
    let mut y = sparse_polar(&v_k, gamma)?;
    let mut zf = polar(&x.matmul(&y))?;
    let mut b = zf.t_matmul(&x.matmul(&y));
    let mut obj = objective(&x, &zf, &b, &y);
    let mut trace = vec![obj];

    for _ in 0..MAX_ITER {
        // (a) loadings: keep the thresholded candidate only if it does not
        // worsen the fit for the current Z, B.
        let a = x.t_matmul(&zf).matmul(&b);
        let cand = sparse_polar(&a, gamma)?;
        if trace_product(&cand, &a) >= trace_product(&y, &a) {
            y = cand;
        }
        // (b) scores basis
        zf = polar(&x.matmul(&y).matmul(&b.transpose()))?;
        // (c) core
        b = zf.t_matmul(&x.matmul(&y));
        let next = objective(&x, &zf, &b, &y);
        if next > obj + 1e-10 * (1.0 + obj) {
            return Err(Error::Numerical(format!(
                "SCA objective increased from {obj} to {next} at iteration {}",
                trace.len()
            )));
        }
        trace.push(next);
        let decrease = obj - next;
        obj = next;
        if decrease < TOL {
            break;
        }
    }

    let scores_raw = zf.matmul(&b);
    let denom = (n.max(2) - 1) as f64;
    let var: Vec<f64> = (0..k)
        .map(|j| scores_raw.col(j).iter().map(|v| v * v).sum::<f64>() / denom)
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &c| var[c].total_cmp(&var[a]).then(a.cmp(&c)));
    let mut scores = scores_raw.select_cols(&order);
    let mut loadings = y.select_cols(&order);
    fix_signs(&mut scores, &mut loadings);
    let variance_explained = order.iter().map(|&j| var[j]).collect();
    let loadings_l1 = l1(&loadings);
    Ok(ScaFit {
        reduced: ReducedFeatures {
            scores,
            loadings,
            variance_explained,
            method: Reduction::Sca,
            center,
            scale,
        },
        objective_trace: trace,
        loadings_l1,
    })
}
