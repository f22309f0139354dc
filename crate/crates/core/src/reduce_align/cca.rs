use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{inv_sqrt_psd, svd, Matrix};

/// Canonical correlations and directions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CcaResult {
    /// Non-increasing, in `[0, 1]`.
    pub correlations: Vec<f64>,
    /// `p × K` directions for the first block.
    #[serde(skip)]
    pub directions_x: Matrix,
    /// `q × K` directions for the second block.
    #[serde(skip)]
    pub directions_y: Matrix,
    /// Ridge added to both covariance diagonals before whitening.
    pub regularization: f64,
}

/// Regularization for whitening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CcaRidge {
    /// No ridge while both covariances are numerically non-singular; otherwise
    /// `1e-6 · trace / dim` of the joint covariance.
    Auto,
    Fixed(f64),
}

fn covariances(x: &Matrix, y: &Matrix) -> (Matrix, Matrix, Matrix) {
    let n = x.rows();
    let (xc, _) = x.center_cols();
    let (yc, _) = y.center_cols();
    let d = 1.0 / (n as f64 - 1.0);
    (
        xc.t_matmul(&xc).scale(d),
        yc.t_matmul(&yc).scale(d),
        xc.t_matmul(&yc).scale(d),
    )
}

/// Top-`K` canonical correlations: singular values of
/// `(Σ_X + εI)^{-1/2} Σ_XY (Σ_Y + εI)^{-1/2}`, clipped to `[0, 1]`.
pub fn cca(x: &Matrix, y: &Matrix, k: usize, ridge: CcaRidge) -> Result<CcaResult> {
    let (n, p) = x.shape();
    let q = y.cols();
    if y.rows() != n {
        return Err(Error::Shape(format!(
            "CCA blocks have {n} and {} rows",
            y.rows()
        )));
    }
    if k == 0 || k > p.min(q) {
        return Err(Error::Config(format!(
            "CCA dimension {k} must lie in 1..={}",
            p.min(q)
        )));
    }
    if n <= p.max(q) {
        return Err(Error::Config(format!(
            "CCA needs more samples ({n}) than columns ({})",
            p.max(q)
        )));
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::Data("CCA inputs contain non-finite values".into()));
    }
    let (sxx, syy, sxy) = covariances(x, y);
    let whiten = |eps: f64| -> Result<(Matrix, Matrix)> {
        Ok((inv_sqrt_psd(&sxx, eps)?, inv_sqrt_psd(&syy, eps)?))
    };
    let (eps, (wx, wy)) = match ridge {
        CcaRidge::Fixed(eps) => {
            if !(eps >= 0.0) {
                return Err(Error::Config(format!(
                    "CCA regularization must be >= 0, got {eps}"
                )));
            }
            (eps, whiten(eps)?)
        }
        CcaRidge::Auto => match whiten(0.0) {
            Ok(w) => (0.0, w),
            Err(_) => {
                let eps = 1e-6 * (sxx.trace() + syy.trace()) / (p + q) as f64;
                let eps = if eps > 0.0 { eps } else { 1e-12 };
                (eps, whiten(eps)?)
            }
        },
    };
    let t = wx.matmul(&sxy).matmul(&wy);
    let d = svd(&t)?;
    let correlations = d.s[..k].iter().map(|s| s.clamp(0.0, 1.0)).collect();
    let directions_x = wx.matmul(&d.u.leading_cols(k));
    let directions_y = wy.matmul(&d.vt.transpose().leading_cols(k));
    Ok(CcaResult {
        correlations,
        directions_x,
        directions_y,
        regularization: eps,
    })
}

/// Coordinates of the (column-centered) matrix in its top-`K` singular
/// directions, `U_{1:K}·D_{1:K}`.
pub fn svd_truncate(x: &Matrix, k: usize) -> Result<Matrix> {
    let (xc, _) = x.center_cols();
    let d = svd(&xc)?;
    Ok(Matrix::from_fn(x.rows(), k, |i, j| d.u[(i, j)] * d.s[j]))
}

/// SVCCA similarity: mean of the canonical correlations between the top-`K`
/// singular coordinates of `X` and `Y`.
pub fn svcca_similarity(x: &Matrix, y: &Matrix, k: usize) -> Result<f64> {
    let n = x.rows();
    if y.rows() != n {
        return Err(Error::Shape(format!(
            "SVCCA inputs have {n} and {} rows",
            y.rows()
        )));
    }
    if k == 0 || k > x.cols().min(y.cols()).min(n) {
        return Err(Error::Config(format!(
            "SVCCA dimension {k} exceeds the input sizes"
        )));
    }
    let zx = svd_truncate(x, k)?;
    let zy = svd_truncate(y, k)?;
    let res = cca(&zx, &zy, k, CcaRidge::Auto)?;
    Ok(res.correlations.iter().sum::<f64>() / k as f64)
}
