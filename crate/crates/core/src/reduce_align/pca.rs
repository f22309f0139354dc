use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{mean_sd, svd, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Pca,
    Sca,
}

impl std::str::FromStr for Reduction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Reduction::Pca),
            "sca" => Ok(Reduction::Sca),
            other => Err(Error::Config(format!(
                "unknown reduction '{other}' (expected pca|sca)"
            ))),
        }
    }
}

/// `K`-dimensional coordinates of one feature matrix.
#[derive(Debug, Clone)]
pub struct ReducedFeatures {
    /// `n × K` sample coordinates.
    pub scores: Matrix,
    /// `L × K` loadings; rows of dropped (constant) columns are zero.
    pub loadings: Matrix,
    /// Per-dimension variance of the scores, non-increasing.
    pub variance_explained: Vec<f64>,
    pub method: Reduction,
    pub center: Vec<f64>,
    /// Column SDs used for scaling; constant columns are recorded as 1 and zeroed.
    pub scale: Vec<f64>,
}

/// Centers and scales the columns; constant columns become zero.
pub(crate) fn preprocess(z: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
    let (n, l) = z.shape();
    let mut center = Vec::with_capacity(l);
    let mut scale = Vec::with_capacity(l);
    let mut keep = Vec::with_capacity(l);
    for j in 0..l {
        let (m, s) = mean_sd(&z.col(j));
        let varies = s > 1e-12 * m.abs().max(1.0);
        center.push(m);
        scale.push(if varies { s } else { 1.0 });
        keep.push(varies);
    }
    let mut out = Matrix::zeros(n, l);
    for i in 0..n {
        let src = z.row(i);
        for (j, o) in out.row_mut(i).iter_mut().enumerate() {
            if keep[j] {
                *o = (src[j] - center[j]) / scale[j];
            }
        }
    }
    (out, center, scale)
}

pub(crate) fn check_rank(n: usize, l: usize, k: usize) -> Result<()> {
    if k == 0 || k > n.min(l) {
        return Err(Error::Config(format!(
            "reduction dimension {k} must lie in 1..={} for a {n}x{l} matrix",
            n.min(l)
        )));
    }
    Ok(())
}

/// Flips each column pair so the largest-magnitude loading is positive.
pub(crate) fn fix_signs(scores: &mut Matrix, loadings: &mut Matrix) {
    for k in 0..loadings.cols() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for j in 0..loadings.rows() {
            let v = loadings[(j, k)];
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            for j in 0..loadings.rows() {
                loadings[(j, k)] = -loadings[(j, k)];
            }
            for i in 0..scores.rows() {
                scores[(i, k)] = -scores[(i, k)];
            }
        }
    }
}

/// Principal components of the centered, scaled feature matrix.
pub fn pca_reduce(z: &Matrix, k: usize) -> Result<ReducedFeatures> {
    let (n, l) = z.shape();
    check_rank(n, l, k)?;
    if !z.is_finite() {
        return Err(Error::Data("feature matrix has non-finite entries".into()));
    }
    let (x, center, scale) = preprocess(z);
    let d = svd(&x)?;
    let mut scores = Matrix::from_fn(n, k, |i, j| d.u[(i, j)] * d.s[j]);
    let mut loadings = Matrix::from_fn(l, k, |i, j| d.vt[(j, i)]);
    fix_signs(&mut scores, &mut loadings);
    let denom = (n.max(2) - 1) as f64;
    let variance_explained = d.s[..k].iter().map(|s| s * s / denom).collect();
    Ok(ReducedFeatures {
        scores,
        loadings,
        variance_explained,
        method: Reduction::Pca,
        center,
        scale,
    })
}
