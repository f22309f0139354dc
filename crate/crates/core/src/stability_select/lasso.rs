use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};

const MAX_SWEEPS: usize = 100_000;
const KKT_TOL: f64 = 1e-6;

/// Lasso coefficients along a decreasing regularization grid, for the
/// objective `(1/2n)‖y − Xβ‖² + λ‖β‖₁`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoPath {
    pub lambda_grid: Vec<f64>,
    /// `G × p`, row `g` at `lambda_grid[g]`.
    #[serde(skip)]
    pub coefficients: Matrix,
    pub intercepts: Vec<f64>,
}

impl LassoPath {
    pub fn coef(&self, g: usize) -> &[f64] {
        self.coefficients.row(g)
    }

    /// Indices of nonzero coefficients at grid point `g`.
    pub fn support(&self, g: usize) -> Vec<usize> {
        self.coef(g)
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Smallest λ at which all coefficients vanish: `max_j |X_jᵀy| / n`.
pub fn lambda_max(x: &Matrix, y: &[f64]) -> f64 {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| dot(&x.col(j), y).abs() / n)
        .fold(0.0, f64::max)
}

/// `g` log-spaced points from `λ_max` down to `min_ratio · λ_max`.
pub fn log_grid(lambda_max: f64, g: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if g == 0 || !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::Config(format!(
            "grid needs g >= 1 and ratio in (0,1), got g={g}, ratio={min_ratio}"
        )));
    }
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::Data(format!(
            "lambda_max must be positive, got {lambda_max}"
        )));
    }
    if g == 1 {
        return Ok(vec![lambda_max]);
    }
    let hi = lambda_max.ln();
    let lo = (lambda_max * min_ratio).ln();
    Ok((0..g)
        .map(|i| (hi + (lo - hi) * i as f64 / (g - 1) as f64).exp())
        .collect())
}

/// Default grid: 50 points from `λ_max` to `1e-3·λ_max`.
pub fn default_grid(x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    log_grid(lambda_max(x, y), 50, 1e-3)
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn lasso_objective(x: &Matrix, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = x.rows() as f64;
    let fit = x.matvec(beta);
    let rss: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b).powi(2)).sum();
    rss / (2.0 * n) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Cyclic coordinate descent with warm starts along `grid`. Each grid point is
/// solved until every KKT residual is at most `1e-6`.
pub fn lasso_path(x: &Matrix, y: &[f64], grid: &[f64]) -> Result<LassoPath> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Shape(format!(
            "{n} design rows but {} responses",
            y.len()
        )));
    }
    if n == 0 {
        return Err(Error::Data("lasso needs at least one sample".into()));
    }
    if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::Config(
            "lambda grid must be non-empty and positive".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "lambda grid must be strictly decreasing".into(),
        ));
    }
    let nf = n as f64;
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.col(j)).collect();
    let col_sq: Vec<f64> = cols.iter().map(|c| dot(c, c) / nf).collect();
    let mut beta = vec![0.0; p];
    let mut resid = y.to_vec();
    let mut coefficients = Matrix::zeros(grid.len(), p);

    for (g, &lambda) in grid.iter().enumerate() {
        let mut sweeps = 0;
        loop {
            let mut max_delta = 0.0f64;
            for j in 0..p {
                if col_sq[j] == 0.0 {
                    continue;
                }
                let old = beta[j];
                let rho = dot(&cols[j], &resid) / nf + col_sq[j] * old;
                let new = soft_threshold(rho, lambda) / col_sq[j];
                if new != old {
                    let delta = new - old;
                    for (r, c) in resid.iter_mut().zip(&cols[j]) {
                        *r -= delta * c;
                    }
                    beta[j] = new;
                    max_delta = max_delta.max(delta.abs() * col_sq[j].sqrt());
                }
            }
            sweeps += 1;
            if max_delta < 1e-10 && kkt_residual(&cols, &resid, &beta, lambda) <= KKT_TOL {
                break;
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::Numerical(format!(
                    "lasso did not converge at grid point {g} (lambda = {lambda:e}) after {MAX_SWEEPS} sweeps"
                )));
            }
        }
        coefficients.row_mut(g).copy_from_slice(&beta);
    }

    let x_means = x.col_means();
    let y_mean = y.iter().sum::<f64>() / nf;
    let intercepts = (0..grid.len())
        .map(|g| y_mean - dot(&x_means, coefficients.row(g)))
        .collect();
    Ok(LassoPath {
        lambda_grid: grid.to_vec(),
        coefficients,
        intercepts,
    })
}

/// Largest violation of the lasso optimality conditions.
fn kkt_residual(cols: &[Vec<f64>], resid: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = resid.len() as f64;
    let mut worst = 0.0f64;
    for (c, &b) in cols.iter().zip(beta) {
        let g = dot(c, resid) / n;
        let v = if b != 0.0 {
            (g - lambda * b.signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}
