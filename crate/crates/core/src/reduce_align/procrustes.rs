use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{svd, Matrix};

const GPA_MAX_SWEEPS: usize = 500;
const GPA_TOL: f64 = 1e-8;

/// Orthonormal `R` minimizing `‖X − Y·R‖_F`: with `YᵀX = U·D·Vᵀ`, `R = U·Vᵀ`.
pub fn procrustes_pair(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    if x.shape() != y.shape() {
        return Err(Error::Shape(format!(
            "procrustes needs equal shapes, got {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let d = svd(&y.t_matmul(x))?;
    Ok(d.u.matmul(&d.vt))
}

/// Consensus of `B` rotated matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// `M`, the mean of the aligned matrices.
    #[serde(skip)]
    pub mean: Matrix,
    /// Orthonormal `K × K` rotation per replicate.
    #[serde(skip)]
    pub rotations: Vec<Matrix>,
    /// `Z̄_b = Z̃_b·R_b`.
    #[serde(skip)]
    pub aligned: Vec<Matrix>,
    pub fss: f64,
    /// Total objective `Σ_b ‖Z̄_b − M‖²_F`, initial value first.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
}

fn total_objective(aligned: &[Matrix], mean: &Matrix) -> f64 {
    aligned.iter().map(|a| a.sub(mean).frobenius_sq()).sum()
}

fn mean_of(mats: &[Matrix]) -> Matrix {
    let mut m = Matrix::zeros(mats[0].rows(), mats[0].cols());
    for a in mats {
        m.add_assign(a);
    }
    m.scale(1.0 / mats.len() as f64)
}

/// Generalized Procrustes alignment by alternating per-replicate rotations
/// against the current mean and re-averaging; starts from `M = Z̃₁`.
pub fn generalized_procrustes(reduced: &[Matrix]) -> Result<AlignmentResult> {
    if reduced.len() < 2 {
        return Err(Error::Config(format!(
            "generalized Procrustes needs at least 2 matrices, got {}",
            reduced.len()
        )));
    }
    let shape = reduced[0].shape();
    if let Some((b, m)) = reduced.iter().enumerate().find(|(_, m)| m.shape() != shape) {
        return Err(Error::Shape(format!(
            "matrix {b} is {:?}, expected {shape:?}",
            m.shape()
        )));
    }
    for (b, m) in reduced.iter().enumerate() {
        let scale = m.max_abs().max(1.0);
        if m.col_means().iter().any(|c| c.abs() > 1e-8 * scale) {
            return Err(Error::Data(format!("matrix {b} is not column-centered")));
        }
    }

    let mut mean = reduced[0].clone();
    let mut rotations = vec![Matrix::identity(shape.1); reduced.len()];
    let mut aligned: Vec<Matrix> = reduced.to_vec();
    let mut obj = total_objective(&aligned, &mean);
    let mut trace = vec![obj];
    let mut sweeps = 0;

    while sweeps < GPA_MAX_SWEEPS {
        sweeps += 1;
        for (b, z) in reduced.iter().enumerate() {
            rotations[b] = procrustes_pair(&mean, z)?;
            aligned[b] = z.matmul(&rotations[b]);
        }
        mean = mean_of(&aligned);
        let next = total_objective(&aligned, &mean);
        if next > obj + 1e-12 * (1.0 + obj) {
            return Err(Error::Numerical(format!(
                "Procrustes objective increased from {obj} to {next} in sweep {sweeps}"
            )));
        }
        trace.push(next);
        let decrease = obj - next;
        obj = next;
        if decrease < GPA_TOL {
            break;
        }
    }
    let mut result = AlignmentResult {
        mean,
        rotations,
        aligned,
        fss: 0.0,
        objective_trace: trace,
        sweeps,
    };
    result.fss = fss_score(&result);
    Ok(result)
}

/// Feature subspace stability: `(1/B)·Σ_b ‖Z̄_b − M‖²_F`.
pub fn fss_score(result: &AlignmentResult) -> f64 {
    if result.aligned.is_empty() {
        return 0.0;
    }
    total_objective(&result.aligned, &result.mean) / result.aligned.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn centered(seed: u64, n: usize, k: usize) -> Matrix {
        let mut rng = RngStream::new(seed, 0);
        Matrix::from_fn(n, k, |_, _| rng.standard_normal())
            .center_cols()
            .0
    }

    #[test]
    fn identical_inputs_need_no_rotation() {
        let x = centered(1, 20, 3);
        let r = procrustes_pair(&x, &x).unwrap();
        assert!(r.sub(&Matrix::identity(3)).max_abs() < 1e-10);
        let res = generalized_procrustes(&[x.clone(), x.clone(), x]).unwrap();
        assert!(res
            .rotations
            .iter()
            .all(|r| r.sub(&Matrix::identity(3)).max_abs() < 1e-10));
        assert!(res.fss <= 1e-20);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = centered(1, 10, 2);
        assert!(generalized_procrustes(std::slice::from_ref(&x)).is_err());
        assert!(generalized_procrustes(&[x.clone(), centered(2, 11, 2)]).is_err());
        let shifted = x.add(&Matrix::from_fn(10, 2, |_, _| 1.0));
        assert!(matches!(
            generalized_procrustes(&[x, shifted]),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn fss_of_symmetric_perturbation() {
        let m = centered(3, 15, 4);
        let e = centered(4, 15, 4).scale(0.1);
        let res = AlignmentResult {
            mean: m.clone(),
            rotations: vec![Matrix::identity(4); 2],
            aligned: vec![m.add(&e), m.sub(&e)],
            fss: 0.0,
            objective_trace: vec![],
            sweeps: 0,
        };
        assert!((fss_score(&res) - e.frobenius_sq()).abs() < 1e-10);
    }
}
