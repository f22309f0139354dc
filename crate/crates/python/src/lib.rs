//! Python bindings for `featstab`.
//!
//! Matrices cross the boundary as lists of rows (`list[list[float]]`); any
//! sequence of float sequences, including a 2-D numpy array converted with
//! `.tolist()`, is accepted.

use std::path::PathBuf;

use featstab::lcmp_sim::{self, MaternParams, SimConfig};
use featstab::numerics::{self, Matrix, RngStream};
use featstab::pipeline::{self, Dataset, RunConfig};
use featstab::reduce_align;
use featstab::stability_select::{self, LambdaRule};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: featstab::Error) -> PyErr {
    match err {
        featstab::Error::Io { .. } => PyOSError::new_err(err.to_string()),
        featstab::Error::NotPsd { .. } | featstab::Error::Numerical(_) => {
            PyRuntimeError::new_err(err.to_string())
        }
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(to_py)
}

/// Modified Bessel function of the second kind `K_nu(x)`.
#[pyfunction]
fn bessel_k(nu: f64, x: f64) -> PyResult<f64> {
    numerics::bessel_k(nu, x).map_err(to_py)
}

/// Matérn covariance at distance `d`.
#[pyfunction]
fn matern_cov(d: f64, sigma2: f64, nu: f64, alpha: f64) -> PyResult<f64> {
    let params = MaternParams::new(sigma2, nu, alpha).map_err(to_py)?;
    Ok(lcmp_sim::matern_cov(d, &params))
}

/// Simulates a dataset into `out_dir` and returns the number of images.
#[pyfunction]
#[pyo3(signature = (out_dir, n_images, seed, width=32, height=32, n_classes=3))]
fn simulate(
    py: Python<'_>,
    out_dir: PathBuf,
    n_images: usize,
    seed: u64,
    width: usize,
    height: usize,
    n_classes: usize,
) -> PyResult<usize> {
    let cfg = SimConfig {
        n_images,
        grid_w: width,
        grid_h: height,
        n_classes,
        seed,
        ..SimConfig::default()
    };
    let ds = py
        .detach(|| lcmp_sim::generate_dataset(&cfg, &out_dir))
        .map_err(to_py)?;
    Ok(ds.n())
}

/// Lasso coefficients (one row per grid point) along a decreasing `lambdas` grid.
#[pyfunction]
fn lasso_path(x: Vec<Vec<f64>>, y: Vec<f64>, lambdas: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let x = matrix(x)?;
    let path = stability_select::lasso_path(&x, &y, &lambdas).map_err(to_py)?;
    Ok(path.coefficients.to_rows())
}

/// Selection probabilities `(features × grid)` and the grid they were computed on.
#[pyfunction]
#[pyo3(signature = (x, y, seed, n_reps=100, n_lambda=50, lambda_min_ratio=0.1))]
fn selection_probabilities(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    seed: u64,
    n_reps: usize,
    n_lambda: usize,
    lambda_min_ratio: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let x = matrix(x)?;
    let probs = py
        .detach(|| {
            let grid = stability_select::selection_grid(&x, &y, n_lambda, lambda_min_ratio)?;
            stability_select::selection_probabilities(
                &x,
                &y,
                &grid,
                n_reps,
                &RngStream::new(seed, 0),
            )
        })
        .map_err(to_py)?;
    Ok((probs.pi_hat.to_rows(), probs.lambda_grid))
}

/// Per-feature selection frequency across a list of selected index sets.
#[pyfunction]
fn selection_stability(selected_sets: Vec<Vec<usize>>, k: usize) -> PyResult<Vec<f64>> {
    if let Some(bad) = selected_sets.iter().flatten().find(|&&j| j >= k) {
        return Err(PyValueError::new_err(format!(
            "feature index {bad} out of range for k = {k}"
        )));
    }
    Ok(stability_select::selection_stability(&selected_sets, k))
}

/// Expected false-positive bound `q² / ((2·pi_thr − 1)·p)`.
#[pyfunction]
fn fp_bound(q: f64, p: usize, pi_thr: f64) -> PyResult<f64> {
    stability_select::fp_bound(q, p, pi_thr).map_err(to_py)
}

/// Rotation `R` minimizing `‖x − y·R‖_F`.
#[pyfunction]
fn procrustes_pair(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let r = reduce_align::procrustes_pair(&matrix(x)?, &matrix(y)?).map_err(to_py)?;
    Ok(r.to_rows())
}

/// Aligns a list of equally shaped matrices; returns `(fss, mean, aligned)`.
#[pyfunction]
fn generalized_procrustes(
    mats: Vec<Vec<Vec<f64>>>,
) -> PyResult<(f64, Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>)> {
    let mats = mats.into_iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
    let res = reduce_align::generalized_procrustes(&mats).map_err(to_py)?;
    Ok((
        res.fss,
        res.mean.to_rows(),
        res.aligned.iter().map(Matrix::to_rows).collect(),
    ))
}

/// Mean canonical correlation between the top-`k` SVD subspaces of `x` and `y`.
#[pyfunction]
fn svcca_similarity(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, k: usize) -> PyResult<f64> {
    reduce_align::svcca_similarity(&matrix(x)?, &matrix(y)?, k).map_err(to_py)
}

/// Runs the full pipeline on the dataset at `data` and writes the run
/// directory to `out_dir`. Returns a dict with `fss`, `ss_scores`,
/// `selected_sets`, `q_hat` and `fp_bound`.
#[pyfunction]
#[pyo3(signature = (data, out_dir, seed, b=20, k=10, n_patches=1048, patch_size=8, n_subsamples=250, pi_thr=0.75, lambda_rule="max-variance"))]
#[allow(clippy::too_many_arguments)]
fn run_all<'py>(
    py: Python<'py>,
    data: PathBuf,
    out_dir: PathBuf,
    seed: u64,
    b: usize,
    k: usize,
    n_patches: usize,
    patch_size: usize,
    n_subsamples: usize,
    pi_thr: f64,
    lambda_rule: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let rule: LambdaRule = lambda_rule.parse().map_err(to_py)?;
    let mut cfg = RunConfig {
        b,
        seed,
        ..RunConfig::default()
    };
    cfg.align.k = k;
    cfg.learner.n_patches = n_patches;
    cfg.learner.patch_size = patch_size;
    cfg.selection.n_reps = n_subsamples;
    cfg.selection.pi_thr = pi_thr;
    cfg.selection.lambda_rule = rule;
    let summary = py
        .detach(|| {
            let ds = Dataset::load(&data)?;
            pipeline::run_all(&ds, &cfg, Some(&out_dir))
        })
        .map_err(to_py)?;
    let res = &summary.selection.result;
    let out = PyDict::new(py);
    out.set_item("fss", summary.alignment.fss)?;
    out.set_item("ss_scores", res.ss_scores.clone())?;
    out.set_item("selected_sets", res.selected_sets.clone())?;
    out.set_item("q_hat", res.q_hat)?;
    out.set_item("fp_bound", res.fp_bound)?;
    Ok(out)
}

#[pymodule]
fn featstab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bessel_k, m)?)?;
    m.add_function(wrap_pyfunction!(matern_cov, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(lasso_path, m)?)?;
    m.add_function(wrap_pyfunction!(selection_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(selection_stability, m)?)?;
    m.add_function(wrap_pyfunction!(fp_bound, m)?)?;
    m.add_function(wrap_pyfunction!(procrustes_pair, m)?)?;
    m.add_function(wrap_pyfunction!(generalized_procrustes, m)?)?;
    m.add_function(wrap_pyfunction!(svcca_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(run_all, m)?)?;
    Ok(())
}
