use std::collections::BTreeSet;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lasso::{lambda_max, lasso_path, log_grid};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

/// Stability-selection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Number of half-size subsamples.
    pub n_reps: usize,
    pub n_lambda: usize,
    /// Smallest grid point as a fraction of `λ_max`.
    pub lambda_min_ratio: f64,
    pub pi_thr: f64,
    pub lambda_rule: LambdaRule,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            n_reps: 250,
            n_lambda: 50,
            lambda_min_ratio: 0.1,
            pi_thr: 0.75,
            lambda_rule: LambdaRule::MaxVariance,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::Config(
                "stability selection needs at least one subsample".into(),
            ));
        }
        if self.n_lambda == 0 || !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::Config(format!(
                "lambda grid needs n_lambda >= 1 and min ratio in (0,1), got {} and {}",
                self.n_lambda, self.lambda_min_ratio
            )));
        }
        check_threshold(self.pi_thr)
    }
}

/// How a selection set is read off the selection-frequency paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRule {
    /// `{j : max_λ Π̂_j(λ) ≥ π_thr}`.
    MaxOverGrid,
    /// Threshold at the single grid point where the selected-set size varies
    /// most across subsamples.
    MaxVariance,
    /// Threshold at a fixed grid index.
    Index(usize),
}

impl FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" | "max-over-grid" => Ok(LambdaRule::MaxOverGrid),
            "max-variance" => Ok(LambdaRule::MaxVariance),
            other => other
                .strip_prefix("index:")
                .and_then(|i| i.parse().ok())
                .map(LambdaRule::Index)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown lambda rule '{s}' (max, max-variance, index:<g>)"
                    ))
                }),
        }
    }
}

/// Selection frequencies `Π̂_j(λ_g)` for one design.
#[derive(Debug, Clone)]
pub struct SelectionProbabilities {
    /// `p × G`.
    pub pi_hat: Matrix,
    pub lambda_grid: Vec<f64>,
    pub n_subsamples: usize,
    /// Per subsample, the number of nonzero coefficients at each grid point.
    pub set_sizes: Vec<Vec<usize>>,
    /// Per subsample, the number of features nonzero anywhere on the grid.
    pub union_sizes: Vec<usize>,
}

impl SelectionProbabilities {
    pub fn n_features(&self) -> usize {
        self.pi_hat.rows()
    }

    /// `max_λ Π̂_j(λ)` for every feature.
    pub fn max_pi(&self) -> Vec<f64> {
        (0..self.pi_hat.rows())
            .map(|j| self.pi_hat.row(j).iter().fold(0.0, |m: f64, v| m.max(*v)))
            .collect()
    }

    pub fn pi_at(&self, g: usize) -> Vec<f64> {
        self.pi_hat.col(g)
    }

    /// Average number of features selected somewhere on the grid, the
    /// empirical `q` in the false-positive bound.
    pub fn q_hat(&self) -> f64 {
        self.union_sizes.iter().sum::<usize>() as f64 / self.n_subsamples as f64
    }

    /// Grid index maximizing the across-subsample variance of the selected-set
    /// size; ties go to the larger λ.
    pub fn max_variance_index(&self) -> usize {
        let g_len = self.lambda_grid.len();
        let n = self.set_sizes.len() as f64;
        let mut best = (0, f64::NEG_INFINITY);
        for g in 0..g_len {
            let mean = self.set_sizes.iter().map(|s| s[g] as f64).sum::<f64>() / n;
            let var = self
                .set_sizes
                .iter()
                .map(|s| (s[g] as f64 - mean).powi(2))
                .sum::<f64>()
                / n;
            if var > best.1 {
                best = (g, var);
            }
        }
        best.0
    }

    /// Frequencies the rule thresholds: the grid maximum or one grid column.
    pub fn scores(&self, rule: LambdaRule) -> Result<Vec<f64>> {
        match rule {
            LambdaRule::MaxOverGrid => Ok(self.max_pi()),
            LambdaRule::MaxVariance => Ok(self.pi_at(self.max_variance_index())),
            LambdaRule::Index(g) if g < self.lambda_grid.len() => Ok(self.pi_at(g)),
            LambdaRule::Index(g) => Err(Error::Config(format!(
                "lambda index {g} outside a grid of {} points",
                self.lambda_grid.len()
            ))),
        }
    }
}

/// Column standardization (sample sd) with constant columns set to zero.
pub fn standardize_columns(x: &Matrix) -> Matrix {
    let (mut xc, _) = x.center_cols();
    let n = x.rows();
    for j in 0..x.cols() {
        let ss: f64 = (0..n).map(|i| xc[(i, j)] * xc[(i, j)]).sum();
        let sd = (ss / (n.max(2) - 1) as f64).sqrt();
        let scale = if sd > 1e-12 { 1.0 / sd } else { 0.0 };
        for i in 0..n {
            xc[(i, j)] *= scale;
        }
    }
    xc
}

fn center(y: &[f64]) -> Vec<f64> {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| v - m).collect()
}

/// Shared λ grid for a design: log-spaced from `λ_max` of the standardized
/// problem. Falls back to a unit grid when the response is constant.
pub fn selection_grid(x: &Matrix, y: &[f64], n_lambda: usize, min_ratio: f64) -> Result<Vec<f64>> {
    let lm = lambda_max(&standardize_columns(x), &center(y));
    let lm = if lm > 0.0 && lm.is_finite() { lm } else { 1.0 };
    log_grid(lm, n_lambda, min_ratio)
}

/// Fraction of half-size subsamples (drawn without replacement) in which each
/// feature has a nonzero lasso coefficient at each grid point. Every
/// subsample is standardized on its own; subsample `r` draws from the stream
/// derived from `(rng.stream_id(), r)`, so results do not depend on
/// scheduling.
pub fn selection_probabilities(
    x: &Matrix,
    y: &[f64],
    grid: &[f64],
    n_reps: usize,
    rng: &RngStream,
) -> Result<SelectionProbabilities> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Shape(format!(
            "{n} design rows but {} responses",
            y.len()
        )));
    }
    if n < 4 {
        return Err(Error::Data(format!(
            "stability selection needs at least 4 samples, got {n}"
        )));
    }
    if n_reps == 0 {
        return Err(Error::Config(
            "stability selection needs at least one subsample".into(),
        ));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "stability selection inputs contain non-finite values".into(),
        ));
    }
    let half = n / 2;
    let (master, base) = (rng.master_seed(), rng.stream_id());
    let fits: Vec<Vec<Vec<usize>>> = (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let mut stream = RngStream::derive(master, &[base, r as u64]);
            let mut rows = stream.sample_without_replacement(n, half);
            rows.sort_unstable();
            let xs = standardize_columns(&x.select_rows(&rows));
            let ys: Vec<f64> = center(&rows.iter().map(|&i| y[i]).collect::<Vec<_>>());
            let path = lasso_path(&xs, &ys, grid)?;
            Ok((0..grid.len()).map(|g| path.support(g)).collect())
        })
        .collect::<Result<_>>()?;

    let g_len = grid.len();
    let mut counts = Matrix::zeros(p, g_len);
    let mut set_sizes = Vec::with_capacity(n_reps);
    let mut union_sizes = Vec::with_capacity(n_reps);
    for supports in &fits {
        let mut union = BTreeSet::new();
        for (g, s) in supports.iter().enumerate() {
            for &j in s {
                counts[(j, g)] += 1.0;
                union.insert(j);
            }
        }
        set_sizes.push(supports.iter().map(Vec::len).collect());
        union_sizes.push(union.len());
    }
    Ok(SelectionProbabilities {
        pi_hat: counts.scale(1.0 / n_reps as f64),
        lambda_grid: grid.to_vec(),
        n_subsamples: n_reps,
        set_sizes,
        union_sizes,
    })
}

fn check_threshold(pi_thr: f64) -> Result<()> {
    if pi_thr > 0.5 && pi_thr <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "selection threshold must lie in (0.5, 1], got {pi_thr}"
        )))
    }
}

/// Indices whose score reaches the threshold (ties are selected).
pub fn threshold_scores(scores: &[f64], pi_thr: f64) -> Result<Vec<usize>> {
    check_threshold(pi_thr)?;
    Ok(scores
        .iter()
        .enumerate()
        .filter(|(_, s)| **s >= pi_thr)
        .map(|(j, _)| j)
        .collect())
}

/// `{j : max_λ Π̂_j(λ) ≥ π_thr}`.
pub fn select_features(paths: &SelectionProbabilities, pi_thr: f64) -> Result<Vec<usize>> {
    threshold_scores(&paths.max_pi(), pi_thr)
}

/// Selection set under an arbitrary λ rule.
pub fn select_features_with(
    paths: &SelectionProbabilities,
    pi_thr: f64,
    rule: LambdaRule,
) -> Result<Vec<usize>> {
    threshold_scores(&paths.scores(rule)?, pi_thr)
}

/// Fraction of sets containing each of the `k` features.
pub fn selection_stability(selected_sets: &[Vec<usize>], k: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for set in selected_sets {
        for &j in set.iter().collect::<BTreeSet<_>>() {
            if j < k {
                counts[j] += 1;
            }
        }
    }
    let b = selected_sets.len().max(1) as f64;
    counts.iter().map(|&c| c as f64 / b).collect()
}

/// Bound on the expected number of false selections, `q² / ((2π_thr − 1)·p)`.
pub fn fp_bound(q: f64, p: usize, pi_thr: f64) -> Result<f64> {
    check_threshold(pi_thr)?;
    if !(q >= 0.0) || p == 0 {
        return Err(Error::Config(format!(
            "false-positive bound needs q >= 0 and p >= 1, got q={q}, p={p}"
        )));
    }
    Ok(q * q / ((2.0 * pi_thr - 1.0) * p as f64))
}

/// Selection sets across replicates and the resulting stability scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected_sets: Vec<Vec<usize>>,
    pub ss_scores: Vec<f64>,
    pub pi_thr: f64,
    /// Mean of the per-replicate empirical `q`.
    pub q_hat: f64,
    /// `None` when the bound is infinite.
    pub fp_bound: Option<f64>,
}

impl SelectionResult {
    /// Thresholds every replicate's paths under `rule` and scores each of the
    /// `k` features by how often it is picked.
    pub fn from_paths(
        paths: &[SelectionProbabilities],
        k: usize,
        pi_thr: f64,
        rule: LambdaRule,
    ) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Config(
                "selection needs at least one replicate".into(),
            ));
        }
        let selected_sets = paths
            .iter()
            .map(|p| select_features_with(p, pi_thr, rule))
            .collect::<Result<Vec<_>>>()?;
        let ss_scores = selection_stability(&selected_sets, k);
        let q_hat =
            paths.iter().map(SelectionProbabilities::q_hat).sum::<f64>() / paths.len() as f64;
        let bound = fp_bound(q_hat, k, pi_thr)?;
        Ok(SelectionResult {
            selected_sets,
            ss_scores,
            pi_thr,
            q_hat,
            fp_bound: bound.is_finite().then_some(bound),
        })
    }
}
