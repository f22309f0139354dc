use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{SplitLabel, SplitPlan};
use super::{csv_writer, fmt_f64};
use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::pipeline::dataset::csv_err;
use crate::reduce_align::AlignmentResult;
use crate::stability_select::{
    selection_grid, selection_probabilities, LambdaRule, SelectionConfig, SelectionProbabilities,
    SelectionResult,
};

const STREAM_SELECT: u64 = 0x5345_4c43;

/// Selection frequencies of every replicate on one split's rows, all on a
/// shared λ grid.
#[derive(Debug, Clone)]
pub struct SelectionPaths {
    pub split: SplitLabel,
    pub lambda_grid: Vec<f64>,
    pub n_subsamples: usize,
    /// One entry per replicate; `pi_hat` is `K × G`.
    pub replicates: Vec<SelectionProbabilities>,
}

#[derive(Debug, Clone)]
pub struct SelectionOutput {
    /// Selection sets and scores from the inference rows.
    pub result: SelectionResult,
    /// Grid index each replicate was thresholded at (`None` for the grid maximum).
    pub lambda_index: Vec<Option<usize>>,
    /// Test paths first, then any diagnostic splits.
    pub paths: Vec<SelectionPaths>,
}

/// Stability selection on the aligned coordinates of each replicate. The
/// selection sets use the inference rows `I^C`; with `diagnostics`, train and
/// dev rows (when there are at least 4) get their own paths as well.
pub fn run_selection(
    alignment: &AlignmentResult,
    y: &[f64],
    plan: &SplitPlan,
    cfg: &SelectionConfig,
    seed: u64,
    diagnostics: bool,
) -> Result<SelectionOutput> {
    cfg.validate()?;
    if y.len() != plan.n || alignment.mean.rows() != plan.n {
        return Err(Error::Shape(format!(
            "{} responses and {} aligned rows for a split of {} samples",
            y.len(),
            alignment.mean.rows(),
            plan.n
        )));
    }
    if plan.infer.len() < 4 {
        return Err(Error::Data(format!(
            "selection needs at least 4 inference rows, got {}",
            plan.infer.len()
        )));
    }
    let mut labels = vec![SplitLabel::Test];
    if diagnostics {
        for label in [SplitLabel::Train, SplitLabel::Dev] {
            if plan.rows(label).len() >= 4 {
                labels.push(label);
            } else {
                log::warn!(
                    "skipping {label} diagnostics: only {} rows",
                    plan.rows(label).len()
                );
            }
        }
    }
    let paths = labels
        .iter()
        .map(|&label| split_paths(alignment, y, plan.rows(label), label, cfg, seed))
        .collect::<Result<Vec<_>>>()?;

    let test = &paths[0];
    let k = alignment.mean.cols();
    let result = SelectionResult::from_paths(&test.replicates, k, cfg.pi_thr, cfg.lambda_rule)?;
    let lambda_index = test
        .replicates
        .iter()
        .map(|p| match cfg.lambda_rule {
            LambdaRule::MaxOverGrid => None,
            LambdaRule::MaxVariance => Some(p.max_variance_index()),
            LambdaRule::Index(g) => Some(g),
        })
        .collect();
    Ok(SelectionOutput {
        result,
        lambda_index,
        paths,
    })
}

fn split_paths(
    alignment: &AlignmentResult,
    y: &[f64],
    rows: &[usize],
    label: SplitLabel,
    cfg: &SelectionConfig,
    seed: u64,
) -> Result<SelectionPaths> {
    let y_rows: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let grid = selection_grid(
        &alignment.mean.select_rows(rows),
        &y_rows,
        cfg.n_lambda,
        cfg.lambda_min_ratio,
    )?;
    let replicates = alignment
        .aligned
        .par_iter()
        .enumerate()
        .map(|(b, z)| {
            let rng = RngStream::derive(seed, &[STREAM_SELECT, label.code(), b as u64]);
            selection_probabilities(&z.select_rows(rows), &y_rows, &grid, cfg.n_reps, &rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionPaths {
        split: label,
        lambda_grid: grid,
        n_subsamples: cfg.n_reps,
        replicates,
    })
}

/// Writes `selection_paths.csv` (`replicate,split,feature,lambda,pi_hat`,
/// features numbered from 1): `B·K·G` rows per split.
pub fn write_selection_paths(path: &Path, paths: &[SelectionPaths]) -> Result<usize> {
    let mut w = csv_writer(path)?;
    w.write_record(["replicate", "split", "feature", "lambda", "pi_hat"])
        .map_err(|e| csv_err(path, e))?;
    let mut rows = 0;
    for sp in paths {
        for (b, rep) in sp.replicates.iter().enumerate() {
            for j in 0..rep.n_features() {
                for (g, &lambda) in sp.lambda_grid.iter().enumerate() {
                    let rec = [
                        b.to_string(),
                        sp.split.to_string(),
                        (j + 1).to_string(),
                        fmt_f64(lambda),
                        fmt_f64(rep.pi_hat[(j, g)]),
                    ];
                    w.write_record(&rec).map_err(|e| csv_err(path, e))?;
                    rows += 1;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}

/// Contents of `selection.json`; feature numbers start at 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub pi_thr: f64,
    pub lambda_rule: LambdaRule,
    pub lambda_grid: Vec<f64>,
    pub lambda_index: Vec<Option<usize>>,
    pub n_subsamples: usize,
    pub selected_sets: Vec<Vec<usize>>,
    pub ss_scores: Vec<f64>,
    pub q_hat: f64,
    pub fp_bound: Option<f64>,
}

impl SelectionReport {
    pub fn new(out: &SelectionOutput, cfg: &SelectionConfig) -> Self {
        let r = &out.result;
        SelectionReport {
            pi_thr: r.pi_thr,
            lambda_rule: cfg.lambda_rule,
            lambda_grid: out.paths[0].lambda_grid.clone(),
            lambda_index: out.lambda_index.clone(),
            n_subsamples: out.paths[0].n_subsamples,
            selected_sets: r
                .selected_sets
                .iter()
                .map(|s| s.iter().map(|j| j + 1).collect())
                .collect(),
            ss_scores: r.ss_scores.clone(),
            q_hat: r.q_hat,
            fp_bound: r.fp_bound,
        }
    }
}
