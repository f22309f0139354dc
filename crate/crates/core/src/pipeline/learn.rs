use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::litf::{read_matrix, write_matrix, write_tensor};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};
use crate::rcf::{featurize, sample_patches, Nonlinearity, RcfConfig, RcfModel, Standardization};

const STREAM_LEARN: u64 = 0x4c45_524e;

/// Serializable summary of a fitted replicate (patch weights live in
/// `patches.litf`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub replicate: usize,
    pub n_patches: usize,
    pub patch_size: usize,
    pub channels: usize,
    pub source_ids: Vec<usize>,
    pub nonlinearity: Nonlinearity,
    pub ridge_lambda: f64,
    pub standardization: Option<Standardization>,
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub seed: u64,
    pub stream: u64,
}

impl ModelRecord {
    fn new(replicate: usize, m: &RcfModel) -> Self {
        ModelRecord {
            replicate,
            n_patches: m.patches.len(),
            patch_size: m.patches.size,
            channels: m.patches.channels,
            source_ids: m.patches.source_ids.clone(),
            nonlinearity: m.nonlinearity,
            ridge_lambda: m.ridge_lambda,
            standardization: m.standardization.clone(),
            beta: m.beta.clone(),
            intercept: m.intercept,
            seed: m.seed,
            stream: m.stream,
        }
    }
}

/// One fitted learner per bootstrap replicate and its features for every sample.
#[derive(Debug, Clone)]
pub struct LearnOutput {
    pub models: Vec<RcfModel>,
    /// `Z_b`, `n × L`, rows in dataset order.
    pub features: Vec<Matrix>,
}

pub fn replicate_dir(out_dir: &Path, b: usize) -> PathBuf {
    out_dir.join("replicates").join(format!("b_{b:03}"))
}

/// Fits one learner per bootstrap multiset: patches are cut from, and the
/// ridge head fitted on, the replicate's rows; the learned map is then applied
/// to the whole dataset. Replicate `b` draws from the stream derived from
/// `(seed, b)`, so results do not depend on scheduling. When `out_dir` is set,
/// `patches.litf`, `model.json` and `features.litf` are written per replicate.
pub fn run_feature_learning(
    ds: &Dataset,
    boots: &[Vec<usize>],
    cfg: &RcfConfig,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<LearnOutput> {
    cfg.validate()?;
    let fitted: Vec<(RcfModel, Matrix)> = boots
        .par_iter()
        .enumerate()
        .map(|(b, rows)| fit_replicate(ds, rows, cfg, seed, b).map_err(|e| replicate_error(b, e)))
        .collect::<Result<_>>()?;
    if let Some(dir) = out_dir {
        for (b, (model, z)) in fitted.iter().enumerate() {
            persist_replicate(dir, b, model, z)?;
        }
    }
    let (models, features) = fitted.into_iter().unzip();
    Ok(LearnOutput { models, features })
}

fn fit_replicate(
    ds: &Dataset,
    rows: &[usize],
    cfg: &RcfConfig,
    seed: u64,
    b: usize,
) -> Result<(RcfModel, Matrix)> {
    let mut rng = RngStream::derive(seed, &[STREAM_LEARN, b as u64]);
    let patches = sample_patches(&ds.images, rows, cfg.n_patches, cfg.patch_size, &mut rng)?;
    let z = featurize(&ds.images, &patches, cfg.nonlinearity)?;
    let y_train: Vec<f64> = rows.iter().map(|&i| ds.y[i]).collect();
    let model = RcfModel::fit_features(patches, &z.select_rows(rows), &y_train, cfg, &rng)?;
    Ok((model, z))
}

fn replicate_error(b: usize, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("replicate {b}: {m}")),
        Error::Data(m) => Error::Data(format!("replicate {b}: {m}")),
        Error::Shape(m) => Error::Shape(format!("replicate {b}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("replicate {b}: {m}")),
        other => other,
    }
}

fn persist_replicate(out_dir: &Path, b: usize, model: &RcfModel, z: &Matrix) -> Result<()> {
    let dir = replicate_dir(out_dir, b);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let bank = &model.patches;
    let weights: Vec<f32> = bank.weights.as_slice().iter().map(|&v| v as f32).collect();
    write_tensor(
        &dir.join("patches.litf"),
        &[bank.len(), bank.size, bank.size, bank.channels],
        &weights,
    )?;
    let path = dir.join("model.json");
    let text = serde_json::to_string_pretty(&ModelRecord::new(b, model))
        .map_err(|e| Error::Data(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    write_matrix(&dir.join("features.litf"), z)
}

/// Reads `features.litf` of replicates `0..b` written by a previous run.
pub fn load_features(out_dir: &Path, b: usize) -> Result<Vec<Matrix>> {
    (0..b)
        .map(|r| read_matrix(&replicate_dir(out_dir, r).join("features.litf")))
        .collect()
}

/// Number of consecutive `replicates/b_XXX` directories with features.
pub fn count_replicates(out_dir: &Path) -> usize {
    (0..)
        .take_while(|&b| replicate_dir(out_dir, b).join("features.litf").exists())
        .count()
}
