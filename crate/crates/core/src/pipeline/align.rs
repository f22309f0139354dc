use std::path::Path;

use serde::{Deserialize, Serialize};

use super::learn::replicate_dir;
use super::litf::write_matrix;
use super::split::SplitPlan;
use super::{csv_reader, csv_writer, fmt_f64, write_json};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::pipeline::dataset::csv_err;
use crate::reduce_align::{
    generalized_procrustes, pca_reduce, sca_reduce, AlignmentResult, ReducedFeatures, Reduction,
};

/// Reduction settings for Procrustes alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub k: usize,
    pub reduction: Reduction,
    /// ℓ₁ budget for SCA loadings; defaults to `K·√(L)/2` when unset.
    pub gamma: Option<f64>,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            k: 10,
            reduction: Reduction::Pca,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlignOutput {
    pub reduced: Vec<ReducedFeatures>,
    pub alignment: AlignmentResult,
}

/// Reduces every `Z_b` to `K` dimensions and aligns the reductions.
pub fn run_alignment(features: &[Matrix], cfg: &AlignConfig) -> Result<AlignOutput> {
    if features.len() < 2 {
        return Err(Error::Config(format!(
            "alignment needs B >= 2 replicates, got {}",
            features.len()
        )));
    }
    let reduced = features
        .iter()
        .map(|z| match cfg.reduction {
            Reduction::Pca => pca_reduce(z, cfg.k),
            Reduction::Sca => {
                let gamma = cfg
                    .gamma
                    .unwrap_or(cfg.k as f64 * (z.cols() as f64).sqrt() / 2.0);
                sca_reduce(z, cfg.k, gamma.max(cfg.k as f64))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<Matrix> = reduced.iter().map(|r| r.scores.clone()).collect();
    let alignment = generalized_procrustes(&scores)?;
    Ok(AlignOutput { reduced, alignment })
}

/// JSON side of a persisted alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub fss: f64,
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
    /// `K × K` rotation per replicate, as rows.
    pub rotations: Vec<Vec<Vec<f64>>>,
}

/// Persists an alignment under `out_dir`: `replicates/b_XXX/aligned.litf` for
/// each `Z̄_b`, `consensus_mean.litf` for `M` and `alignment.json`.
pub fn write_alignment(out_dir: &Path, alignment: &AlignmentResult) -> Result<()> {
    for (b, z) in alignment.aligned.iter().enumerate() {
        let dir = replicate_dir(out_dir, b);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_matrix(&dir.join("aligned.litf"), z)?;
    }
    write_matrix(&out_dir.join("consensus_mean.litf"), &alignment.mean)?;
    let record = AlignmentRecord {
        fss: alignment.fss,
        objective_trace: alignment.objective_trace.clone(),
        sweeps: alignment.sweeps,
        rotations: alignment.rotations.iter().map(Matrix::to_rows).collect(),
    };
    write_json(&out_dir.join("alignment.json"), &record)
}

/// Writes `embeddings.csv` (`sample,replicate,split,k1..kK`): one row per
/// sample and replicate (replicate `0..B-1`), then one row per sample for the
/// consensus mean (replicate `mean`).
pub fn write_embeddings(
    path: &Path,
    alignment: &AlignmentResult,
    plan: &SplitPlan,
) -> Result<usize> {
    let labels = plan.labels();
    let k = alignment.mean.cols();
    let mut w = csv_writer(path)?;
    let mut header = vec!["sample".to_string(), "replicate".into(), "split".into()];
    header.extend((1..=k).map(|j| format!("k{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let mut rows = 0;
    let blocks = alignment
        .aligned
        .iter()
        .enumerate()
        .map(|(b, m)| (b.to_string(), m));
    for (tag, m) in blocks.chain(std::iter::once(("mean".to_string(), &alignment.mean))) {
        if m.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "aligned matrix has {} rows, split plan has {}",
                m.rows(),
                labels.len()
            )));
        }
        for i in 0..m.rows() {
            let mut rec = vec![i.to_string(), tag.clone(), labels[i].to_string()];
            rec.extend(m.row(i).iter().map(|&v| fmt_f64(v)));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
            rows += 1;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}

/// Reads `embeddings.csv` back into per-replicate aligned matrices and the
/// consensus mean (rotations are not stored and come back empty).
pub fn read_embeddings(path: &Path) -> Result<AlignmentResult> {
    let mut rdr = csv_reader(path)?;
    let k = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .len()
        .saturating_sub(3);
    if k == 0 {
        return Err(Error::format(path, "no embedding columns"));
    }
    let mut blocks: Vec<(String, Vec<f64>)> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let tag = rec.get(1).unwrap_or_default().to_string();
        let vals = rec
            .iter()
            .skip(3)
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("row {row}: {e}")))?;
        if vals.len() != k {
            return Err(Error::format(
                path,
                format!("row {row} has {} values, expected {k}", vals.len()),
            ));
        }
        match blocks.last_mut() {
            Some((t, data)) if *t == tag => data.extend(vals),
            _ => blocks.push((tag, vals)),
        }
    }
    let (mean_tag, mean_data) = blocks.pop().ok_or_else(|| Error::format(path, "no rows"))?;
    if mean_tag != "mean" {
        return Err(Error::format(
            path,
            "last block must hold the consensus mean",
        ));
    }
    let n = mean_data.len() / k;
    let mean = Matrix::from_vec(n, k, mean_data)?;
    let aligned = blocks
        .into_iter()
        .map(|(_, d)| {
            if d.len() != n * k {
                return Err(Error::format(path, "replicate blocks differ in size"));
            }
            Matrix::from_vec(n, k, d)
        })
        .collect::<Result<Vec<_>>>()?;
    let obj: f64 = aligned.iter().map(|a| a.sub(&mean).frobenius_sq()).sum();
    let fss = obj / aligned.len().max(1) as f64;
    Ok(AlignmentResult {
        mean,
        rotations: Vec::new(),
        aligned,
        fss,
        objective_trace: vec![obj],
        sweeps: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::pipeline::split::{split_samples, SplitConfig};

    #[test]
    fn identical_features_have_zero_fss() {
        let mut rng = RngStream::new(1, 1);
        let z = Matrix::from_fn(30, 8, |_, _| rng.standard_normal());
        let out = run_alignment(
            &[z.clone(), z.clone(), z],
            &AlignConfig {
                k: 3,
                ..AlignConfig::default()
            },
        )
        .unwrap();
        assert!(out.alignment.fss <= 1e-12);
        assert!(out.alignment.aligned.iter().all(|a| a.shape() == (30, 3)));
    }

    #[test]
    fn embedding_row_count() {
        let mut rng = RngStream::new(2, 1);
        let zs: Vec<Matrix> = (0..3)
            .map(|_| Matrix::from_fn(20, 6, |_, _| rng.standard_normal()))
            .collect();
        let out = run_alignment(
            &zs,
            &AlignConfig {
                k: 2,
                ..AlignConfig::default()
            },
        )
        .unwrap();
        let plan = split_samples(20, &SplitConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rows = write_embeddings(&dir.path().join("e.csv"), &out.alignment, &plan).unwrap();
        assert_eq!(rows, 20 * 3 + 20);
        let back = read_embeddings(&dir.path().join("e.csv")).unwrap();
        assert_eq!(back.aligned, out.alignment.aligned);
        assert_eq!(back.mean, out.alignment.mean);

        write_alignment(dir.path(), &out.alignment).unwrap();
        assert!(dir.path().join("replicates/b_002/aligned.litf").exists());
        let record: AlignmentRecord =
            super::super::read_json(&dir.path().join("alignment.json")).unwrap();
        assert_eq!(record.rotations.len(), 3);
        assert_eq!(record.rotations[0].len(), 2);
    }
}
