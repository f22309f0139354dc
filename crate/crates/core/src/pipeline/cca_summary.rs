use std::path::Path;

use super::dataset::Dataset;
use super::split::{SplitLabel, SplitPlan};
use super::{csv_writer, fmt_f64};
use crate::error::{Error, Result};
use crate::numerics::{mean_sd, Matrix};
use crate::pipeline::dataset::csv_err;
use crate::reduce_align::{cca, AlignmentResult, CcaRidge};

/// One canonical correlation of one replicate on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaRow {
    pub replicate: usize,
    pub split: SplitLabel,
    /// 1-based.
    pub component: usize,
    pub correlation: f64,
}

/// Source-feature columns of `ds` as a standardized matrix, restricted to
/// `columns` (by name) when given.
pub fn source_block(ds: &Dataset, columns: Option<&[String]>) -> Result<Matrix> {
    let (names, m) = ds.source_matrix().ok_or_else(|| {
        Error::Data(
            "dataset has no source features; canonical correlations need a simulated dataset"
                .into(),
        )
    })?;
    let idx: Vec<usize> = match columns {
        None => (0..names.len()).collect(),
        Some(cols) => cols
            .iter()
            .map(|c| {
                names.iter().position(|n| n == c).ok_or_else(|| {
                    Error::Config(format!(
                        "unknown source column '{c}' (available: {})",
                        names.join(", ")
                    ))
                })
            })
            .collect::<Result<_>>()?,
    };
    let mut out = m.select_cols(&idx);
    for j in 0..out.cols() {
        let (mean, sd) = mean_sd(&out.col(j));
        let s = if sd > 0.0 { sd } else { 1.0 };
        for i in 0..out.rows() {
            out[(i, j)] = (out[(i, j)] - mean) / s;
        }
    }
    Ok(out)
}

/// Canonical correlations between each `Z̄_b` and the source block on every
/// split with more rows than either block has columns.
pub fn run_cca_summary(
    alignment: &AlignmentResult,
    sources: &Matrix,
    plan: &SplitPlan,
) -> Result<Vec<CcaRow>> {
    if sources.rows() != plan.n || alignment.mean.rows() != plan.n {
        return Err(Error::Shape(
            "source block, aligned features and split plan disagree on n".into(),
        ));
    }
    let k = alignment.mean.cols().min(sources.cols());
    let mut out = Vec::new();
    for label in SplitLabel::ALL {
        let rows = plan.rows(label);
        if rows.len() <= alignment.mean.cols().max(sources.cols()) {
            log::warn!(
                "skipping canonical correlations on {label}: only {} rows",
                rows.len()
            );
            continue;
        }
        let s = sources.select_rows(rows);
        for (b, z) in alignment.aligned.iter().enumerate() {
            let res = cca(&z.select_rows(rows), &s, k, CcaRidge::Auto)?;
            out.extend(res.correlations.iter().enumerate().map(|(c, &r)| CcaRow {
                replicate: b,
                split: label,
                component: c + 1,
                correlation: r,
            }));
        }
    }
    Ok(out)
}

/// Writes `cca_summary.csv` (`replicate,split,component,correlation`).
pub fn write_cca_summary(path: &Path, rows: &[CcaRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["replicate", "split", "component", "correlation"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        let rec = [
            r.replicate.to_string(),
            r.split.to_string(),
            r.component.to_string(),
            fmt_f64(r.correlation),
        ];
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::pipeline::split::{split_samples, SplitConfig};
    use crate::reduce_align::generalized_procrustes;

    #[test]
    fn features_equal_to_sources_correlate_perfectly() {
        let mut rng = RngStream::new(4, 4);
        let src = Matrix::from_fn(80, 3, |_, _| rng.standard_normal())
            .center_cols()
            .0;
        let al = generalized_procrustes(&[src.clone(), src.clone()]).unwrap();
        let plan = split_samples(80, &SplitConfig::default()).unwrap();
        let rows = run_cca_summary(&al, &src, &plan).unwrap();
        assert_eq!(rows.len(), 3 * 2 * 3);
        assert!(rows.iter().all(|r| (r.correlation - 1.0).abs() < 1e-6));
    }
}
