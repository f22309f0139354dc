use std::path::Path;

use super::dataset::Dataset;
use super::split::{SplitLabel, SplitPlan};
use super::{csv_writer, fmt_f64};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::pipeline::dataset::csv_err;
use crate::rcf::{mse, ridge_fit};

/// Ridge penalty of the pixel-mean baseline; small enough to leave a
/// realizable linear target essentially unbiased.
pub const BASELINE_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub replicate: usize,
    pub split: SplitLabel,
    pub n: usize,
    pub mse: f64,
}

/// Per-channel mean pixel values, `n × c`.
pub fn channel_mean_features(ds: &Dataset) -> Matrix {
    let rows: Vec<Vec<f64>> = ds.images.iter().map(|img| img.channel_means()).collect();
    Matrix::from_rows(&rows).expect("uniform image shapes")
}

/// Linear fit `y ≈ a + xᵀw` on rows `train` (repeats allowed).
pub fn fit_linear(x: &Matrix, y: &[f64], train: &[usize], lambda: f64) -> Result<(f64, Vec<f64>)> {
    if train.is_empty() {
        return Err(Error::Data(
            "baseline regression needs training rows".into(),
        ));
    }
    let (xc, means) = x.select_rows(train).center_cols();
    let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let ym = yt.iter().sum::<f64>() / yt.len() as f64;
    let yc: Vec<f64> = yt.iter().map(|v| v - ym).collect();
    let w = ridge_fit(&xc, &yc, lambda)?;
    let a = ym - means.iter().zip(&w).map(|(m, b)| m * b).sum::<f64>();
    Ok((a, w))
}

/// Ridge regression of `y` on per-channel pixel means, fitted on each
/// bootstrap multiset and scored on every non-empty split.
pub fn baseline_pixel_regression(
    ds: &Dataset,
    plan: &SplitPlan,
    boots: &[Vec<usize>],
) -> Result<Vec<MseRow>> {
    let x = channel_mean_features(ds);
    let mut out = Vec::new();
    for (b, rows) in boots.iter().enumerate() {
        let (a, w) = fit_linear(&x, &ds.y, rows, BASELINE_RIDGE)?;
        for label in SplitLabel::ALL {
            let idx = plan.rows(label);
            if idx.is_empty() {
                continue;
            }
            let pred: Vec<f64> = idx
                .iter()
                .map(|&i| a + x.row(i).iter().zip(&w).map(|(v, c)| v * c).sum::<f64>())
                .collect();
            let truth: Vec<f64> = idx.iter().map(|&i| ds.y[i]).collect();
            out.push(MseRow {
                replicate: b,
                split: label,
                n: idx.len(),
                mse: mse(&pred, &truth),
            });
        }
    }
    Ok(out)
}

/// Writes `baseline_mse.csv` (`replicate,split,n,mse`).
pub fn write_baseline(path: &Path, rows: &[MseRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["replicate", "split", "n", "mse"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        let rec = [
            r.replicate.to_string(),
            r.split.to_string(),
            r.n.to_string(),
            fmt_f64(r.mse),
        ];
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ImageTensor;
    use crate::numerics::RngStream;
    use crate::pipeline::dataset::Provenance;
    use crate::pipeline::split::{bootstrap_indices, split_samples, SplitConfig};

    fn dataset(linear: bool) -> Dataset {
        let mut rng = RngStream::new(6, 0);
        let images: Vec<ImageTensor> = (0..40)
            .map(|_| {
                let data = (0..4 * 4 * 3)
                    .map(|_| (rng.uniform() < 0.3) as u8 as f32)
                    .collect();
                ImageTensor::from_vec(4, 4, 3, data).unwrap()
            })
            .collect();
        let y = images
            .iter()
            .map(|img| {
                let m = img.channel_means();
                if linear {
                    1.0 + 2.0 * m[0] - 3.0 * m[1] + 0.5 * m[2]
                } else {
                    4.0
                }
            })
            .collect();
        Dataset::new(
            images,
            y,
            None,
            Provenance {
                seed: None,
                generator: "toy".into(),
                config: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn realizable_target_is_fitted() {
        let ds = dataset(true);
        let plan = split_samples(40, &SplitConfig::default()).unwrap();
        let boots = bootstrap_indices(&plan, 3, 2).unwrap();
        let rows = baseline_pixel_regression(&ds, &plan, &boots).unwrap();
        assert_eq!(rows.len(), 3 * 3);
        assert!(rows.iter().all(|r| r.mse <= 1e-10), "{rows:?}");
    }

    #[test]
    fn constant_response_has_zero_error() {
        let ds = dataset(false);
        let plan = split_samples(40, &SplitConfig::default()).unwrap();
        let rows = baseline_pixel_regression(&ds, &plan, std::slice::from_ref(&plan.train)).unwrap();
        assert!(rows.iter().all(|r| r.mse < 1e-20));
    }
}
