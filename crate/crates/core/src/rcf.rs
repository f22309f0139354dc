//! Random convolutional features with a ridge regression head.
//!
//! `L` random `s × s × c` patches are cut from training images and used as
//! convolution filters; feature `l` of an image is the spatial mean of its
//! valid-mode correlation with patch `l` (optionally after a ReLU). A ridge
//! regression on column-standardized features maps features to the response.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::numerics::{cholesky_psd, cholesky_solve, dot, mean_sd, Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    None,
    Relu,
}

impl std::str::FromStr for Nonlinearity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Nonlinearity::None),
            "relu" => Ok(Nonlinearity::Relu),
            other => Err(Error::Config(format!(
                "unknown nonlinearity '{other}' (expected none|relu)"
            ))),
        }
    }
}

/// Learner settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcfConfig {
    pub n_patches: usize,
    pub patch_size: usize,
    pub ridge_lambda: f64,
    pub nonlinearity: Nonlinearity,
    /// Standardize feature columns with training statistics before the ridge fit.
    pub standardize: bool,
}

impl Default for RcfConfig {
    fn default() -> Self {
        RcfConfig {
            n_patches: 1048,
            patch_size: 8,
            ridge_lambda: 1.0,
            nonlinearity: Nonlinearity::None,
            standardize: true,
        }
    }
}

impl RcfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_patches == 0 {
            return Err(Error::Config("need at least one patch".into()));
        }
        if self.patch_size == 0 {
            return Err(Error::Config("patch size must be positive".into()));
        }
        if !(self.ridge_lambda > 0.0) || !self.ridge_lambda.is_finite() {
            return Err(Error::Config(format!(
                "ridge lambda must be positive, got {}",
                self.ridge_lambda
            )));
        }
        Ok(())
    }
}

/// `L` filters of shape `s × s × c`, one per row, flattened in `(a, b, ch)`
/// order to match [`ImageTensor`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchBank {
    pub size: usize,
    pub channels: usize,
    pub weights: Matrix,
    /// Dataset index of the image each patch was cut from.
    pub source_ids: Vec<usize>,
}

impl PatchBank {
    pub fn len(&self) -> usize {
        self.weights.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.rows() == 0
    }
}

/// Cuts `n_patches` random `size × size` patches: each from a uniformly chosen
/// member of `subset` (an index multiset into `images`) at a uniformly chosen
/// valid offset.
pub fn sample_patches(
    images: &[ImageTensor],
    subset: &[usize],
    n_patches: usize,
    size: usize,
    rng: &mut RngStream,
) -> Result<PatchBank> {
    if subset.is_empty() {
        return Err(Error::Config(
            "patch sampling needs a non-empty training subset".into(),
        ));
    }
    if n_patches == 0 {
        return Err(Error::Config("need at least one patch".into()));
    }
    let first = images
        .get(subset[0])
        .ok_or_else(|| Error::Data(format!("image index {} out of range", subset[0])))?;
    let [w, h, c] = first.shape();
    if size == 0 || size > w || size > h {
        return Err(Error::Config(format!(
            "patch size {size} does not fit {w}x{h} images"
        )));
    }
    let mut weights = Matrix::zeros(n_patches, size * size * c);
    let mut source_ids = Vec::with_capacity(n_patches);
    for l in 0..n_patches {
        let id = subset[rng.index(subset.len())];
        let img = images
            .get(id)
            .ok_or_else(|| Error::Data(format!("image index {id} out of range")))?;
        if img.shape() != [w, h, c] {
            return Err(Error::Shape(format!(
                "image {id} has shape {:?}, expected {:?}",
                img.shape(),
                [w, h, c]
            )));
        }
        let du = rng.index(w - size + 1);
        let dv = rng.index(h - size + 1);
        let row = weights.row_mut(l);
        let mut k = 0;
        for a in 0..size {
            for b in 0..size {
                for ch in 0..c {
                    row[k] = img.get(du + a, dv + b, ch) as f64;
                    k += 1;
                }
            }
        }
        source_ids.push(id);
    }
    Ok(PatchBank {
        size,
        channels: c,
        weights,
        source_ids,
    })
}

/// Features of every image: an `n × L` matrix whose row `i` belongs to image `i`.
pub fn featurize(
    images: &[ImageTensor],
    bank: &PatchBank,
    nonlinearity: Nonlinearity,
) -> Result<Matrix> {
    for (i, img) in images.iter().enumerate() {
        if img.channels() != bank.channels {
            return Err(Error::Shape(format!(
                "image {i} has {} channels, patches have {}",
                img.channels(),
                bank.channels
            )));
        }
        if img.width() < bank.size || img.height() < bank.size {
            return Err(Error::Shape(format!(
                "image {i} is smaller than the {0}x{0} patches",
                bank.size
            )));
        }
    }
    let rows: Vec<Vec<f64>> = images
        .par_iter()
        .map(|img| match nonlinearity {
            Nonlinearity::None => featurize_linear(img, bank),
            Nonlinearity::Relu => featurize_relu(img, bank),
        })
        .collect();
    let l = bank.len();
    let mut out = Matrix::zeros(images.len(), l);
    for (i, r) in rows.into_iter().enumerate() {
        out.row_mut(i).copy_from_slice(&r);
    }
    Ok(out)
}

/// Without a nonlinearity the averaged correlation equals the inner product of
/// each patch with the mean window, which box sums give directly.
fn featurize_linear(img: &ImageTensor, bank: &PatchBank) -> Vec<f64> {
    let [w, h, c] = img.shape();
    let s = bank.size;
    let (pw, ph) = (w - s + 1, h - s + 1);
    // prefix[(u*(h+1) + v)*c + ch] = sum over [0,u) x [0,v)
    let stride = h + 1;
    let mut prefix = vec![0.0f64; (w + 1) * (h + 1) * c];
    for u in 0..w {
        for v in 0..h {
            for ch in 0..c {
                let val = img.get(u, v, ch) as f64;
                prefix[((u + 1) * stride + v + 1) * c + ch] = val
                    + prefix[(u * stride + v + 1) * c + ch]
                    + prefix[((u + 1) * stride + v) * c + ch]
                    - prefix[(u * stride + v) * c + ch];
            }
        }
    }
    let count = (pw * ph) as f64;
    let mut mean_window = vec![0.0; s * s * c];
    for a in 0..s {
        for b in 0..s {
            for ch in 0..c {
                let (u0, u1, v0, v1) = (a, a + pw, b, b + ph);
                let sum = prefix[(u1 * stride + v1) * c + ch]
                    - prefix[(u0 * stride + v1) * c + ch]
                    - prefix[(u1 * stride + v0) * c + ch]
                    + prefix[(u0 * stride + v0) * c + ch];
                mean_window[(a * s + b) * c + ch] = sum / count;
            }
        }
    }
    (0..bank.len())
        .map(|l| dot(bank.weights.row(l), &mean_window))
        .collect()
}

fn featurize_relu(img: &ImageTensor, bank: &PatchBank) -> Vec<f64> {
    let [w, h, c] = img.shape();
    let s = bank.size;
    let (pw, ph) = (w - s + 1, h - s + 1);
    let pixels: Vec<f64> = img.as_slice().iter().map(|&v| v as f64).collect();
    let mut window = vec![0.0; s * s * c];
    let mut acc = vec![0.0; bank.len()];
    for du in 0..pw {
        for dv in 0..ph {
            for a in 0..s {
                let src = ((du + a) * h + dv) * c;
                window[a * s * c..(a + 1) * s * c].copy_from_slice(&pixels[src..src + s * c]);
            }
            for (l, z) in acc.iter_mut().enumerate() {
                *z += dot(bank.weights.row(l), &window).max(0.0);
            }
        }
    }
    let count = (pw * ph) as f64;
    acc.iter().map(|z| z / count).collect()
}

/// Solves `(ZᵀZ + λI) β = Zᵀy` by Cholesky.
pub fn ridge_fit(z: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if z.rows() != y.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} responses",
            z.rows(),
            y.len()
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!(
            "ridge lambda must be positive, got {lambda}"
        )));
    }
    let mut gram = z.t_matmul(z);
    for j in 0..gram.rows() {
        gram[(j, j)] += lambda;
    }
    let rhs = z.t_matvec(y);
    let (l, _) = cholesky_psd(&gram, 0.0)?;
    Ok(cholesky_solve(&l, &rhs))
}

/// Per-column affine standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    /// Column means and SDs; zero-variance columns get SD 1.
    pub fn fit(z: &Matrix) -> Self {
        let mut mean = Vec::with_capacity(z.cols());
        let mut sd = Vec::with_capacity(z.cols());
        for j in 0..z.cols() {
            let (m, s) = mean_sd(&z.col(j));
            mean.push(m);
            sd.push(if s > 1e-12 * m.abs().max(1.0) { s } else { 1.0 });
        }
        Standardization { mean, sd }
    }

    pub fn apply(&self, z: &Matrix) -> Matrix {
        let mut out = z.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.sd) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

/// A fitted random-convolutional-features regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct RcfModel {
    pub patches: PatchBank,
    pub nonlinearity: Nonlinearity,
    pub ridge_lambda: f64,
    pub standardization: Option<Standardization>,
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub seed: u64,
    pub stream: u64,
}

impl RcfModel {
    /// Fits the ridge head on precomputed training features (rows may repeat).
    pub fn fit_features(
        patches: PatchBank,
        train_features: &Matrix,
        y_train: &[f64],
        cfg: &RcfConfig,
        rng: &RngStream,
    ) -> Result<Self> {
        cfg.validate()?;
        if train_features.cols() != patches.len() {
            return Err(Error::Shape(
                "feature columns must match the patch count".into(),
            ));
        }
        if train_features.rows() == 0 || train_features.rows() != y_train.len() {
            return Err(Error::Shape(
                "training features and responses must be non-empty and aligned".into(),
            ));
        }
        let (standardization, design) = if cfg.standardize {
            let st = Standardization::fit(train_features);
            let d = st.apply(train_features);
            (Some(st), d)
        } else {
            (None, train_features.clone())
        };
        let (intercept, yc) = if cfg.standardize {
            let m = y_train.iter().sum::<f64>() / y_train.len() as f64;
            (m, y_train.iter().map(|v| v - m).collect::<Vec<_>>())
        } else {
            (0.0, y_train.to_vec())
        };
        let beta = ridge_fit(&design, &yc, cfg.ridge_lambda)?;
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numerical("ridge coefficients are not finite".into()));
        }
        Ok(RcfModel {
            patches,
            nonlinearity: cfg.nonlinearity,
            ridge_lambda: cfg.ridge_lambda,
            standardization,
            beta,
            intercept,
            seed: rng.master_seed(),
            stream: rng.stream_id(),
        })
    }

    /// Samples patches from `train` (an index multiset into `images`) and fits
    /// the ridge head on the same rows.
    pub fn fit(
        images: &[ImageTensor],
        y: &[f64],
        train: &[usize],
        cfg: &RcfConfig,
        rng: &mut RngStream,
    ) -> Result<Self> {
        cfg.validate()?;
        let patches = sample_patches(images, train, cfg.n_patches, cfg.patch_size, rng)?;
        let mut unique: Vec<usize> = train.to_vec();
        unique.sort_unstable();
        unique.dedup();
        let subset: Vec<ImageTensor> = unique.iter().map(|&i| images[i].clone()).collect();
        let z_unique = featurize(&subset, &patches, cfg.nonlinearity)?;
        let pos = |i: usize| unique.binary_search(&i).expect("index present");
        let rows: Vec<usize> = train.iter().map(|&i| pos(i)).collect();
        let z_train = z_unique.select_rows(&rows);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        RcfModel::fit_features(patches, &z_train, &y_train, cfg, rng)
    }

    pub fn featurize(&self, images: &[ImageTensor]) -> Result<Matrix> {
        featurize(images, &self.patches, self.nonlinearity)
    }

    /// Predictions from already computed (raw) features.
    pub fn predict_features(&self, z: &Matrix) -> Result<Vec<f64>> {
        if z.cols() != self.beta.len() {
            return Err(Error::Shape(
                "feature width does not match the model".into(),
            ));
        }
        let design = match &self.standardization {
            Some(st) => st.apply(z),
            None => z.clone(),
        };
        Ok(design
            .matvec(&self.beta)
            .into_iter()
            .map(|v| v + self.intercept)
            .collect())
    }
}

/// Featurizes `images` with the model's patches and applies the ridge head.
pub fn ridge_predict(model: &RcfModel, images: &[ImageTensor]) -> Result<Vec<f64>> {
    model.predict_features(&model.featurize(images)?)
}

pub fn mse(pred: &[f64], y: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    pred.iter()
        .zip(y)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / y.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize, c: usize, shift: f32) -> ImageTensor {
        let data = (0..w * h * c)
            .map(|k| (k as f32 * 0.37 + shift).sin())
            .collect();
        ImageTensor::from_vec(w, h, c, data).unwrap()
    }

    #[test]
    fn patch_size_must_fit() {
        let imgs = vec![ImageTensor::zeros(8, 8, 1)];
        let mut rng = RngStream::new(0, 0);
        assert!(sample_patches(&imgs, &[0], 4, 9, &mut rng).is_err());
        assert!(sample_patches(&imgs, &[], 4, 2, &mut rng).is_err());
    }

    #[test]
    fn zero_images_give_zero_patches_and_features() {
        let imgs = vec![ImageTensor::zeros(10, 10, 3); 3];
        let bank = sample_patches(&imgs, &[0, 1, 2], 16, 4, &mut RngStream::new(1, 2)).unwrap();
        assert!(bank.weights.as_slice().iter().all(|&v| v == 0.0));
        let other = sample_patches(
            &[ramp(10, 10, 3, 0.0)],
            &[0],
            16,
            4,
            &mut RngStream::new(1, 2),
        )
        .unwrap();
        for mode in [Nonlinearity::None, Nonlinearity::Relu] {
            let z = featurize(&imgs, &other, mode).unwrap();
            assert!(z.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn constant_image_features_are_scaled_patch_sums() {
        let src = vec![ramp(12, 9, 2, 0.3)];
        let bank = sample_patches(&src, &[0], 5, 3, &mut RngStream::new(9, 9)).unwrap();
        let gamma = 0.75f32;
        let z = featurize(
            &[ImageTensor::filled(12, 9, 2, gamma)],
            &bank,
            Nonlinearity::None,
        )
        .unwrap();
        for l in 0..5 {
            let expected = gamma as f64 * bank.weights.row(l).iter().sum::<f64>();
            assert!((z[(0, l)] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_pixel_patch_gives_mean_pixel() {
        let bank = PatchBank {
            size: 1,
            channels: 1,
            weights: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            source_ids: vec![0],
        };
        let img = ramp(7, 5, 1, 1.0);
        let mean = img.as_slice().iter().map(|&v| v as f64).sum::<f64>() / 35.0;
        let z = featurize(&[img], &bank, Nonlinearity::None).unwrap();
        assert!((z[(0, 0)] - mean).abs() < 1e-12);
    }

    #[test]
    fn linear_path_matches_direct_convolution() {
        let src = vec![ramp(9, 11, 2, 0.1)];
        let bank = sample_patches(&src, &[0], 6, 4, &mut RngStream::new(4, 4)).unwrap();
        let img = ramp(9, 11, 2, 2.0);
        let fast = featurize_linear(&img, &bank);
        // Direct correlation and averaging without the box-sum shortcut.
        let (pw, ph) = (6, 8);
        for l in 0..6 {
            let mut acc = 0.0;
            for du in 0..pw {
                for dv in 0..ph {
                    let mut s = 0.0;
                    for a in 0..4 {
                        for b in 0..4 {
                            for ch in 0..2 {
                                s += bank.weights.row(l)[(a * 4 + b) * 2 + ch]
                                    * img.get(du + a, dv + b, ch) as f64;
                            }
                        }
                    }
                    acc += s;
                }
            }
            assert!((fast[l] - acc / (pw * ph) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let bank =
            sample_patches(&[ramp(8, 8, 3, 0.0)], &[0], 2, 2, &mut RngStream::new(0, 0)).unwrap();
        assert!(matches!(
            featurize(&[ramp(8, 8, 1, 0.0)], &bank, Nonlinearity::None),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn ridge_shrinks_under_huge_penalty() {
        let z = Matrix::from_fn(10, 3, |i, j| ((i * 3 + j) as f64).cos());
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let beta = ridge_fit(&z, &y, 1e12).unwrap();
        assert!(beta.iter().map(|b| b * b).sum::<f64>().sqrt() <= 1e-6);
        assert!(ridge_fit(&z, &y, 0.0).is_err());
        assert!(ridge_fit(&z, &y[..9], 1.0).is_err());
    }

    #[test]
    fn ridge_orthonormal_design() {
        // columns of a scaled Hadamard matrix are orthonormal
        let h = [
            [1.0, 1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0, -1.0],
            [1.0, 1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0, 1.0],
        ];
        let z = Matrix::from_fn(4, 3, |i, j| h[i][j] / 2.0);
        let y = [0.3, -1.2, 2.0, 0.7];
        let beta = ridge_fit(&z, &y, 1e-10).unwrap();
        let zty = z.t_matvec(&y);
        for (b, e) in beta.iter().zip(&zty) {
            assert!((b - e).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_image_predicts_zero_without_standardization() {
        let imgs: Vec<ImageTensor> = (0..6).map(|i| ramp(8, 8, 1, i as f32)).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let cfg = RcfConfig {
            n_patches: 4,
            patch_size: 3,
            standardize: false,
            ..RcfConfig::default()
        };
        let model = RcfModel::fit(
            &imgs,
            &y,
            &[0, 1, 2, 3, 3, 5],
            &cfg,
            &mut RngStream::new(2, 2),
        )
        .unwrap();
        let p = ridge_predict(&model, &[ImageTensor::zeros(8, 8, 1)]).unwrap();
        assert_eq!(p, vec![0.0]);
        assert_eq!(
            ridge_predict(&model, &imgs).unwrap(),
            ridge_predict(&model, &imgs).unwrap()
        );
    }
}
