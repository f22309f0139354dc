//! Marked log Cox Matérn process images with known latent source features.
//!
//! Each simulated image draws a parameter vector ([`SourceFeatures`]) uniformly
//! from configured ranges, builds a baseline intensity `Λ = exp(GP)` and `R`
//! relative class intensities `B_r = exp(β_r + GP)`, samples a fixed number of
//! cells from `Λ`, labels them by tempered relative intensity, gives each a
//! Gamma-distributed radius and rasterizes the discs into one binary channel
//! per class. The response is a noiseless weighted sum of the standardized
//! source features.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::numerics::{cholesky_psd, mean_sd, Matrix, RngStream};
use crate::pipeline::dataset::{Dataset, Provenance};

/// Default cap on grid points per simulated field (a 64×64 grid).
pub const DEFAULT_FIELD_CAP: usize = 4096;
/// Lower clamp applied to roughness and bandwidth draws.
pub const MIN_ROUGHNESS: f64 = 0.05;
pub const MIN_BANDWIDTH: f64 = 0.05;
const MAX_ROUGHNESS: f64 = 10.0;
/// Gamma shape for cell radii.
const RADIUS_SHAPE: f64 = 5.0;
const STREAM_SIM_IMAGE: u64 = 0x5349_4d00;

/// Matérn covariance parameters: variance, roughness `ν` and bandwidth `α`
/// (in grid units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub sigma2: f64,
    pub nu: f64,
    pub alpha: f64,
}

impl MaternParams {
    pub fn new(sigma2: f64, nu: f64, alpha: f64) -> Result<Self> {
        let p = MaternParams { sigma2, nu, alpha };
        p.validate()?;
        Ok(p)
    }

    /// Unit-variance parameters with roughness and bandwidth clamped to their
    /// lower limits.
    pub fn clamped(nu: f64, alpha: f64) -> Self {
        MaternParams {
            sigma2: 1.0,
            nu: nu.clamp(MIN_ROUGHNESS, MAX_ROUGHNESS),
            alpha: alpha.max(MIN_BANDWIDTH),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config(format!(
                "Matérn variance must be positive, got {}",
                self.sigma2
            )));
        }
        if !(MIN_ROUGHNESS..=MAX_ROUGHNESS).contains(&self.nu) {
            return Err(Error::Config(format!(
                "Matérn roughness must lie in [0.05, 10], got {}",
                self.nu
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "Matérn bandwidth must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Matérn covariance at distance `d`:
/// `σ² 2^{1−ν}/Γ(ν) · t^ν K_ν(t)` with `t = √(2ν)·d/α`.
pub fn matern_cov(d: f64, p: &MaternParams) -> f64 {
    if d <= 0.0 {
        return p.sigma2;
    }
    let t = (2.0 * p.nu).sqrt() * d / p.alpha;
    let k = match crate::numerics::bessel_k(p.nu, t) {
        Ok(k) => k,
        Err(_) => return 0.0,
    };
    if k == 0.0 {
        return 0.0;
    }
    let log_c = (1.0 - p.nu) * std::f64::consts::LN_2 - ln_gamma(p.nu) + p.nu * t.ln() + k.ln();
    (p.sigma2 * log_c.exp()).min(p.sigma2)
}

/// Gaussian field sampler on a `w × h` pixel grid; holds the Cholesky factor so
/// repeated draws with the same parameters are cheap.
#[derive(Debug, Clone)]
pub struct GpSampler {
    width: usize,
    height: usize,
    factor: Matrix,
    jitter: f64,
}

impl GpSampler {
    pub fn new(width: usize, height: usize, params: &MaternParams, cap: usize) -> Result<Self> {
        params.validate()?;
        let n = width * height;
        if n == 0 {
            return Err(Error::Config("field grid must be non-empty".into()));
        }
        if n > cap {
            return Err(Error::Config(format!(
                "{width}x{height} field has {n} points, above the dense-sampling cap of {cap}"
            )));
        }
        // Covariance depends only on the lag (|du|, |dv|).
        let mut lag_cov = vec![0.0; n];
        for du in 0..width {
            for dv in 0..height {
                lag_cov[du * height + dv] = matern_cov(((du * du + dv * dv) as f64).sqrt(), params);
            }
        }
        let cov = Matrix::from_fn(n, n, |a, b| {
            let du = (a / height).abs_diff(b / height);
            let dv = (a % height).abs_diff(b % height);
            lag_cov[du * height + dv]
        });
        let (factor, jitter) = cholesky_psd(&cov, 1e-8 * params.sigma2)?;
        Ok(GpSampler {
            width,
            height,
            factor,
            jitter,
        })
    }

    /// Jitter added to the covariance diagonal for a successful factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// One mean-zero field, returned as a `w × h` matrix.
    pub fn sample(&self, rng: &mut RngStream) -> Matrix {
        let n = self.width * self.height;
        let z: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let mut values = vec![0.0; n];
        for (i, out) in values.iter_mut().enumerate() {
            *out = crate::numerics::dot(&self.factor.row(i)[..=i], &z[..=i]);
        }
        Matrix::from_vec(self.width, self.height, values).expect("sized above")
    }
}

/// Mean-zero Gaussian field with Matérn covariance on a `w × h` grid.
pub fn simulate_gp_field(
    width: usize,
    height: usize,
    params: &MaternParams,
    cap: usize,
    rng: &mut RngStream,
) -> Result<Matrix> {
    Ok(GpSampler::new(width, height, params, cap)?.sample(rng))
}

/// Per-image latent parameters and response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFeatures {
    pub n_cells: usize,
    pub nu_lambda: f64,
    pub alpha_lambda: f64,
    pub beta: Vec<f64>,
    pub nu_b: f64,
    pub alpha_b: f64,
    pub tau: f64,
    pub lambda_r: Vec<f64>,
    pub y: f64,
}

impl SourceFeatures {
    pub fn n_classes(&self) -> usize {
        self.beta.len()
    }

    /// Column names matching [`SourceFeatures::values`].
    pub fn names(n_classes: usize) -> Vec<String> {
        let mut names = vec![
            "n_cells".to_string(),
            "nu_lambda".into(),
            "alpha_lambda".into(),
        ];
        names.extend((1..=n_classes).map(|r| format!("beta_{r}")));
        names.extend(["nu_b".to_string(), "alpha_b".into(), "tau".into()]);
        names.extend((1..=n_classes).map(|r| format!("lambda_{r}")));
        names
    }

    /// Latent parameters as a flat vector (excluding `y`).
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.n_cells as f64, self.nu_lambda, self.alpha_lambda];
        v.extend(&self.beta);
        v.extend([self.nu_b, self.alpha_b, self.tau]);
        v.extend(&self.lambda_r);
        v
    }

    pub fn from_values(values: &[f64], n_classes: usize, y: f64) -> Result<Self> {
        let r = n_classes;
        if values.len() != 6 + 2 * r {
            return Err(Error::Data(format!(
                "expected {} source feature values for {r} classes, got {}",
                6 + 2 * r,
                values.len()
            )));
        }
        Ok(SourceFeatures {
            n_cells: values[0].round() as usize,
            nu_lambda: values[1],
            alpha_lambda: values[2],
            beta: values[3..3 + r].to_vec(),
            nu_b: values[3 + r],
            alpha_b: values[4 + r],
            tau: values[5 + r],
            lambda_r: values[6 + r..6 + 2 * r].to_vec(),
            y,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.beta.len();
        if r == 0 || self.lambda_r.len() != r {
            return Err(Error::Config(
                "source features need R >= 1 intercepts and size rates".into(),
            ));
        }
        if self.n_cells == 0 || self.n_cells > 100_000 {
            return Err(Error::Config(format!(
                "cell count must lie in [1, 100000], got {}",
                self.n_cells
            )));
        }
        if !(self.tau >= 0.0) || self.lambda_r.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config(
                "temperature must be >= 0 and size rates > 0".into(),
            ));
        }
        if self.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("source features must be finite".into()));
        }
        Ok(())
    }
}

/// A placed cell: unit-square position, 0-based class and radius (unit-square
/// length).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub x: f64,
    pub y: f64,
    pub class: usize,
    pub radius: f64,
}

/// Closed intervals from which each source feature is drawn uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub n_cells: (usize, usize),
    pub nu_lambda: (f64, f64),
    pub alpha_lambda: (f64, f64),
    pub beta: (f64, f64),
    pub nu_b: (f64, f64),
    pub alpha_b: (f64, f64),
    pub tau: (f64, f64),
    pub lambda_r: (f64, f64),
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            n_cells: (50, 1000),
            nu_lambda: (0.0, 8.0),
            alpha_lambda: (0.0, 8.0),
            beta: (-0.15, 0.15),
            nu_b: (0.0, 3.0),
            alpha_b: (0.0, 3.0),
            tau: (0.0, 3.0),
            lambda_r: (100.0, 500.0),
        }
    }
}

impl ParamRanges {
    fn validate(&self) -> Result<()> {
        let real = [
            ("nu_lambda", self.nu_lambda),
            ("alpha_lambda", self.alpha_lambda),
            ("beta", self.beta),
            ("nu_b", self.nu_b),
            ("alpha_b", self.alpha_b),
            ("tau", self.tau),
            ("lambda_r", self.lambda_r),
        ];
        for (name, (lo, hi)) in real {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!(
                    "range for {name} is empty: [{lo}, {hi}]"
                )));
            }
        }
        if self.n_cells.0 > self.n_cells.1 || self.n_cells.0 == 0 || self.n_cells.1 > 100_000 {
            return Err(Error::Config(format!(
                "cell-count range {:?} is invalid",
                self.n_cells
            )));
        }
        if self.tau.0 < 0.0 || self.lambda_r.0 <= 0.0 {
            return Err(Error::Config(
                "temperature range must be >= 0 and size rates > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn draw(&self, n_classes: usize, rng: &mut RngStream) -> SourceFeatures {
        let n_cells = self.n_cells.0 + rng.index(self.n_cells.1 - self.n_cells.0 + 1);
        let nu_lambda = rng.uniform_range(self.nu_lambda.0, self.nu_lambda.1);
        let alpha_lambda = rng.uniform_range(self.alpha_lambda.0, self.alpha_lambda.1);
        let beta = (0..n_classes)
            .map(|_| rng.uniform_range(self.beta.0, self.beta.1))
            .collect();
        let nu_b = rng.uniform_range(self.nu_b.0, self.nu_b.1);
        let alpha_b = rng.uniform_range(self.alpha_b.0, self.alpha_b.1);
        let tau = rng.uniform_range(self.tau.0, self.tau.1);
        let lambda_r = (0..n_classes)
            .map(|_| rng.uniform_range(self.lambda_r.0, self.lambda_r.1))
            .collect();
        SourceFeatures {
            n_cells,
            nu_lambda,
            alpha_lambda,
            beta,
            nu_b,
            alpha_b,
            tau,
            lambda_r,
            y: 0.0,
        }
    }
}

/// Weight of each standardized source feature in the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Influences {
    pub n_cells: f64,
    pub nu_lambda: f64,
    pub alpha_lambda: f64,
    pub beta_first: f64,
    pub beta_rest: f64,
    pub nu_b: f64,
    pub alpha_b: f64,
    pub tau: f64,
    pub lambda_first: f64,
    pub lambda_rest: f64,
}

impl Default for Influences {
    fn default() -> Self {
        Influences {
            n_cells: 0.5,
            nu_lambda: -0.5,
            alpha_lambda: -0.5,
            beta_first: 1.0,
            beta_rest: -1.0,
            nu_b: -0.5,
            alpha_b: -0.5,
            tau: 0.5,
            lambda_first: 1.0,
            lambda_rest: 0.0,
        }
    }
}

impl Influences {
    pub fn zero() -> Self {
        Influences {
            n_cells: 0.0,
            nu_lambda: 0.0,
            alpha_lambda: 0.0,
            beta_first: 0.0,
            beta_rest: 0.0,
            nu_b: 0.0,
            alpha_b: 0.0,
            tau: 0.0,
            lambda_first: 0.0,
            lambda_rest: 0.0,
        }
    }

    /// Weights in [`SourceFeatures::values`] order.
    pub fn vector(&self, n_classes: usize) -> Vec<f64> {
        let per_class =
            |first: f64, rest: f64| (0..n_classes).map(move |r| if r == 0 { first } else { rest });
        let mut v = vec![self.n_cells, self.nu_lambda, self.alpha_lambda];
        v.extend(per_class(self.beta_first, self.beta_rest));
        v.extend([self.nu_b, self.alpha_b, self.tau]);
        v.extend(per_class(self.lambda_first, self.lambda_rest));
        v
    }
}

/// Simulation settings; defaults give 3-class 64×64 images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_images: usize,
    pub grid_w: usize,
    pub grid_h: usize,
    pub n_classes: usize,
    pub ranges: ParamRanges,
    pub influences: Influences,
    pub seed: u64,
    pub field_cap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_images: 10_000,
            grid_w: 64,
            grid_h: 64,
            n_classes: 3,
            ranges: ParamRanges::default(),
            influences: Influences::default(),
            seed: 0,
            field_cap: DEFAULT_FIELD_CAP,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_w < 8 || self.grid_h < 8 {
            return Err(Error::Config(format!(
                "grid must be at least 8x8, got {}x{}",
                self.grid_w, self.grid_h
            )));
        }
        if self.n_classes == 0 {
            return Err(Error::Config("need at least one cell class".into()));
        }
        if self.n_images < 2 {
            return Err(Error::Config(
                "need at least two images to standardize the response".into(),
            ));
        }
        if self.grid_w * self.grid_h > self.field_cap {
            return Err(Error::Config(format!(
                "{}x{} grid exceeds the field cap of {} points",
                self.grid_w, self.grid_h, self.field_cap
            )));
        }
        self.ranges.validate()
    }
}

/// Baseline intensity `Λ` and relative class intensities `B_r`.
#[derive(Debug, Clone)]
pub struct Intensities {
    pub baseline: Matrix,
    pub relative: Vec<Matrix>,
}

/// Draws `Λ = exp(field)` and `B_r = exp(β_r + field_r)`; the `R` relative
/// fields share one roughness/bandwidth pair.
pub fn build_intensities(
    f: &SourceFeatures,
    width: usize,
    height: usize,
    cap: usize,
    rng: &mut RngStream,
) -> Result<Intensities> {
    f.validate()?;
    let base = GpSampler::new(
        width,
        height,
        &MaternParams::clamped(f.nu_lambda, f.alpha_lambda),
        cap,
    )?;
    let mut baseline = base.sample(rng);
    baseline
        .as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = v.exp());

    let rel = GpSampler::new(
        width,
        height,
        &MaternParams::clamped(f.nu_b, f.alpha_b),
        cap,
    )?;
    let relative = f
        .beta
        .iter()
        .map(|&beta| {
            let mut field = rel.sample(rng);
            field
                .as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = (beta + *v).exp());
            field
        })
        .collect();
    Ok(Intensities { baseline, relative })
}

/// Places exactly `f.n_cells` cells: pixel ∝ `Λ`, uniform jitter inside the
/// pixel, class `r` with probability `B_r^τ / Σ B^τ`, radius ~ Gamma(5, λ_r).
pub fn sample_cells(
    intensities: &Intensities,
    f: &SourceFeatures,
    rng: &mut RngStream,
) -> Result<Vec<CellRecord>> {
    f.validate()?;
    let Intensities { baseline, relative } = intensities;
    let (w, h) = baseline.shape();
    if relative.len() != f.n_classes() || relative.iter().any(|b| b.shape() != (w, h)) {
        return Err(Error::Shape(
            "relative intensities must match class count and grid".into(),
        ));
    }
    let values = baseline.as_slice();
    if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Data(
            "baseline intensity must be strictly positive".into(),
        ));
    }
    let mut cumulative = Vec::with_capacity(values.len());
    let mut total = 0.0;
    for &v in values {
        total += v;
        cumulative.push(total);
    }

    let mut cells = Vec::with_capacity(f.n_cells);
    let mut weights = vec![0.0; relative.len()];
    for _ in 0..f.n_cells {
        let target = rng.uniform() * total;
        let pixel = cumulative
            .partition_point(|&c| c <= target)
            .min(values.len() - 1);
        let (u, v) = (pixel / h, pixel % h);
        let x = (u as f64 + rng.uniform()) / w as f64;
        let y = (v as f64 + rng.uniform()) / h as f64;

        let class = draw_class(relative, pixel, f.tau, &mut weights, rng);
        let radius = rng.gamma(RADIUS_SHAPE, f.lambda_r[class])?;
        cells.push(CellRecord {
            x,
            y,
            class,
            radius,
        });
    }
    Ok(cells)
}

/// Tempered class probabilities at one pixel, computed in log space.
pub fn class_probabilities(relative: &[Matrix], pixel: usize, tau: f64) -> Vec<f64> {
    let mut weights = vec![0.0; relative.len()];
    fill_class_weights(relative, pixel, tau, &mut weights);
    weights
}

fn fill_class_weights(relative: &[Matrix], pixel: usize, tau: f64, weights: &mut [f64]) {
    for (w, b) in weights.iter_mut().zip(relative) {
        *w = tau * b.as_slice()[pixel].ln();
    }
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for w in weights.iter_mut() {
        *w = (*w - max).exp();
        sum += *w;
    }
    weights.iter_mut().for_each(|w| *w /= sum);
}

fn draw_class(
    relative: &[Matrix],
    pixel: usize,
    tau: f64,
    weights: &mut [f64],
    rng: &mut RngStream,
) -> usize {
    fill_class_weights(relative, pixel, tau, weights);
    let u = rng.uniform();
    let mut acc = 0.0;
    for (r, &p) in weights.iter().enumerate() {
        acc += p;
        if u < acc {
            return r;
        }
    }
    weights.len() - 1
}

/// Binary `w × h × R` raster: a pixel is lit in channel `r` when its center
/// lies inside some class-`r` disc (radius scaled by the grid width).
pub fn rasterize(
    cells: &[CellRecord],
    width: usize,
    height: usize,
    n_classes: usize,
) -> Result<ImageTensor> {
    let mut img = ImageTensor::zeros(width, height, n_classes);
    for (i, c) in cells.iter().enumerate() {
        if c.class >= n_classes || !(c.radius > 0.0) {
            return Err(Error::Data(format!(
                "cell {i} has invalid class {} or radius {}",
                c.class, c.radius
            )));
        }
        let cx = c.x * width as f64;
        let cy = c.y * height as f64;
        let r = c.radius * width as f64;
        let r2 = r * r;
        let u_lo = (cx - r - 0.5).floor().max(0.0) as usize;
        let u_hi = ((cx + r - 0.5).ceil().max(0.0) as usize).min(width.saturating_sub(1));
        let v_lo = (cy - r - 0.5).floor().max(0.0) as usize;
        let v_hi = ((cy + r - 0.5).ceil().max(0.0) as usize).min(height.saturating_sub(1));
        for u in u_lo..=u_hi {
            let du = u as f64 + 0.5 - cx;
            for v in v_lo..=v_hi {
                let dv = v as f64 + 0.5 - cy;
                if du * du + dv * dv <= r2 {
                    img.set(u, v, c.class, 1.0);
                }
            }
        }
    }
    Ok(img)
}

/// `y_i = Σ_k influence_k (feature_ik − mean_k) / sd_k`; zero-variance
/// features contribute nothing.
pub fn generate_response(table: &[SourceFeatures], influences: &Influences) -> Result<Vec<f64>> {
    if table.len() < 2 {
        return Err(Error::Data(format!(
            "response needs at least 2 samples, got {}",
            table.len()
        )));
    }
    let r = table[0].n_classes();
    if table
        .iter()
        .any(|f| f.n_classes() != r || f.lambda_r.len() != r)
    {
        return Err(Error::Data(
            "all samples must have the same number of classes".into(),
        ));
    }
    let weights = influences.vector(r);
    let rows: Vec<Vec<f64>> = table.iter().map(|f| f.values()).collect();
    let mut y = vec![0.0; table.len()];
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let col: Vec<f64> = rows.iter().map(|row| row[k]).collect();
        let (mean, sd) = mean_sd(&col);
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            continue;
        }
        for (yi, x) in y.iter_mut().zip(&col) {
            *yi += w * (x - mean) / sd;
        }
    }
    Ok(y)
}

/// One simulated image with its latent parameters (response not yet set).
pub fn simulate_image(cfg: &SimConfig, index: usize) -> Result<(ImageTensor, SourceFeatures)> {
    let mut rng = RngStream::derive(cfg.seed, &[STREAM_SIM_IMAGE, index as u64]);
    let features = cfg.ranges.draw(cfg.n_classes, &mut rng);
    let intensities =
        build_intensities(&features, cfg.grid_w, cfg.grid_h, cfg.field_cap, &mut rng)?;
    let cells = sample_cells(&intensities, &features, &mut rng)?;
    let image = rasterize(&cells, cfg.grid_w, cfg.grid_h, cfg.n_classes)?;
    Ok((image, features))
}

/// Simulates a full dataset in memory. Images are generated in parallel, each
/// from its own stream, so the result does not depend on the thread count.
pub fn simulate(cfg: &SimConfig) -> Result<Dataset> {
    cfg.validate()?;
    let results: Vec<Result<(ImageTensor, SourceFeatures)>> = (0..cfg.n_images)
        .into_par_iter()
        .map(|i| simulate_image(cfg, i))
        .collect();
    let mut images = Vec::with_capacity(cfg.n_images);
    let mut table = Vec::with_capacity(cfg.n_images);
    for r in results {
        let (img, f) = r?;
        images.push(img);
        table.push(f);
    }
    let y = generate_response(&table, &cfg.influences)?;
    for (f, &yi) in table.iter_mut().zip(&y) {
        f.y = yi;
    }
    Dataset::new(
        images,
        y,
        Some(table),
        Provenance {
            seed: Some(cfg.seed),
            generator: "lcmp".into(),
            config: serde_json::to_value(cfg).ok(),
        },
    )
}

/// Simulates and writes a dataset to `out_dir`.
pub fn generate_dataset(cfg: &SimConfig, out_dir: &Path) -> Result<Dataset> {
    let ds = simulate(cfg)?;
    ds.save(out_dir)?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(n_cells: usize, tau: f64) -> SourceFeatures {
        SourceFeatures {
            n_cells,
            nu_lambda: 1.0,
            alpha_lambda: 2.0,
            beta: vec![0.0, 0.1, -0.1],
            nu_b: 1.0,
            alpha_b: 1.0,
            tau,
            lambda_r: vec![100.0, 200.0, 300.0],
            y: 0.0,
        }
    }

    #[test]
    fn matern_closed_forms() {
        let p = MaternParams::new(1.0, 0.5, 2.0).unwrap();
        assert!((matern_cov(1.0, &p) - (-0.5f64).exp()).abs() < 1e-12);
        assert_eq!(matern_cov(0.0, &p), 1.0);
        let p = MaternParams::new(1.0, 1.5, 1.0).unwrap();
        let s3 = 3f64.sqrt();
        let expected = (1.0 + s3) * (-s3).exp();
        assert!((matern_cov(1.0, &p) - expected).abs() < 1e-12);
    }

    #[test]
    fn matern_params_validation() {
        assert!(MaternParams::new(0.0, 1.0, 1.0).is_err());
        assert!(MaternParams::new(1.0, 0.0, 1.0).is_err());
        assert!(MaternParams::new(1.0, 1.0, 0.0).is_err());
        let c = MaternParams::clamped(0.0, 0.0);
        assert_eq!((c.nu, c.alpha), (MIN_ROUGHNESS, MIN_BANDWIDTH));
    }

    #[test]
    fn field_cap_is_enforced() {
        let p = MaternParams::new(1.0, 1.0, 1.0).unwrap();
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(
            simulate_gp_field(65, 64, &p, DEFAULT_FIELD_CAP, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn intensities_are_positive_and_reproducible() {
        let f = features(100, 1.0);
        let a = build_intensities(&f, 8, 8, 4096, &mut RngStream::new(3, 1)).unwrap();
        let b = build_intensities(&f, 8, 8, 4096, &mut RngStream::new(3, 1)).unwrap();
        assert!(a.baseline.as_slice().iter().all(|&v| v > 0.0));
        assert!(a
            .relative
            .iter()
            .all(|m| m.as_slice().iter().all(|&v| v > 0.0)));
        assert_eq!(a.baseline, b.baseline);
        assert_eq!(a.relative, b.relative);
    }

    #[test]
    fn cell_count_is_exact() {
        let f = features(321, 2.0);
        let mut rng = RngStream::new(5, 0);
        let ints = build_intensities(&f, 8, 8, 4096, &mut rng).unwrap();
        let cells = sample_cells(&ints, &f, &mut rng).unwrap();
        assert_eq!(cells.len(), 321);
        assert!(cells
            .iter()
            .all(|c| c.radius > 0.0 && c.class < 3 && (0.0..1.0).contains(&c.x)));
    }

    #[test]
    fn zero_temperature_gives_uniform_class_probabilities() {
        let f = features(10, 0.0);
        let ints = build_intensities(&f, 8, 8, 4096, &mut RngStream::new(1, 1)).unwrap();
        for pixel in [0, 17, 63] {
            for p in class_probabilities(&ints.relative, pixel, 0.0) {
                assert_eq!(p, 1.0 / 3.0);
            }
        }
    }

    #[test]
    fn rasterize_edge_cases() {
        let img = rasterize(&[], 16, 16, 3).unwrap();
        assert!(img.as_slice().iter().all(|&v| v == 0.0));
        let c = CellRecord {
            x: 0.5,
            y: 0.5,
            class: 1,
            radius: 0.05,
        };
        let img = rasterize(&[c, c], 16, 16, 3).unwrap();
        assert!(img.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!((0..16).all(|u| (0..16).all(|v| img.get(u, v, 0) == 0.0)));
        assert!(rasterize(&[CellRecord { class: 3, ..c }], 16, 16, 3).is_err());
    }

    #[test]
    fn response_conventions() {
        let constant = vec![features(10, 1.0); 5];
        assert_eq!(
            generate_response(&constant, &Influences::default()).unwrap(),
            vec![0.0; 5]
        );
        assert!(generate_response(&constant[..1], &Influences::default()).is_err());
    }

    #[test]
    fn influence_vector_layout() {
        let v = Influences::default().vector(3);
        assert_eq!(
            v,
            vec![0.5, -0.5, -0.5, 1.0, -1.0, -1.0, -0.5, -0.5, 0.5, 1.0, 0.0, 0.0]
        );
        assert_eq!(SourceFeatures::names(3).len(), v.len());
    }

    #[test]
    fn default_ranges() {
        let r = ParamRanges::default();
        assert_eq!(r.n_cells, (50, 1000));
        assert_eq!(r.lambda_r, (100.0, 500.0));
        assert_eq!(SimConfig::default().n_classes, 3);
    }

    #[test]
    fn values_roundtrip() {
        let f = features(42, 0.7);
        let back = SourceFeatures::from_values(&f.values(), 3, 0.0).unwrap();
        assert_eq!(back, f);
    }
}
