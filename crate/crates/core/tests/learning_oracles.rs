//! Feature learning, reduction and correlation analysis against dense
//! reference computations.

use approx::assert_relative_eq;
use featstab::numerics::{Matrix, RngStream};
use featstab::pipeline::{bootstrap_indices, split_samples, SplitConfig};
use featstab::rcf::{mse, ridge_fit, RcfConfig, RcfModel};
use featstab::reduce_align::{cca, pca_reduce, sca_fit, CcaRidge};
use featstab::ImageTensor;

fn gaussian(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut rng = RngStream::new(seed, 3);
    Matrix::from_fn(rows, cols, |_, _| rng.standard_normal())
}

fn to_na(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

#[test]
fn ridge_matches_dense_solver() {
    let z = gaussian(1, 20, 5);
    let y: Vec<f64> = gaussian(2, 20, 1).into_vec();
    let lambda = 0.3;
    let beta = ridge_fit(&z, &y, lambda).unwrap();
    let zn = to_na(&z);
    let gram = zn.transpose() * &zn + nalgebra::DMatrix::identity(5, 5) * lambda;
    let rhs = zn.transpose() * nalgebra::DVector::from_vec(y);
    let oracle = gram.lu().solve(&rhs).unwrap();
    for (b, o) in beta.iter().zip(oracle.iter()) {
        assert_relative_eq!(*b, *o, epsilon = 1e-8);
    }
}

#[test]
fn rcf_training_error_beats_zero_predictor() {
    let mut rng = RngStream::new(3, 0);
    let images: Vec<ImageTensor> = (0..40)
        .map(|_| {
            let data = (0..12 * 12 * 2)
                .map(|_| if rng.uniform() < 0.3 { 1.0 } else { 0.0 })
                .collect();
            ImageTensor::from_vec(12, 12, 2, data).unwrap()
        })
        .collect();
    let y: Vec<f64> = images
        .iter()
        .map(|im| im.as_slice().iter().map(|&v| v as f64).sum::<f64>() / 100.0)
        .collect();
    let train: Vec<usize> = (0..40).collect();
    let cfg = RcfConfig {
        n_patches: 16,
        patch_size: 3,
        ridge_lambda: 0.1,
        ..RcfConfig::default()
    };
    let model = RcfModel::fit(&images, &y, &train, &cfg, &mut rng).unwrap();
    let z = model.featurize(&images).unwrap();
    let pred = model.predict_features(&z).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
    assert!(mse(&pred, &y) <= var);
    assert!(mse(&pred, &y) <= mse(&vec![0.0; y.len()], &y));
}

#[test]
fn pca_scores_match_covariance_eigenvectors() {
    let z = gaussian(4, 50, 8);
    let red = pca_reduce(&z, 3).unwrap();
    let (zc, _) = z.center_cols();
    let scaled = Matrix::from_fn(50, 8, |i, j| {
        let col = zc.col(j);
        let sd = (col.iter().map(|v| v * v).sum::<f64>() / 49.0).sqrt();
        zc[(i, j)] / sd
    });
    let cov = to_na(&scaled.t_matmul(&scaled).scale(1.0 / 49.0));
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    for (k, &e) in order.iter().take(3).enumerate() {
        let v: Vec<f64> = eig.eigenvectors.column(e).iter().copied().collect();
        let oracle = scaled.matvec(&v);
        let got = red.scores.col(k);
        let sign = if featstab::numerics::dot(&oracle, &got) < 0.0 {
            -1.0
        } else {
            1.0
        };
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - sign * o).abs() <= 1e-8, "component {k}: {g} vs {o}");
        }
        assert_relative_eq!(
            red.variance_explained[k],
            eig.eigenvalues[e],
            max_relative = 1e-8
        );
    }
}

#[test]
fn sca_loadings_shrink_with_budget() {
    let z = gaussian(5, 60, 12);
    let k = 3;
    let loose = sca_fit(&z, k, f64::INFINITY).unwrap();
    let tight = sca_fit(&z, k, (0.1 * ((12 * k) as f64).sqrt()).max(k as f64)).unwrap();
    assert!(tight.loadings_l1 < loose.loadings_l1);
    for fit in [&loose, &tight] {
        assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        assert_eq!(fit.reduced.scores.shape(), (60, k));
    }
}

#[test]
fn independent_blocks_have_small_canonical_correlations() {
    let x = gaussian(6, 2000, 3);
    let y = gaussian(7, 2000, 3);
    let r = cca(&x, &y, 3, CcaRidge::Auto).unwrap();
    assert!(
        r.correlations.iter().all(|&c| c < 0.1),
        "{:?}",
        r.correlations
    );
}

#[test]
fn bootstrap_keeps_about_sixty_three_percent_distinct() {
    let plan = split_samples(
        10_000,
        &SplitConfig {
            learn_fraction: 0.5,
            dev_fraction: 0.0,
            seed: 8,
        },
    )
    .unwrap();
    assert_eq!(plan.train.len(), 5000);
    for boot in bootstrap_indices(&plan, 5, 8).unwrap() {
        let mut d = boot.clone();
        d.sort_unstable();
        d.dedup();
        let frac = d.len() as f64 / boot.len() as f64;
        assert!(
            (frac - (1.0 - (-1f64).exp())).abs() <= 0.02,
            "distinct fraction {frac}"
        );
    }
}
