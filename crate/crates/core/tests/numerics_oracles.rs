//! Numerical kernels checked against independent oracles: nalgebra for dense
//! linear algebra, direct quadrature for the Bessel function and analytic
//! distribution functions for the gamma sampler.

use approx::assert_relative_eq;
use featstab::lcmp_sim::{matern_cov, MaternParams};
use featstab::numerics::{bessel_k, cholesky_psd, sample_gamma, svd, sym_eigen, Matrix, RngStream};

fn gaussian(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut rng = RngStream::new(seed, 7);
    Matrix::from_fn(rows, cols, |_, _| rng.standard_normal())
}

fn to_na(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn max_abs_off_identity(g: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

#[test]
fn svd_matches_nalgebra_and_reconstructs() {
    for (seed, (m, n)) in [(5, 3), (3, 5), (8, 8), (40, 6)].into_iter().enumerate() {
        let a = gaussian(seed as u64, m, n);
        let d = svd(&a).unwrap();
        let mut oracle: Vec<f64> = to_na(&a).singular_values().iter().copied().collect();
        oracle.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (s, o) in d.s.iter().zip(&oracle) {
            assert_relative_eq!(*s, *o, max_relative = 1e-10);
        }
        let err = d.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm();
        assert!(err <= 1e-10, "{m}x{n} reconstruction error {err}");
        assert!(max_abs_off_identity(&d.u.t_matmul(&d.u)) <= 1e-10);
        assert!(max_abs_off_identity(&d.vt.matmul(&d.vt.transpose())) <= 1e-10);
    }
}

#[test]
fn symmetric_eigenvalues_match_nalgebra() {
    let g = gaussian(11, 30, 9);
    let s = g.t_matmul(&g);
    let (vals, vecs) = sym_eigen(&s).unwrap();
    let mut oracle: Vec<f64> = to_na(&s)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    oracle.sort_by(|x, y| y.partial_cmp(x).unwrap());
    for (v, o) in vals.iter().zip(&oracle) {
        assert_relative_eq!(*v, *o, max_relative = 1e-10);
    }
    assert!(max_abs_off_identity(&vecs.t_matmul(&vecs)) <= 1e-10);
}

#[test]
fn cholesky_hand_example() {
    let a = Matrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]).unwrap();
    let (l, jitter) = cholesky_psd(&a, 1e-10).unwrap();
    assert_eq!(jitter, 0.0);
    assert_relative_eq!(l[(0, 0)], 2.0, epsilon = 1e-15);
    assert_relative_eq!(l[(1, 0)], 1.0, epsilon = 1e-15);
    assert_relative_eq!(l[(1, 1)], 2f64.sqrt(), epsilon = 1e-15);
    assert_eq!(l[(0, 1)], 0.0);
    assert!(l.matmul(&l.transpose()).sub(&a).max_abs() < 1e-14);
}

/// `K_ν(x) = ∫₀^∞ exp(−x·cosh t)·cosh(νt) dt`, by composite Simpson on the
/// range where the integrand is above `e^{-745}`.
fn bessel_quadrature(nu: f64, x: f64) -> f64 {
    let upper = (745.0 / x).max(1.0).acosh() + 1.0;
    let steps = 40_000;
    let h = upper / steps as f64;
    let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
    let mut sum = f(0.0) + f(upper);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    sum * h / 3.0
}

#[test]
fn bessel_k1_matches_quadrature() {
    let q = bessel_quadrature(1.0, 1.0);
    assert_relative_eq!(bessel_k(1.0, 1.0).unwrap(), q, max_relative = 1e-8);
    assert_relative_eq!(q, 0.601_907_230_197_234_6, max_relative = 1e-10);
}

#[test]
fn bessel_matches_quadrature_across_range() {
    let mut rng = RngStream::new(3, 3);
    for _ in 0..60 {
        let nu = rng.uniform_range(0.05, 10.0);
        let x = 10f64.powf(rng.uniform_range(-1.0, 50f64.log10()));
        let k = bessel_k(nu, x).unwrap();
        let q = bessel_quadrature(nu, x);
        assert_relative_eq!(k, q, max_relative = 1e-8);
    }
}

#[test]
fn matern_three_halves_at_unit_distance() {
    let p = MaternParams::new(1.0, 1.5, 1.0).unwrap();
    let closed = (1.0 + 3f64.sqrt()) * (-(3f64.sqrt())).exp();
    assert_relative_eq!(matern_cov(1.0, &p), closed, max_relative = 1e-9);
    assert_relative_eq!(closed, 0.483_357_724_6, max_relative = 1e-9);
}

#[test]
fn gamma_mean_over_a_million_draws() {
    let mut rng = RngStream::new(42, 1);
    let n = 1_000_000;
    let mean = (0..n)
        .map(|_| sample_gamma(5.0, 100.0, &mut rng).unwrap())
        .sum::<f64>()
        / n as f64;
    assert!((mean - 0.05).abs() <= 0.001, "mean {mean}");
}

#[test]
fn unit_shape_gamma_is_exponential() {
    let mut rng = RngStream::new(9, 2);
    let rate = 3.0;
    let n = 100_000;
    let mut draws: Vec<f64> = (0..n)
        .map(|_| sample_gamma(1.0, rate, &mut rng).unwrap())
        .collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut ks = 0.0f64;
    for (i, &x) in draws.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        ks = ks
            .max((cdf - i as f64 / n as f64).abs())
            .max(((i + 1) as f64 / n as f64 - cdf).abs());
    }
    assert!(ks < 0.01, "KS statistic {ks}");
}

#[test]
fn gamma_stream_repeats() {
    let draw = || {
        let mut rng = RngStream::new(5, 5);
        (0..20)
            .map(|_| sample_gamma(2.5, 4.0, &mut rng).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(draw(), draw());
}
