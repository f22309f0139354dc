use featstab::numerics::{Matrix, RngStream};
use featstab::pipeline::{fmt_f64, litf, split_samples, SplitConfig};
use featstab::reduce_align::{generalized_procrustes, procrustes_pair};
use featstab::stability_select::{
    fp_bound, lambda_max, lasso_objective, lasso_path, log_grid, selection_stability,
    threshold_scores,
};
use proptest::prelude::*;

fn centered_gaussian(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut rng = RngStream::new(seed, 17);
    Matrix::from_fn(rows, cols, |_, _| rng.standard_normal())
        .center_cols()
        .0
}

fn orthonormality_error(r: &Matrix) -> f64 {
    let g = r.t_matmul(r);
    let mut worst = 0.0f64;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            worst = worst.max((g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fp_bound_identity(q in 0.0f64..200.0, p in 1usize..5000, pi in 0.51f64..=1.0) {
        let b = fp_bound(q, p, pi).unwrap();
        prop_assert!(b >= 0.0);
        let back = b * (2.0 * pi - 1.0) * p as f64;
        prop_assert!((back - q * q).abs() <= 1e-9 * (q * q).max(1.0));
    }

    #[test]
    fn raising_the_threshold_shrinks_the_selection(
        scores in prop::collection::vec(0.0f64..=1.0, 1..40),
        lo in 0.51f64..=1.0,
        hi in 0.51f64..=1.0,
    ) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let wide = threshold_scores(&scores, lo).unwrap();
        let narrow = threshold_scores(&scores, hi).unwrap();
        prop_assert!(narrow.iter().all(|j| wide.contains(j)));
        prop_assert!(wide.iter().all(|&j| scores[j] >= lo));
    }

    #[test]
    fn stability_scores_are_exact_fractions(
        sets in prop::collection::vec(prop::collection::btree_set(0usize..12, 0..12), 1..30),
    ) {
        let sets: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let ss = selection_stability(&sets, 12);
        for (k, s) in ss.iter().enumerate() {
            let count = sets.iter().filter(|set| set.contains(&k)).count();
            prop_assert_eq!(*s, count as f64 / sets.len() as f64);
            prop_assert!((0.0..=1.0).contains(s));
        }
    }

    #[test]
    fn procrustes_rotations_are_orthonormal(seed in any::<u64>(), k in 1usize..7, b in 2usize..5) {
        let mats: Vec<Matrix> = (0..b).map(|i| centered_gaussian(seed.wrapping_add(i as u64), 25, k)).collect();
        let res = generalized_procrustes(&mats).unwrap();
        for r in &res.rotations {
            prop_assert!(orthonormality_error(r) <= 1e-10);
        }
        prop_assert!(res.objective_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12));
        prop_assert!(res.fss >= 0.0);
        let pair = procrustes_pair(&mats[0], &mats[1]).unwrap();
        prop_assert!(orthonormality_error(&pair) <= 1e-10);
    }

    #[test]
    fn splits_partition_the_samples(n in 10usize..400, learn in 0.05f64..0.95, dev in 0.0f64..0.5, seed in any::<u64>()) {
        let plan = split_samples(n, &SplitConfig { learn_fraction: learn, dev_fraction: dev, seed }).unwrap();
        let mut all: Vec<usize> = plan.train.iter().chain(&plan.dev).chain(&plan.infer).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(!plan.train.is_empty() && !plan.infer.is_empty());
        let target = (learn * n as f64).round() as usize;
        prop_assert_eq!(plan.learn().len(), target.clamp(1, n - 1));
    }

    #[test]
    fn lasso_never_beats_its_own_objective_at_zero(seed in any::<u64>()) {
        let x = centered_gaussian(seed, 25, 4);
        let mut rng = RngStream::new(seed, 1);
        let y: Vec<f64> = (0..25).map(|i| x[(i, 0)] + rng.standard_normal()).collect();
        let grid = log_grid(lambda_max(&x, &y), 8, 0.01).unwrap();
        let path = lasso_path(&x, &y, &grid).unwrap();
        for (g, &lambda) in grid.iter().enumerate() {
            let at_fit = lasso_objective(&x, &y, path.coef(g), lambda);
            prop_assert!(at_fit <= lasso_objective(&x, &y, &[0.0; 4], lambda) + 1e-12);
        }
    }

    #[test]
    fn litf_round_trips(dims in prop::collection::vec(1usize..6, 0..4), seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let count: usize = dims.iter().product();
        let data: Vec<f32> = (0..count).map(|_| rng.standard_normal() as f32).collect();
        let bytes = litf::encode(&dims, &data).unwrap();
        let back = litf::decode(&bytes, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back.dims, dims);
        prop_assert_eq!(back.data, data);
    }

    #[test]
    fn float_formatting_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }
}
