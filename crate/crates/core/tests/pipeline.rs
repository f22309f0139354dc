//! End-to-end runs on small simulated datasets: artifact layout, row counts
//! and error reporting.

use std::fs;
use std::path::Path;

use featstab::lcmp_sim::{simulate, SimConfig};
use featstab::numerics::{Matrix, RngStream};
use featstab::pipeline::{
    litf, read_embeddings, run_all, run_cca_summary, split_samples, RunConfig, SplitConfig,
    SplitLabel,
};
use featstab::rcf::RcfConfig;
use featstab::reduce_align::AlignmentResult;
use featstab::Error;

fn small_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        b: 3,
        seed,
        ..RunConfig::default()
    };
    cfg.learner = RcfConfig {
        n_patches: 24,
        patch_size: 4,
        ..RcfConfig::default()
    };
    cfg.align.k = 3;
    cfg.selection.n_reps = 20;
    cfg.selection.n_lambda = 10;
    cfg
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect()
}

#[test]
fn run_directory_has_consistent_row_counts() {
    let ds = simulate(&SimConfig {
        n_images: 80,
        grid_w: 16,
        grid_h: 16,
        seed: 21,
        ..SimConfig::default()
    })
    .unwrap();
    let cfg = small_config(21);
    let dir = tempfile::tempdir().unwrap();
    let out = run_all(&ds, &cfg, Some(dir.path())).unwrap();
    let (n, b, k, g) = (80, cfg.b, cfg.align.k, cfg.selection.n_lambda);

    for name in [
        "run_config.json",
        "split.json",
        "alignment.json",
        "consensus_mean.litf",
        "selection.json",
        "cca_summary.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    for r in 0..b {
        let rep = dir.path().join("replicates").join(format!("b_{r:03}"));
        for name in [
            "patches.litf",
            "model.json",
            "features.litf",
            "aligned.litf",
        ] {
            assert!(rep.join(name).exists(), "{}/{name} missing", rep.display());
        }
    }

    assert_eq!(
        data_rows(&dir.path().join("embeddings.csv")).len(),
        n * b + n
    );
    let back = read_embeddings(&dir.path().join("embeddings.csv")).unwrap();
    assert_eq!(back.aligned.len(), b);
    assert!((back.fss - out.alignment.fss).abs() <= 1e-6 * out.alignment.fss.max(1.0));
    let mean = litf::read_matrix(&dir.path().join("consensus_mean.litf")).unwrap();
    assert_eq!(mean.shape(), (n, k));

    let paths = data_rows(&dir.path().join("selection_paths.csv"));
    for label in SplitLabel::ALL {
        let count = paths
            .iter()
            .filter(|r| r.split(',').nth(1) == Some(label.as_str()))
            .count();
        assert_eq!(count, b * k * g, "selection path rows for {label}");
    }

    let baseline = data_rows(&dir.path().join("baseline_mse.csv"));
    assert_eq!(baseline.len(), b * SplitLabel::ALL.len());

    let ss = &out.selection.result.ss_scores;
    assert_eq!(ss.len(), k);
    for (j, s) in ss.iter().enumerate() {
        let hits = out
            .selection
            .result
            .selected_sets
            .iter()
            .filter(|set| set.contains(&j))
            .count();
        assert_eq!(*s, hits as f64 / b as f64);
    }
}

#[test]
fn in_memory_run_matches_persisted_run() {
    let ds = simulate(&SimConfig {
        n_images: 40,
        grid_w: 12,
        grid_h: 12,
        seed: 5,
        ..SimConfig::default()
    })
    .unwrap();
    let mut cfg = small_config(5);
    cfg.diagnostics = false;
    let dir = tempfile::tempdir().unwrap();
    let a = run_all(&ds, &cfg, None).unwrap();
    let b = run_all(&ds, &cfg, Some(dir.path())).unwrap();
    assert_eq!(a.alignment.mean, b.alignment.mean);
    assert_eq!(a.selection.result.ss_scores, b.selection.result.ss_scores);
    assert_eq!(a.boots, b.boots);
}

#[test]
fn corrupt_tensor_error_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.litf");
    litf::write_tensor(&path, &[2, 3], &[1.0; 6]).unwrap();
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    let err = litf::read_tensor(&path).unwrap_err();
    assert!(matches!(err, Error::Format { .. }));
    assert!(err.to_string().contains("broken.litf"), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn unrelated_embeddings_have_weak_source_correlation() {
    let n = 2000;
    let mut rng = RngStream::new(31, 0);
    let mut gauss = |cols: usize| Matrix::from_fn(n, cols, |_, _| rng.standard_normal());
    let aligned = vec![gauss(4).center_cols().0, gauss(4).center_cols().0];
    let mean = aligned[0].add(&aligned[1]).scale(0.5);
    let alignment = AlignmentResult {
        mean,
        rotations: Vec::new(),
        aligned,
        fss: 0.0,
        objective_trace: vec![0.0],
        sweeps: 0,
    };
    let sources = gauss(2);
    let plan = split_samples(
        n,
        &SplitConfig {
            learn_fraction: 0.5,
            dev_fraction: 0.0,
            seed: 31,
        },
    )
    .unwrap();
    let rows = run_cca_summary(&alignment, &sources, &plan).unwrap();
    let firsts: Vec<f64> = rows
        .iter()
        .filter(|r| r.component == 1)
        .map(|r| r.correlation)
        .collect();
    assert!(!firsts.is_empty());
    assert!(firsts.iter().all(|&c| c < 0.2), "{firsts:?}");
}
