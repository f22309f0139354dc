//! End-to-end orchestration: splits, bootstrap feature learning, alignment,
//! stability selection and the comparison summaries, plus on-disk formats.
//!
//! A run directory holds:
//!
//! | file | contents |
//! |------|----------|
//! | `run_config.json` | the [`RunConfig`] used |
//! | `split.json` | the [`SplitPlan`] |
//! | `replicates/b_XXX/{patches.litf, model.json, features.litf}` | per-replicate learner and `n × L` features |
//! | `replicates/b_XXX/aligned.litf` | aligned `n × K` coordinates `Z̄_b` |
//! | `consensus_mean.litf` | consensus mean `M` |
//! | `embeddings.csv` | `sample,replicate,split,k1..kK`; `n` rows per replicate then `n` rows with replicate `mean` |
//! | `alignment.json` | FSS, objective trace, sweep count, rotations |
//! | `selection_paths.csv` | `replicate,split,feature,lambda,pi_hat`; `B·K·G` rows per split |
//! | `selection.json` | selection sets, SS scores, threshold, `q̂`, false-positive bound |
//! | `cca_summary.csv` | `replicate,split,component,correlation` (simulated data only) |
//! | `baseline_mse.csv` | `replicate,split,n,mse` for the pixel-mean ridge baseline |
//!
//! Feature numbers in CSV and JSON outputs start at 1; sample and replicate
//! numbers start at 0. Floats are written in shortest round-trip form, so
//! identical runs produce identical bytes. Dev rows never enter a bootstrap
//! sample; they only feed the diagnostic curves.

pub mod align;
pub mod baseline;
pub mod cca_summary;
pub mod dataset;
pub mod learn;
pub mod litf;
pub mod select;
pub mod split;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use align::{
    read_embeddings, run_alignment, write_alignment, write_embeddings, AlignConfig, AlignOutput,
    AlignmentRecord,
};
pub use baseline::{baseline_pixel_regression, write_baseline, MseRow};
pub use cca_summary::{run_cca_summary, source_block, write_cca_summary, CcaRow};
pub use dataset::{ingest_external, Dataset, Manifest, Provenance};
pub use learn::{run_feature_learning, LearnOutput};
pub use select::{
    run_selection, write_selection_paths, SelectionOutput, SelectionPaths, SelectionReport,
};
pub use split::{
    bootstrap_indices, check_no_leakage, split_samples, SplitConfig, SplitLabel, SplitPlan,
};

use crate::error::{Error, Result};
use crate::rcf::RcfConfig;
use crate::reduce_align::AlignmentResult;
use crate::stability_select::SelectionConfig;

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "LI_THREADS";

/// Settings for a full run; defaults use a 50% learning split, `B = 20`,
/// `K = 10` and PCA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub b: usize,
    pub seed: u64,
    pub learn_fraction: f64,
    pub dev_fraction: f64,
    pub learner: RcfConfig,
    pub align: AlignConfig,
    pub selection: SelectionConfig,
    /// Also compute selection paths on train and dev rows.
    pub diagnostics: bool,
    /// Source columns for the canonical-correlation summary (all when unset).
    pub cca_columns: Option<Vec<String>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            b: 20,
            seed: 0,
            learn_fraction: 0.5,
            dev_fraction: 0.125,
            learner: RcfConfig::default(),
            align: AlignConfig::default(),
            selection: SelectionConfig::default(),
            diagnostics: true,
            cca_columns: None,
        }
    }
}

impl RunConfig {
    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            learn_fraction: self.learn_fraction,
            dev_fraction: self.dev_fraction,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 2 {
            return Err(Error::Config(format!(
                "need B >= 2 bootstrap replicates, got {}",
                self.b
            )));
        }
        if self.align.k == 0 {
            return Err(Error::Config("need K >= 1 aligned dimensions".into()));
        }
        self.learner.validate()?;
        self.selection.validate()
    }
}

/// Everything a full run produces in memory.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub plan: SplitPlan,
    pub boots: Vec<Vec<usize>>,
    pub learn: LearnOutput,
    pub alignment: AlignmentResult,
    pub selection: SelectionOutput,
    pub cca: Option<Vec<CcaRow>>,
    pub baseline: Vec<MseRow>,
}

/// Runs every stage on `ds`, writing artifacts to `out_dir` when given.
pub fn run_all(ds: &Dataset, cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("run_config.json"), cfg)?;
    }
    let plan = split_samples(ds.n(), &cfg.split_config())?;
    let boots = bootstrap_indices(&plan, cfg.b, cfg.seed)?;
    check_no_leakage(&plan, &boots)?;
    if let Some(dir) = out_dir {
        write_json(&dir.join("split.json"), &plan)?;
    }
    log::info!(
        "learning {} replicates on {} bootstrap rows each",
        cfg.b,
        plan.train.len()
    );
    let learn = run_feature_learning(ds, &boots, &cfg.learner, cfg.seed, out_dir)?;

    log::info!("aligning {} replicates to K = {}", cfg.b, cfg.align.k);
    let alignment = run_alignment(&learn.features, &cfg.align)?.alignment;
    log::info!("feature subspace stability {:.6e}", alignment.fss);

    let selection = run_selection(
        &alignment,
        &ds.y,
        &plan,
        &cfg.selection,
        cfg.seed,
        cfg.diagnostics,
    )?;
    let cca = match &ds.source_features {
        Some(_) => {
            let src = source_block(ds, cfg.cca_columns.as_deref())?;
            Some(run_cca_summary(&alignment, &src, &plan)?)
        }
        None => None,
    };
    let baseline = baseline_pixel_regression(ds, &plan, &boots)?;

    if let Some(dir) = out_dir {
        write_embeddings(&dir.join("embeddings.csv"), &alignment, &plan)?;
        write_alignment(dir, &alignment)?;
        write_selection_paths(&dir.join("selection_paths.csv"), &selection.paths)?;
        write_json(
            &dir.join("selection.json"),
            &SelectionReport::new(&selection, &cfg.selection),
        )?;
        if let Some(rows) = &cca {
            write_cca_summary(&dir.join("cca_summary.csv"), rows)?;
        }
        write_baseline(&dir.join("baseline_mse.csv"), &baseline)?;
    }
    Ok(RunSummary {
        plan,
        boots,
        learn,
        alignment,
        selection,
        cca,
        baseline,
    })
}

/// Sizes the global worker pool from `LI_THREADS` (ignored when unset or when
/// the pool already exists).
pub fn configure_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(format!(
            "{THREADS_ENV} must be a positive integer, got '{raw}'"
        ))
    })?;
    if rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .is_err()
    {
        log::debug!("worker pool already initialized");
    }
    Ok(Some(n))
}

/// Shortest round-trip decimal form; exponent notation outside `[1e-4, 1e16)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, format!("{other:?}")),
        })
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
