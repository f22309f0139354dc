use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use featstab::lcmp_sim::{generate_dataset, SimConfig, DEFAULT_FIELD_CAP};
use featstab::pipeline::{
    self, baseline_pixel_regression, bootstrap_indices, read_embeddings, read_json, run_alignment,
    run_cca_summary, run_feature_learning, run_selection, source_block, split_samples,
    write_baseline, write_cca_summary, write_embeddings, write_json, write_selection_paths,
    AlignConfig, Dataset, RunConfig, SelectionReport, SplitConfig, SplitPlan,
};
use featstab::rcf::{Nonlinearity, RcfConfig};
use featstab::reduce_align::Reduction;
use featstab::stability_select::{LambdaRule, SelectionConfig};

#[derive(Parser)]
#[command(
    name = "featstab",
    version,
    about = "Stability analysis for learned image features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a marked log Cox Matérn image dataset.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Split samples into learning (train, dev) and inference rows.
    Split {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit one feature learner per bootstrap replicate (needs `split`).
    Learn {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Reduce and align the replicate features (needs `learn`).
    Align {
        #[command(flatten)]
        align: AlignArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Stability selection on the aligned features (needs `align`).
    Select {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        select: SelectArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Canonical correlations between aligned and source features (needs `align`).
    CcaSummary {
        #[command(flatten)]
        data: DataArg,
        /// Comma-separated source columns (default: all).
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<String>>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Ridge baseline on per-channel pixel means (needs `learn`).
    Baseline {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Every stage in sequence; simulates a dataset when `--data` is absent.
    RunAll {
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        learn: LearnArgs,
        #[command(flatten)]
        align: AlignArgs,
        #[command(flatten)]
        select: SelectArgs,
        /// Comma-separated source columns for the canonical-correlation summary.
        #[arg(long, value_delimiter = ',')]
        cca_columns: Option<Vec<String>>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct DataArg {
    /// Dataset manifest or the directory containing `manifest.json`.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long = "n-images", default_value_t = 10_000)]
    n_images: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = DEFAULT_FIELD_CAP)]
    field_cap: usize,
}

impl SimArgs {
    fn config(&self, seed: u64) -> SimConfig {
        SimConfig {
            n_images: self.n_images,
            grid_w: self.width,
            grid_h: self.height,
            n_classes: self.classes,
            seed,
            field_cap: self.field_cap,
            ..SimConfig::default()
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, default_value_t = 0.5)]
    learn_fraction: f64,
    #[arg(long, default_value_t = 0.125)]
    dev_fraction: f64,
}

#[derive(Args)]
struct LearnArgs {
    /// Bootstrap replicates.
    #[arg(long = "replicates", short = 'B', default_value_t = 20)]
    b: usize,
    #[arg(long, default_value_t = 1048)]
    patches: usize,
    #[arg(long, default_value_t = 8)]
    patch_size: usize,
    #[arg(long, default_value_t = 1.0)]
    ridge_lambda: f64,
    #[arg(long, default_value = "none")]
    nonlinearity: Nonlinearity,
}

impl LearnArgs {
    fn config(&self) -> RcfConfig {
        RcfConfig {
            n_patches: self.patches,
            patch_size: self.patch_size,
            ridge_lambda: self.ridge_lambda,
            nonlinearity: self.nonlinearity,
            standardize: true,
        }
    }
}

#[derive(Args)]
struct AlignArgs {
    #[arg(short = 'K', long = "dims", default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "pca")]
    reduction: Reduction,
    /// ℓ₁ budget for SCA loadings.
    #[arg(long)]
    gamma: Option<f64>,
}

impl AlignArgs {
    fn config(&self) -> AlignConfig {
        AlignConfig {
            k: self.k,
            reduction: self.reduction,
            gamma: self.gamma,
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long, default_value_t = 250)]
    subsamples: usize,
    #[arg(long, default_value_t = 50)]
    n_lambda: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda_min_ratio: f64,
    #[arg(long, default_value_t = 0.75)]
    pi_thr: f64,
    /// `max`, `max-variance` or `index:<g>`.
    #[arg(long, default_value = "max-variance")]
    lambda_rule: LambdaRule,
    /// Skip the train/dev diagnostic selection paths.
    #[arg(long)]
    no_diagnostics: bool,
}

impl SelectArgs {
    fn config(&self) -> SelectionConfig {
        SelectionConfig {
            n_reps: self.subsamples,
            n_lambda: self.n_lambda,
            lambda_min_ratio: self.lambda_min_ratio,
            pi_thr: self.pi_thr,
            lambda_rule: self.lambda_rule,
        }
    }
}

const SPLIT_FILE: &str = "split.json";
const BOOTSTRAP_FILE: &str = "bootstrap.json";
const EMBEDDINGS_FILE: &str = "embeddings.csv";

fn load_plan(out_dir: &Path) -> Result<SplitPlan> {
    read_json(&out_dir.join(SPLIT_FILE))
        .with_context(|| format!("run `split` first to create {SPLIT_FILE}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { sim, seed, out_dir } => {
            let ds = generate_dataset(&sim.config(seed), &out_dir)?;
            log::info!("wrote {} images to {}", ds.n(), out_dir.display());
        }
        Command::Split {
            data,
            split,
            seed,
            out_dir,
        } => {
            let ds = Dataset::load(&data.data)?;
            let cfg = SplitConfig {
                learn_fraction: split.learn_fraction,
                dev_fraction: split.dev_fraction,
                seed,
            };
            let plan = split_samples(ds.n(), &cfg)?;
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            write_json(&out_dir.join(SPLIT_FILE), &plan)?;
        }
        Command::Learn {
            data,
            learn,
            seed,
            out_dir,
        } => {
            let ds = Dataset::load(&data.data)?;
            let plan = load_plan(&out_dir)?;
            let boots = bootstrap_indices(&plan, learn.b, seed)?;
            write_json(&out_dir.join(BOOTSTRAP_FILE), &boots)?;
            run_feature_learning(&ds, &boots, &learn.config(), seed, Some(&out_dir))?;
        }
        Command::Align { align, out_dir } => {
            let plan = load_plan(&out_dir)?;
            let b = pipeline::learn::count_replicates(&out_dir);
            let features = pipeline::learn::load_features(&out_dir, b)?;
            let out = run_alignment(&features, &align.config())?;
            write_embeddings(&out_dir.join(EMBEDDINGS_FILE), &out.alignment, &plan)?;
            pipeline::write_alignment(&out_dir, &out.alignment)?;
            println!("fss\t{}", pipeline::fmt_f64(out.alignment.fss));
        }
        Command::Select {
            data,
            select,
            seed,
            out_dir,
        } => {
            let ds = Dataset::load(&data.data)?;
            let plan = load_plan(&out_dir)?;
            let alignment = read_embeddings(&out_dir.join(EMBEDDINGS_FILE))?;
            let cfg = select.config();
            let out = run_selection(&alignment, &ds.y, &plan, &cfg, seed, !select.no_diagnostics)?;
            write_selection_paths(&out_dir.join("selection_paths.csv"), &out.paths)?;
            write_json(
                &out_dir.join("selection.json"),
                &SelectionReport::new(&out, &cfg),
            )?;
        }
        Command::CcaSummary {
            data,
            columns,
            out_dir,
        } => {
            let ds = Dataset::load(&data.data)?;
            let plan = load_plan(&out_dir)?;
            let alignment = read_embeddings(&out_dir.join(EMBEDDINGS_FILE))?;
            let src = source_block(&ds, columns.as_deref())?;
            let rows = run_cca_summary(&alignment, &src, &plan)?;
            write_cca_summary(&out_dir.join("cca_summary.csv"), &rows)?;
        }
        Command::Baseline { data, out_dir } => {
            let ds = Dataset::load(&data.data)?;
            let plan = load_plan(&out_dir)?;
            let boots: Vec<Vec<usize>> = read_json(&out_dir.join(BOOTSTRAP_FILE))
                .with_context(|| format!("run `learn` first to create {BOOTSTRAP_FILE}"))?;
            pipeline::check_no_leakage(&plan, &boots)?;
            let rows = baseline_pixel_regression(&ds, &plan, &boots)?;
            write_baseline(&out_dir.join("baseline_mse.csv"), &rows)?;
        }
        Command::RunAll {
            data,
            sim,
            split,
            learn,
            align,
            select,
            cca_columns,
            seed,
            out_dir,
        } => {
            let ds = match data {
                Some(path) => Dataset::load(&path)?,
                None => generate_dataset(&sim.config(seed), &out_dir.join("data"))?,
            };
            let cfg = RunConfig {
                b: learn.b,
                seed,
                learn_fraction: split.learn_fraction,
                dev_fraction: split.dev_fraction,
                learner: learn.config(),
                align: align.config(),
                selection: select.config(),
                diagnostics: !select.no_diagnostics,
                cca_columns,
            };
            let summary = pipeline::run_all(&ds, &cfg, Some(&out_dir))?;
            write_json(&out_dir.join(BOOTSTRAP_FILE), &summary.boots)?;
            println!("fss\t{}", pipeline::fmt_f64(summary.alignment.fss));
            let ss: Vec<String> = summary
                .selection
                .result
                .ss_scores
                .iter()
                .map(|v| pipeline::fmt_f64(*v))
                .collect();
            println!("ss_scores\t{}", ss.join(","));
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<featstab::Error>())
        .map_or(1, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = pipeline::configure_threads()
        .map_err(anyhow::Error::from)
        .and_then(|_| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
