//! `cpc`: command-line driver for data synthesis, preprocessing, feature
//! extraction, baseline and CPC evaluation, threshold sweeps and
//! cross-validation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use cpc_core::classifiers::ClassifierSpec;
use cpc_core::cpc::{CpcConfig, DiscriminatorConfig, EaseMode, MemberTraining};
use cpc_core::dataset::{load_datasets, LabeledDataset, TwoRegimeSpec};
use cpc_core::feature_extractor::{MlpModel, TrainConfig};
use cpc_core::harness::{self, ExtractorConfig, PipelineConfig, PipelineMode};
use cpc_core::preprocess::{self, WhiteningTransform, DEFAULT_NORM_EPSILON, DEFAULT_ZCA_EPSILON};
use cpc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "cpc", version, about = "Complexity perception classification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic two-regime dataset.
    Synth(SynthArgs),
    /// Per-sample normalization and/or ZCA whitening.
    Preprocess(PreprocessArgs),
    /// Train the MLP feature extractor.
    TrainExtractor(TrainExtractorArgs),
    /// Replace features with a trained extractor's tap activations.
    Extract(ExtractArgs),
    /// Train a single classifier and evaluate it.
    Baseline(BaselineArgs),
    /// Train CPC at a fixed threshold and evaluate it.
    Cpc(CpcArgs),
    /// Evaluate CPC over a grid of thresholds.
    Sweep(SweepArgs),
    /// Stratified k-fold cross-validation of a baseline or CPC pipeline.
    Cv(CvArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 400)]
    n_easy: usize,
    #[arg(long, default_value_t = 400)]
    n_hard: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 6.0)]
    easy_margin: f64,
    #[arg(long, default_value_t = 0.8)]
    hard_margin: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Per-sample mean/std normalization, applied before whitening.
    #[arg(long)]
    normalize: bool,
    /// Fit a ZCA whitening transform on the input.
    #[arg(long, conflicts_with = "transform_in")]
    zca: bool,
    #[arg(long, default_value_t = DEFAULT_ZCA_EPSILON)]
    epsilon: f64,
    /// Apply a previously saved whitening transform instead of fitting one.
    #[arg(long)]
    transform_in: Option<PathBuf>,
    #[arg(long)]
    transform_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainExtractorArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Architecture string, e.g. "in:8 concat:16 concat:16 fc:32 head:4".
    #[arg(long)]
    arch: String,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.5)]
    momentum: f64,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.95)]
    lr_decay: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    model_out: PathBuf,
    /// Training-loss report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Clf {
    Softmax,
    Svm,
    Forest,
    Knn,
}

#[derive(Args)]
struct ClfArgs {
    #[arg(long, value_enum, default_value_t = Clf::Softmax)]
    clf: Clf,
    /// Neighbor count for `--clf knn`.
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ClfArgs {
    fn spec(&self) -> ClassifierSpec {
        let spec = match self.clf {
            Clf::Softmax => ClassifierSpec::softmax(),
            Clf::Svm => ClassifierSpec::linear_svm(),
            Clf::Forest => ClassifierSpec::random_forest(),
            Clf::Knn => ClassifierSpec::knn(self.knn_k),
        };
        spec.with_seed(self.seed)
    }
}

#[derive(Args)]
struct CpcOpts {
    #[arg(long, default_value_t = 5)]
    k_folds: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 25)]
    disc_k: usize,
    /// Exclude each member's own training fold from its votes.
    #[arg(long)]
    exclude_in_fold: bool,
    /// Train members on the K−1 complement folds instead of a single fold.
    #[arg(long)]
    complement_folds: bool,
}

impl CpcOpts {
    fn config(&self, clf: &ClfArgs, theta: f64) -> CpcConfig {
        let spec = clf.spec();
        CpcConfig {
            k_folds: self.k_folds,
            repetitions: self.m,
            base_spec: spec,
            expert_spec: spec,
            theta,
            discriminator: DiscriminatorConfig {
                k: self.disc_k,
                ..Default::default()
            },
            ease_mode: if self.exclude_in_fold {
                EaseMode::ExcludeInFold
            } else {
                EaseMode::IncludeAll
            },
            member_training: if self.complement_folds {
                MemberTraining::ComplementFolds
            } else {
                MemberTraining::SingleFold
            },
            seed: clf.seed,
        }
    }
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    clf: ClfArgs,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CpcArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    clf: ClfArgs,
    #[command(flatten)]
    cpc: CpcOpts,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Save the fitted model bundle as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0.0:1.0:0.1")]
    grid: String,
    #[command(flatten)]
    clf: ClfArgs,
    #[command(flatten)]
    cpc: CpcOpts,
    #[arg(long)]
    curve_out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CvMode {
    Baseline,
    Cpc,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, value_enum, default_value_t = CvMode::Baseline)]
    mode: CvMode,
    #[command(flatten)]
    clf: ClfArgs,
    #[command(flatten)]
    cpc: CpcOpts,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long)]
    normalize: bool,
    /// Fit ZCA whitening inside each fold with this epsilon.
    #[arg(long)]
    zca_epsilon: Option<f64>,
    /// Train an extractor inside each fold with this architecture.
    #[arg(long)]
    arch: Option<String>,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn load_pair(a: &Path, b: &Path) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut v = load_datasets(&[a, b], None)?;
    let second = v.pop().expect("two datasets");
    Ok((v.pop().expect("two datasets"), second))
}

fn load_one(path: &Path) -> Result<LabeledDataset> {
    Ok(load_datasets(&[path], None)?.pop().expect("one dataset"))
}

/// Writes pretty JSON to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    match path {
        Some(p) => harness::write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = TwoRegimeSpec {
        n_easy: a.n_easy,
        n_hard: a.n_hard,
        classes: a.classes,
        dim: a.dim,
        easy_margin: a.easy_margin,
        hard_margin: a.hard_margin,
        seed: a.seed,
    };
    spec.generate()?.save_csv(&a.out)
}

fn preprocess_cmd(a: PreprocessArgs) -> Result<()> {
    let mut ds = load_one(&a.input)?;
    if a.normalize {
        ds = preprocess::normalize_samples(&ds, DEFAULT_NORM_EPSILON)?;
    }
    let transform = match (&a.transform_in, a.zca) {
        (Some(p), _) => Some(WhiteningTransform::load(p)?),
        (None, true) => Some(preprocess::fit_zca(&ds, a.epsilon)?),
        (None, false) => None,
    };
    if let Some(t) = &transform {
        ds = t.apply(&ds)?;
        if let Some(p) = &a.transform_out {
            t.save(p)?;
        }
    } else if a.transform_out.is_some() {
        return Err(Error::BadHyperparams(
            "--transform-out needs --zca or --transform-in".into(),
        ));
    }
    ds.save_csv(&a.out)
}

fn train_extractor(a: TrainExtractorArgs) -> Result<()> {
    let ds = load_one(&a.input)?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        momentum: a.momentum,
        dropout: a.dropout,
        batch_size: a.batch,
        epochs: a.epochs,
        lr_decay_per_epoch: a.lr_decay,
        seed: a.seed,
    };
    let init = MlpModel::from_arch_str(&a.arch, a.seed)?;
    let (model, report) = init.train(&ds, &cfg)?;
    model.save(&a.model_out)?;
    if let Some(p) = &a.report {
        let out = json!({
            "config": { "in": a.input, "arch": a.arch, "train": cfg },
            "initial_loss": report.initial_loss,
            "epoch_losses": report.epoch_losses,
            "seed": a.seed,
        });
        harness::write_json(p, &out)?;
    }
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let model = MlpModel::load(&a.model)?;
    model.extract_features(&load_one(&a.input)?)?.save_csv(&a.out)
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let (train, test) = load_pair(&a.train, &a.test)?;
    let cfg = PipelineConfig::baseline(a.clf.spec());
    let report = harness::run_pipeline(&train, &test, &cfg, a.clf.seed)?;
    let config = json!({ "command": "baseline", "train": a.train, "test": a.test, "pipeline": cfg });
    emit(a.report.as_deref(), &report.with_config(&config, a.clf.seed)?)
}

fn cpc_cmd(a: CpcArgs) -> Result<()> {
    let (train, test) = load_pair(&a.train, &a.test)?;
    let cfg = a.cpc.config(&a.clf, a.theta);
    let model = cpc_core::cpc::fit_pipeline(&train, &cfg)?;
    let preds = model.predict_all(&test)?;
    let class_count = train.class_count().max(test.class_count());
    let report = harness::evaluate_routed(&preds, test.labels(), class_count)?;
    if let Some(p) = &a.model_out {
        model.save(p)?;
    }
    let config = json!({ "command": "cpc", "train": a.train, "test": a.test, "cpc": cfg });
    emit(a.report.as_deref(), &report.with_config(&config, a.clf.seed)?)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let (train, val) = load_pair(&a.train, &a.val)?;
    let grid = harness::parse_grid(&a.grid)?;
    let cfg = a.cpc.config(&a.clf, grid[0]);
    let mut result = harness::theta_sweep(&train, &val, &grid, &cfg)?;
    result.config = json!({ "command": "sweep", "train": a.train, "val": a.val, "grid": a.grid, "cpc": cfg });
    if let Some(p) = &a.curve_out {
        result.save_curve(p)?;
    }
    emit(a.report.as_deref(), &result)
}

fn cv(a: CvArgs) -> Result<()> {
    let ds = load_one(&a.input)?;
    let mode = match a.mode {
        CvMode::Baseline => PipelineMode::Baseline {
            classifier: a.clf.spec(),
        },
        CvMode::Cpc => PipelineMode::Cpc(a.cpc.config(&a.clf, a.theta)),
    };
    let cfg = PipelineConfig {
        normalize: a.normalize,
        zca_epsilon: a.zca_epsilon,
        extractor: a.arch.clone().map(|arch| ExtractorConfig {
            arch,
            train: TrainConfig {
                epochs: a.epochs,
                seed: a.clf.seed,
                ..Default::default()
            },
        }),
        mode,
    };
    let mut result = harness::cross_validate(&ds, &cfg, a.folds, a.clf.seed)?;
    result.config = json!({ "command": "cv", "in": a.input, "folds": a.folds, "pipeline": cfg });
    emit(a.report.as_deref(), &result)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Preprocess(a) => preprocess_cmd(a),
        Command::TrainExtractor(a) => train_extractor(a),
        Command::Extract(a) => extract(a),
        Command::Baseline(a) => baseline(a),
        Command::Cpc(a) => cpc_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Cv(a) => cv(a),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_numerical() => 3,
        Error::BadHyperparams(_) | Error::BadArchitecture { .. } | Error::BadK { .. } | Error::BadSpec(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
