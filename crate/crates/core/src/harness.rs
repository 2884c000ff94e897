//! Metrics, cross-validation, threshold sweeps, classifier comparison and
//! report emission.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifiers::{self, ClassifierSpec};
use crate::cpc::{CpcConfig, CpcTrainer, Route, RoutedPrediction};
use crate::dataset::{kfold, LabeledDataset};
use crate::error::{Error, Result};
use crate::feature_extractor::{MlpModel, TrainConfig};
use crate::preprocess::{fit_zca, normalize_samples, DEFAULT_NORM_EPSILON};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
}

impl ConfusionMatrix {
    pub fn zeros(class_count: usize) -> Self {
        Self {
            counts: vec![vec![0; class_count]; class_count],
            class_names: None,
        }
    }

    pub fn from_predictions(preds: &[usize], truth: &[usize], class_count: usize) -> Result<Self> {
        if preds.len() != truth.len() {
            return Err(Error::LengthMismatch {
                left: preds.len(),
                right: truth.len(),
            });
        }
        let mut m = Self::zeros(class_count);
        for (&p, &t) in preds.iter().zip(truth) {
            for label in [p, t] {
                if label >= class_count {
                    return Err(Error::LabelOutOfRange { label, class_count });
                }
            }
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn class_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.class_count()).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    /// Each row divided by its sum; `None` for classes absent from the truth.
    pub fn row_normalized(&self) -> Vec<Option<Vec<f64>>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                (s > 0).then(|| row.iter().map(|&c| c as f64 / s as f64).collect())
            })
            .collect()
    }

    /// Diagonal of the row-normalized matrix.
    pub fn per_class(&self) -> Vec<Option<f64>> {
        self.row_normalized()
            .into_iter()
            .enumerate()
            .map(|(c, row)| row.map(|r| r[c]))
            .collect()
    }

    /// Matrix after relabeling class `c` as `perm[c]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.class_count());
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                out.counts[perm[t]][perm[p]] = c;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteStats {
    #[serde(rename = "+")]
    pub easy: u64,
    #[serde(rename = "-")]
    pub difficult: u64,
    /// Accuracy among queries routed `+`; `None` when none were.
    #[serde(rename = "acc+")]
    pub easy_accuracy: Option<f64>,
    #[serde(rename = "acc-")]
    pub difficult_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `None` (JSON `null`) marks a class absent from the truth labels.
    pub per_class: Vec<Option<f64>>,
    pub confusion: Vec<Vec<u64>>,
    pub routes: Option<RouteStats>,
    pub config: Value,
    pub seed: u64,
}

impl EvalReport {
    pub fn matrix(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            counts: self.confusion.clone(),
            class_names: None,
        }
    }

    /// Attaches the configuration and seed that produced this report.
    pub fn with_config(mut self, config: &impl Serialize, seed: u64) -> Result<Self> {
        self.config = serde_json::to_value(config)?;
        self.seed = seed;
        Ok(self)
    }
}

pub fn evaluate(preds: &[usize], truth: &[usize], class_count: usize) -> Result<EvalReport> {
    let m = ConfusionMatrix::from_predictions(preds, truth, class_count)?;
    Ok(EvalReport {
        accuracy: m.accuracy(),
        per_class: m.per_class(),
        confusion: m.counts,
        routes: None,
        config: Value::Null,
        seed: 0,
    })
}

/// Like [`evaluate`] with per-route counts and accuracies.
pub fn evaluate_routed(preds: &[RoutedPrediction], truth: &[usize], class_count: usize) -> Result<EvalReport> {
    let labels: Vec<usize> = preds.iter().map(|p| p.label).collect();
    let mut report = evaluate(&labels, truth, class_count)?;
    let mut counts = [0u64; 2];
    let mut hits = [0u64; 2];
    for (p, &t) in preds.iter().zip(truth) {
        let r = usize::from(p.route == Route::Difficult);
        counts[r] += 1;
        hits[r] += u64::from(p.label == t);
    }
    let acc = |r: usize| (counts[r] > 0).then(|| hits[r] as f64 / counts[r] as f64);
    report.routes = Some(RouteStats {
        easy: counts[0],
        difficult: counts[1],
        easy_accuracy: acc(0),
        difficult_accuracy: acc(1),
    });
    Ok(report)
}

/// Optional MLP trained on the pipeline's training data; its tap-layer
/// activations replace the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub arch: String,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PipelineMode {
    Baseline { classifier: ClassifierSpec },
    Cpc(CpcConfig),
}

/// Preprocessing, optional feature extraction, then a baseline classifier
/// or CPC. Statistics are always fitted on the training portion only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub normalize: bool,
    pub zca_epsilon: Option<f64>,
    pub extractor: Option<ExtractorConfig>,
    #[serde(flatten)]
    pub mode: PipelineMode,
}

impl PipelineConfig {
    pub fn baseline(classifier: ClassifierSpec) -> Self {
        Self {
            normalize: false,
            zca_epsilon: None,
            extractor: None,
            mode: PipelineMode::Baseline { classifier },
        }
    }

    pub fn cpc(config: CpcConfig) -> Self {
        Self {
            normalize: false,
            zca_epsilon: None,
            extractor: None,
            mode: PipelineMode::Cpc(config),
        }
    }
}

/// Applies the preprocessing stages, fitting each on `train`.
pub fn prepare(
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &PipelineConfig,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (mut train, mut test) = (train.clone(), test.clone());
    if cfg.normalize {
        train = normalize_samples(&train, DEFAULT_NORM_EPSILON)?;
        test = normalize_samples(&test, DEFAULT_NORM_EPSILON)?;
    }
    if let Some(eps) = cfg.zca_epsilon {
        let w = fit_zca(&train, eps)?;
        train = w.apply(&train)?;
        test = w.apply(&test)?;
    }
    if let Some(ex) = &cfg.extractor {
        let init = MlpModel::from_arch_str(&ex.arch, ex.train.seed)?;
        let (model, _) = init.train(&train, &ex.train)?;
        train = model.extract_features(&train)?;
        test = model.extract_features(&test)?;
    }
    Ok((train, test))
}

/// Trains the pipeline on `train` and evaluates it on `test`.
pub fn run_pipeline(
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<EvalReport> {
    let (train, test) = prepare(train, test, cfg)?;
    let class_count = train.class_count().max(test.class_count());
    let report = match &cfg.mode {
        PipelineMode::Baseline { classifier } => {
            let clf = classifiers::fit(classifier, &train)?;
            evaluate(&clf.predict_all(&test)?, test.labels(), class_count)?
        }
        PipelineMode::Cpc(cpc) => {
            let model = CpcTrainer::new(&train, cpc)?.fit_theta(cpc.theta)?;
            evaluate_routed(&model.predict_all(&test)?, test.labels(), class_count)?
        }
    };
    report.with_config(cfg, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<EvalReport>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold accuracies.
    pub std: f64,
    /// Fold that held out each sample.
    pub fold_of: Vec<usize>,
    pub config: Value,
    pub seed: u64,
}

/// Stratified `folds`-fold cross-validation of the full pipeline. Folds run
/// concurrently; results are ordered by fold index.
pub fn cross_validate(ds: &LabeledDataset, cfg: &PipelineConfig, folds: usize, seed: u64) -> Result<CvResult> {
    let assignment = kfold(ds, folds, seed)?;
    let reports = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train = ds.subset(&assignment.complement(f))?;
            let test = ds.subset(&assignment.members(f))?;
            run_pipeline(&train, &test, cfg, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let accuracies: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let mean = accuracies.iter().sum::<f64>() / folds as f64;
    let std = (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / folds as f64).sqrt();
    Ok(CvResult {
        folds: reports,
        accuracies,
        mean,
        std,
        fold_of: assignment.fold_of,
        config: serde_json::to_value(cfg)?,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub thetas: Vec<f64>,
    pub accuracies: Vec<f64>,
    /// Easy-subspace size at each threshold.
    pub easy_sizes: Vec<usize>,
    pub baseline_accuracy: f64,
    /// Smallest threshold attaining the maximum accuracy.
    pub best_theta: f64,
    pub config: Value,
    pub seed: u64,
}

impl SweepResult {
    pub fn best_accuracy(&self) -> f64 {
        self.accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_curve<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "theta,accuracy")?;
        for (t, a) in self.thetas.iter().zip(&self.accuracies) {
            writeln!(out, "{t},{a}")?;
        }
        Ok(())
    }

    pub fn save_curve(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_curve(&mut buf).map_err(|e| Error::io(path, e))?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

fn snap(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

/// Parses `start:stop:step` (inclusive of `stop`) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::BadHyperparams(format!("invalid theta grid '{s}'"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let count = snap((stop - start) / step).floor() as usize + 1;
            (0..count).map(|i| snap(start + i as f64 * step)).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    validate_grid(&grid)?;
    Ok(grid)
}

pub fn default_grid() -> Vec<f64> {
    parse_grid("0.0:1.0:0.1").expect("valid default grid")
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::BadHyperparams("theta grid is empty".into()));
    }
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::BadHyperparams(
            "theta grid must be finite, non-negative and ascending".into(),
        ));
    }
    Ok(())
}

fn accuracy(preds: &[usize], truth: &[usize]) -> f64 {
    let hits = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len().max(1) as f64
}

/// Validation accuracy of CPC at every threshold in `grid`. The base
/// ensemble and ease scores are computed once and shared by all grid
/// points.
pub fn theta_sweep(train: &LabeledDataset, val: &LabeledDataset, grid: &[f64], cfg: &CpcConfig) -> Result<SweepResult> {
    validate_grid(grid)?;
    let trainer = CpcTrainer::new(train, cfg)?;
    let baseline = classifiers::fit(&cfg.expert_spec, train)?;
    let baseline_accuracy = accuracy(&baseline.predict_all(val)?, val.labels());
    let points = grid
        .par_iter()
        .map(|&theta| {
            let model = trainer.fit_theta(theta)?;
            let labels: Vec<usize> = model.predict_all(val)?.iter().map(|p| p.label).collect();
            Ok((accuracy(&labels, val.labels()), trainer.partition(theta)?.easy.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (accuracies, easy_sizes): (Vec<f64>, Vec<usize>) = points.into_iter().unzip();
    let mut best = 0;
    for (i, a) in accuracies.iter().enumerate() {
        if *a > accuracies[best] {
            best = i;
        }
    }
    Ok(SweepResult {
        thetas: grid.to_vec(),
        accuracies,
        easy_sizes,
        baseline_accuracy,
        best_theta: grid[best],
        config: serde_json::to_value(cfg)?,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub classifier: String,
    pub spec: ClassifierSpec,
    pub baseline_accuracy: f64,
    pub cpc_accuracy: f64,
    pub delta: f64,
}

/// Baseline versus CPC for each spec, using the spec as both base learner
/// and expert.
pub fn compare(
    train: &LabeledDataset,
    test: &LabeledDataset,
    specs: &[ClassifierSpec],
    cfg: &CpcConfig,
) -> Result<Vec<CompareRow>> {
    if specs.is_empty() {
        return Err(Error::BadHyperparams("no classifier specs to compare".into()));
    }
    specs
        .iter()
        .map(|spec| {
            let baseline = classifiers::fit(spec, train)?;
            let baseline_accuracy = accuracy(&baseline.predict_all(test)?, test.labels());
            let cpc_cfg = CpcConfig {
                base_spec: *spec,
                expert_spec: *spec,
                ..*cfg
            };
            let model = CpcTrainer::new(train, &cpc_cfg)?.fit_theta(cpc_cfg.theta)?;
            let labels: Vec<usize> = model.predict_all(test)?.iter().map(|p| p.label).collect();
            let cpc_accuracy = accuracy(&labels, test.labels());
            Ok(CompareRow {
                classifier: spec.name().to_string(),
                spec: *spec,
                baseline_accuracy,
                cpc_accuracy,
                delta: cpc_accuracy - baseline_accuracy,
            })
        })
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
