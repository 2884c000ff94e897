//! Complexity perception classification.
//!
//! Training:
//! 1. `m` times, split the training set into `K` folds and fit one base
//!    classifier per fold (`N = K·m` members).
//! 2. Each training sample's ease ratio is the fraction of members that
//!    classify it correctly.
//! 3. Samples with ratio `>= θ` form the easy subspace, the rest the
//!    difficult one; each subspace gets its own expert.
//!
//! Prediction: the `k` nearest training samples, labeled easy (`+`) or
//! difficult (`-`), train a small softmax for the query; its verdict picks
//! the expert that labels the query.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{self, neighbors, ClassifierSpec, LinearLoss, LinearModel, SgdParams, TrainedClassifier};
use crate::dataset::{kfold, LabeledDataset};
use crate::error::{Error, Result};
use crate::preprocess::Standardizer;
use crate::seed;

/// What each base member is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberTraining {
    /// One fold trains the member; the other `K − 1` folds are held out.
    #[default]
    SingleFold,
    /// Conventional cross-validation: train on the `K − 1` other folds.
    ComplementFolds,
}

/// Whether members vote on samples they were trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EaseMode {
    #[default]
    IncludeAll,
    ExcludeInFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub classifier: TrainedClassifier,
    pub repetition: usize,
    pub fold: usize,
    /// Training-set indices this member was fitted on, ascending.
    pub train_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseEnsemble {
    pub members: Vec<EnsembleMember>,
    pub k_folds: usize,
    pub repetitions: usize,
    pub training: MemberTraining,
}

impl BaseEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn train_base_ensemble(
    train: &LabeledDataset,
    k_folds: usize,
    repetitions: usize,
    base_spec: &ClassifierSpec,
    seed: u64,
) -> Result<BaseEnsemble> {
    train_base_ensemble_with(train, k_folds, repetitions, base_spec, seed, MemberTraining::SingleFold)
}

/// Fits `k_folds · repetitions` members; repetition `r` uses a fresh fold
/// assignment seeded from `(seed, r)` and member `(r, j)` the spec seeded
/// from `(seed, r, j)`.
pub fn train_base_ensemble_with(
    train: &LabeledDataset,
    k_folds: usize,
    repetitions: usize,
    base_spec: &ClassifierSpec,
    seed: u64,
    training: MemberTraining,
) -> Result<BaseEnsemble> {
    if repetitions == 0 {
        return Err(Error::BadHyperparams("repetitions must be at least 1".into()));
    }
    let mut jobs = Vec::with_capacity(k_folds * repetitions);
    for r in 0..repetitions {
        let folds = kfold(train, k_folds, seed::derive(seed, &[r as u64]))?;
        for j in 0..k_folds {
            let indices = match training {
                MemberTraining::SingleFold => folds.members(j),
                MemberTraining::ComplementFolds => folds.complement(j),
            };
            jobs.push((r, j, indices));
        }
    }
    let members = jobs
        .into_par_iter()
        .map(|(r, j, indices)| {
            let spec = base_spec.with_seed(seed::derive(seed, &[r as u64, j as u64, 1]));
            let classifier = classifiers::fit(&spec, &train.subset(&indices)?)?;
            Ok(EnsembleMember {
                classifier,
                repetition: r,
                fold: j,
                train_indices: indices,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BaseEnsemble {
        members,
        k_folds,
        repetitions,
        training,
    })
}

/// Per-sample correct-vote counts and ease ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EaseScores {
    pub correct_counts: Vec<usize>,
    /// Number of members that voted on each sample (the ratio's denominator).
    pub voters: Vec<usize>,
    pub ratios: Vec<f64>,
    pub ensemble_size: usize,
    pub mode: EaseMode,
}

pub fn compute_ease(ens: &BaseEnsemble, train: &LabeledDataset, mode: EaseMode) -> Result<EaseScores> {
    let n = train.len();
    if let Some(m) = ens.members.first() {
        if m.classifier.dim != train.dim() {
            return Err(Error::DimMismatch {
                expected: m.classifier.dim,
                found: train.dim(),
            });
        }
    }
    let predictions = ens
        .members
        .iter()
        .map(|m| m.classifier.predict_all(train))
        .collect::<Result<Vec<_>>>()?;
    let mut correct_counts = vec![0; n];
    let mut voters = vec![0; n];
    for (member, preds) in ens.members.iter().zip(&predictions) {
        let mut in_fold = vec![false; n];
        if mode == EaseMode::ExcludeInFold {
            for &i in &member.train_indices {
                in_fold[i] = true;
            }
        }
        for i in 0..n {
            if in_fold[i] {
                continue;
            }
            voters[i] += 1;
            if preds[i] == train.label(i) {
                correct_counts[i] += 1;
            }
        }
    }
    let ratios = correct_counts
        .iter()
        .zip(&voters)
        .map(|(&c, &v)| if v == 0 { 0.0 } else { c as f64 / v as f64 })
        .collect();
    Ok(EaseScores {
        correct_counts,
        voters,
        ratios,
        ensemble_size: ens.len(),
        mode,
    })
}

/// Easy (`ratio >= θ`) and difficult (`ratio < θ`) training indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspacePartition {
    pub theta: f64,
    pub easy: Vec<usize>,
    pub difficult: Vec<usize>,
}

impl SubspacePartition {
    pub fn len(&self) -> usize {
        self.easy.len() + self.difficult.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Splits by `ratio >= theta`. Any `theta > 1` sends everything to the
/// difficult side.
pub fn partition(train: &LabeledDataset, ease: &EaseScores, theta: f64) -> Result<SubspacePartition> {
    if ease.ratios.len() != train.len() {
        return Err(Error::LengthMismatch {
            left: ease.ratios.len(),
            right: train.len(),
        });
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::BadHyperparams(format!(
            "theta must be a finite value >= 0, got {theta}"
        )));
    }
    let (easy, difficult): (Vec<usize>, Vec<usize>) = (0..train.len()).partition(|&i| ease.ratios[i] >= theta);
    Ok(SubspacePartition { theta, easy, difficult })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Route {
    #[serde(rename = "+")]
    Easy,
    #[serde(rename = "-")]
    Difficult,
}

impl Route {
    pub fn symbol(self) -> char {
        match self {
            Route::Easy => '+',
            Route::Difficult => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degenerate {
    None,
    AllEasy,
    AllDifficult,
}

/// Settings of the per-query KNN-softmax discriminator. Each query trains
/// a full-batch binary softmax on its `k` nearest pooled points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub k: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            k: 25,
            learning_rate: 0.05,
            momentum: 0.5,
            epochs: 200,
            l2: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutedPrediction {
    pub route: Route,
    pub label: usize,
    /// `P(+) − P(−)` from the query's discriminator; `±1` when the
    /// neighbors agree unanimously or the model is degenerate.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpcModel {
    pub theta: f64,
    pub easy_expert: Option<TrainedClassifier>,
    pub difficult_expert: Option<TrainedClassifier>,
    /// Every training point; label 1 marks `+` (easy), 0 marks `−`.
    pub pooled: LabeledDataset,
    pub discriminator: DiscriminatorConfig,
    pub seed: u64,
    pub degenerate: Degenerate,
}

const EASY_LABEL: usize = 1;
const DIFFICULT_LABEL: usize = 0;

/// Trains the subspace experts and stores the binary-labeled pool.
pub fn fit_cpc(
    train: &LabeledDataset,
    part: &SubspacePartition,
    expert_spec: &ClassifierSpec,
    discriminator: DiscriminatorConfig,
    seed: u64,
) -> Result<CpcModel> {
    if part.len() != train.len() {
        return Err(Error::LengthMismatch {
            left: part.len(),
            right: train.len(),
        });
    }
    if part.is_empty() {
        return Err(Error::EmptyPartition);
    }
    if discriminator.k == 0 {
        return Err(Error::BadHyperparams("discriminator k must be at least 1".into()));
    }
    let expert = |idx: &[usize]| -> Result<Option<TrainedClassifier>> {
        if idx.is_empty() {
            Ok(None)
        } else {
            classifiers::fit(expert_spec, &train.subset(idx)?).map(Some)
        }
    };
    let easy_expert = expert(&part.easy)?;
    let difficult_expert = expert(&part.difficult)?;
    let degenerate = match (&easy_expert, &difficult_expert) {
        (Some(_), Some(_)) => Degenerate::None,
        (Some(_), None) => Degenerate::AllEasy,
        (None, Some(_)) => Degenerate::AllDifficult,
        (None, None) => return Err(Error::EmptyPartition),
    };
    let mut binary = vec![DIFFICULT_LABEL; train.len()];
    for &i in &part.easy {
        binary[i] = EASY_LABEL;
    }
    let pooled = LabeledDataset::new(train.features().to_vec(), train.dim(), binary, 2)?;
    Ok(CpcModel {
        theta: part.theta,
        easy_expert,
        difficult_expert,
        pooled,
        discriminator,
        seed,
        degenerate,
    })
}

fn route_of(label: usize) -> Route {
    if label == EASY_LABEL {
        Route::Easy
    } else {
        Route::Difficult
    }
}

impl CpcModel {
    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.pooled.dim() {
            return Err(Error::DimMismatch {
                expected: self.pooled.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn pooled_route(&self, i: usize) -> Route {
        route_of(self.pooled.label(i))
    }

    /// Easy/difficult verdict for `x` and the discriminator margin.
    pub fn discriminate(&self, x: &[f64]) -> Result<(Route, f64)> {
        self.check_dim(x)?;
        match self.degenerate {
            Degenerate::None => {}
            Degenerate::AllEasy => return Err(Error::DegenerateModel("all_easy")),
            Degenerate::AllDifficult => return Err(Error::DegenerateModel("all_difficult")),
        }
        let idx = neighbors(&self.pooled, x, self.discriminator.k)?;
        let nearest = self.pooled.label(idx[0]);
        if idx.iter().all(|&i| self.pooled.label(i) == nearest) {
            let route = route_of(nearest);
            return Ok((route, if route == Route::Easy { 1.0 } else { -1.0 }));
        }

        // Local standardization keeps the tiny softmax well conditioned
        // wherever the neighborhood sits in feature space.
        let local = self.pooled.subset(&idx)?;
        let scaler = Standardizer::fit(&local, 1e-8)?;
        let local = scaler.apply(&local)?;
        let query: Vec<f64> = x
            .iter()
            .zip(&scaler.mean)
            .zip(&scaler.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        let params = SgdParams {
            learning_rate: self.discriminator.learning_rate,
            momentum: self.discriminator.momentum,
            epochs: self.discriminator.epochs,
            batch_size: idx.len(),
            l2: self.discriminator.l2,
            seed: seed::derive(self.seed, &[seed::hash_f64s(x)]),
        };
        let (model, _) = LinearModel::fit(
            &local,
            &[DIFFICULT_LABEL, EASY_LABEL],
            &params,
            LinearLoss::CrossEntropy,
        )?;
        let p = model.probabilities(&query);
        let margin = p[1] - p[0];
        let route = if margin > 0.0 {
            Route::Easy
        } else if margin < 0.0 {
            Route::Difficult
        } else {
            route_of(nearest)
        };
        Ok((route, margin))
    }

    pub fn predict(&self, x: &[f64]) -> Result<RoutedPrediction> {
        self.check_dim(x)?;
        let (route, margin) = match self.degenerate {
            Degenerate::AllEasy => (Route::Easy, 1.0),
            Degenerate::AllDifficult => (Route::Difficult, -1.0),
            Degenerate::None => self.discriminate(x)?,
        };
        let expert = match route {
            Route::Easy => &self.easy_expert,
            Route::Difficult => &self.difficult_expert,
        };
        let label = expert.as_ref().expect("routed expert exists").predict(x)?;
        Ok(RoutedPrediction { route, label, margin })
    }

    pub fn predict_all(&self, ds: &LabeledDataset) -> Result<Vec<RoutedPrediction>> {
        (0..ds.len()).into_par_iter().map(|i| self.predict(ds.row(i))).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn discriminate(model: &CpcModel, x: &[f64]) -> Result<(Route, f64)> {
    model.discriminate(x)
}

pub fn cpc_predict(model: &CpcModel, x: &[f64]) -> Result<RoutedPrediction> {
    model.predict(x)
}

/// End-to-end CPC settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpcConfig {
    pub k_folds: usize,
    pub repetitions: usize,
    pub base_spec: ClassifierSpec,
    pub expert_spec: ClassifierSpec,
    pub theta: f64,
    pub discriminator: DiscriminatorConfig,
    pub ease_mode: EaseMode,
    pub member_training: MemberTraining,
    pub seed: u64,
}

impl CpcConfig {
    /// Uses `spec` for both the base members and the experts.
    pub fn with_classifier(spec: ClassifierSpec) -> Self {
        Self {
            k_folds: 5,
            repetitions: 3,
            base_spec: spec,
            expert_spec: spec,
            theta: 0.5,
            discriminator: DiscriminatorConfig::default(),
            ease_mode: EaseMode::IncludeAll,
            member_training: MemberTraining::SingleFold,
            seed: 0,
        }
    }
}

impl Default for CpcConfig {
    fn default() -> Self {
        Self::with_classifier(ClassifierSpec::softmax())
    }
}

/// Ensemble and ease scores computed once, reusable for any threshold.
#[derive(Debug, Clone)]
pub struct CpcTrainer {
    pub train: LabeledDataset,
    pub ensemble: BaseEnsemble,
    pub ease: EaseScores,
    pub config: CpcConfig,
}

impl CpcTrainer {
    pub fn new(train: &LabeledDataset, config: &CpcConfig) -> Result<Self> {
        let ensemble = train_base_ensemble_with(
            train,
            config.k_folds,
            config.repetitions,
            &config.base_spec,
            config.seed,
            config.member_training,
        )?;
        let ease = compute_ease(&ensemble, train, config.ease_mode)?;
        Ok(Self {
            train: train.clone(),
            ensemble,
            ease,
            config: *config,
        })
    }

    pub fn partition(&self, theta: f64) -> Result<SubspacePartition> {
        partition(&self.train, &self.ease, theta)
    }

    pub fn fit_theta(&self, theta: f64) -> Result<CpcModel> {
        let part = self.partition(theta)?;
        fit_cpc(
            &self.train,
            &part,
            &self.config.expert_spec,
            self.config.discriminator,
            self.config.seed,
        )
    }
}

/// Trains a CPC model at `config.theta`.
pub fn fit_pipeline(train: &LabeledDataset, config: &CpcConfig) -> Result<CpcModel> {
    CpcTrainer::new(train, config)?.fit_theta(config.theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_two_regime;

    fn fixture() -> LabeledDataset {
        generate_two_regime(60, 60, 3, 4, 5.0, 0.5, 3).unwrap()
    }

    fn ease_from_counts(counts: &[usize], n: usize) -> EaseScores {
        EaseScores {
            correct_counts: counts.to_vec(),
            voters: vec![n; counts.len()],
            ratios: counts.iter().map(|&c| c as f64 / n as f64).collect(),
            ensemble_size: n,
            mode: EaseMode::IncludeAll,
        }
    }

    #[test]
    fn ensemble_size_is_k_times_m() {
        let ds = fixture();
        let ens = train_base_ensemble(&ds, 5, 3, &ClassifierSpec::knn(1), 0).unwrap();
        assert_eq!(ens.len(), 15);
        for r in 0..3 {
            let mut seen: Vec<usize> = ens
                .members
                .iter()
                .filter(|m| m.repetition == r)
                .flat_map(|m| m.train_indices.clone())
                .collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..ds.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn two_fold_members_train_on_disjoint_halves() {
        let ds = fixture();
        let ens = train_base_ensemble(&ds, 2, 1, &ClassifierSpec::knn(1), 0).unwrap();
        assert_eq!(ens.len(), 2);
        let a = &ens.members[0].train_indices;
        let b = &ens.members[1].train_indices;
        assert_eq!(a.len(), 60);
        assert!(a.iter().all(|i| b.binary_search(i).is_err()));
    }

    #[test]
    fn ensemble_rejects_bad_k() {
        let ds = fixture();
        assert!(matches!(
            train_base_ensemble(&ds, 1, 1, &ClassifierSpec::knn(1), 0),
            Err(Error::BadK { .. })
        ));
    }

    #[test]
    fn ease_ratio_arithmetic() {
        let e = ease_from_counts(&[9, 15], 15);
        assert_eq!(e.ratios, vec![0.6, 1.0]);
    }

    #[test]
    fn exclude_in_fold_denominator() {
        let ds = fixture();
        let ens = train_base_ensemble(&ds, 5, 3, &ClassifierSpec::knn(1), 2).unwrap();
        let all = compute_ease(&ens, &ds, EaseMode::IncludeAll).unwrap();
        let ex = compute_ease(&ens, &ds, EaseMode::ExcludeInFold).unwrap();
        assert!(all.voters.iter().all(|&v| v == 15));
        assert!(ex.voters.iter().all(|&v| v == 12));
        // 1-NN members always get their own training points right.
        for i in 0..ds.len() {
            assert_eq!(all.correct_counts[i], ex.correct_counts[i] + 3);
        }
    }

    #[test]
    fn partition_boundaries() {
        let ds = fixture();
        let counts: Vec<usize> = (0..ds.len()).map(|i| i % 16).collect();
        let ease = ease_from_counts(&counts, 15);
        let p0 = partition(&ds, &ease, 0.0).unwrap();
        assert!(p0.difficult.is_empty());
        let p1 = partition(&ds, &ease, 1.01).unwrap();
        assert!(p1.easy.is_empty());
        let p = partition(&ds, &ease, 0.6).unwrap();
        assert!(p.easy.contains(&9), "R = 9/15 equals theta and must be easy");
        assert!(p.difficult.contains(&8));
    }

    #[test]
    fn partition_length_mismatch() {
        let ds = fixture();
        let ease = ease_from_counts(&[1, 2], 3);
        assert!(matches!(partition(&ds, &ease, 0.5), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn degenerate_flags_and_pool_labels() {
        let ds = fixture();
        let spec = ClassifierSpec::knn(3);
        let all_easy = SubspacePartition {
            theta: 0.0,
            easy: (0..ds.len()).collect(),
            difficult: vec![],
        };
        let m = fit_cpc(&ds, &all_easy, &spec, DiscriminatorConfig::default(), 0).unwrap();
        assert_eq!(m.degenerate, Degenerate::AllEasy);
        assert!(m.difficult_expert.is_none());
        assert!(matches!(m.discriminate(ds.row(0)), Err(Error::DegenerateModel(_))));
        assert_eq!(m.predict(ds.row(0)).unwrap().route, Route::Easy);

        let half = SubspacePartition {
            theta: 0.5,
            easy: (0..ds.len()).filter(|i| ds.label(*i) != 2).collect(),
            difficult: (0..ds.len()).filter(|i| ds.label(*i) == 2).collect(),
        };
        let m = fit_cpc(&ds, &half, &spec, DiscriminatorConfig::default(), 0).unwrap();
        assert_eq!(m.degenerate, Degenerate::None);
        assert_eq!(m.easy_expert.as_ref().unwrap().classes_seen, vec![0, 1]);
        let pos = m.pooled.labels().iter().filter(|&&l| l == EASY_LABEL).count();
        assert_eq!(pos, half.easy.len());
        assert_eq!(m.pooled.len() - pos, half.difficult.len());
    }

    #[test]
    fn unanimous_neighbors_short_circuit() {
        // Easy points near the origin, difficult ones far away.
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                if i < 5 {
                    vec![i as f64 * 0.1, 0.0]
                } else {
                    vec![100.0 + i as f64, 0.0]
                }
            })
            .collect();
        let ds = LabeledDataset::from_rows(&rows, vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 2).unwrap();
        let part = SubspacePartition {
            theta: 0.5,
            easy: (0..5).collect(),
            difficult: (5..10).collect(),
        };
        let disc = DiscriminatorConfig {
            k: 3,
            ..Default::default()
        };
        let m = fit_cpc(&ds, &part, &ClassifierSpec::knn(1), disc, 0).unwrap();
        assert_eq!(m.discriminate(&[0.2, 0.0]).unwrap(), (Route::Easy, 1.0));
        assert_eq!(m.discriminate(&[103.0, 0.0]).unwrap(), (Route::Difficult, -1.0));
    }

    #[test]
    fn k_larger_than_pool_is_clamped() {
        let ds = fixture();
        let counts: Vec<usize> = (0..ds.len()).map(|i| if i % 2 == 0 { 15 } else { 0 }).collect();
        let part = partition(&ds, &ease_from_counts(&counts, 15), 0.5).unwrap();
        let disc = DiscriminatorConfig {
            k: 10_000,
            ..Default::default()
        };
        let m = fit_cpc(&ds, &part, &ClassifierSpec::knn(1), disc, 0).unwrap();
        let (_, margin) = m.discriminate(ds.row(0)).unwrap();
        assert!(margin.abs() < 1.0);
    }

    #[test]
    fn routed_label_comes_from_routed_expert() {
        let ds = fixture();
        let mut cfg = CpcConfig::with_classifier(ClassifierSpec::softmax());
        cfg.theta = 0.6;
        let model = fit_pipeline(&ds, &cfg).unwrap();
        assert_eq!(model.degenerate, Degenerate::None);
        for x in ds.rows() {
            let p = model.predict(x).unwrap();
            let expert = match p.route {
                Route::Easy => model.easy_expert.as_ref(),
                Route::Difficult => model.difficult_expert.as_ref(),
            };
            assert_eq!(p.label, expert.unwrap().predict(x).unwrap());
        }
    }

    #[test]
    fn model_json_roundtrip() {
        let ds = fixture();
        let mut cfg = CpcConfig::with_classifier(ClassifierSpec::knn(3));
        cfg.theta = 0.7;
        let model = fit_pipeline(&ds, &cfg).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        assert!(json.contains("\"degenerate\""));
        let back: CpcModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
        assert_eq!(serde_json::to_string(&Route::Easy).unwrap(), "\"+\"");
    }
}
