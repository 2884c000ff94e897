//! Base classifiers behind one train/predict contract: multinomial softmax,
//! one-vs-rest linear SVM, Gini random forest and k-nearest neighbors.

mod forest;
mod knn;
mod linear;

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

pub use forest::{Forest, Tree};
pub use knn::{neighbors, KnnModel};
pub(crate) use linear::{cross_entropy, softmax_in_place};
pub use linear::{LinearLoss, LinearModel};

/// Optimizer settings shared by the linear models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdParams {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SgdParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.5,
            epochs: 100,
            batch_size: 128,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl SgdParams {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadHyperparams(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.l2 >= 0.0) {
            return bad(format!("L2 strength must be non-negative, got {}", self.l2));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    #[serde(flatten)]
    pub sgd: SgdParams,
    /// Hinge margin: a sample contributes loss while `y·score < margin`.
    pub margin: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            sgd: SgdParams::default(),
            margin: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    /// Features tried per node; `None` means ⌈√d⌉.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: None,
            max_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Softmax(SgdParams),
    LinearSvm(SvmParams),
    RandomForest(ForestParams),
    Knn(KnnParams),
}

impl ClassifierSpec {
    pub fn softmax() -> Self {
        Self::Softmax(SgdParams::default())
    }

    pub fn linear_svm() -> Self {
        Self::LinearSvm(SvmParams::default())
    }

    pub fn random_forest() -> Self {
        Self::RandomForest(ForestParams::default())
    }

    pub fn knn(k: usize) -> Self {
        Self::Knn(KnnParams { k })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Softmax(_) => "softmax",
            Self::LinearSvm(_) => "linear_svm",
            Self::RandomForest(_) => "random_forest",
            Self::Knn(_) => "knn",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::Softmax(p) => p.seed,
            Self::LinearSvm(p) => p.sgd.seed,
            Self::RandomForest(p) => p.seed,
            Self::Knn(_) => 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            Self::Softmax(p) => p.seed = seed,
            Self::LinearSvm(p) => p.sgd.seed = seed,
            Self::RandomForest(p) => p.seed = seed,
            Self::Knn(_) => {}
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Softmax(p) => p.validate(),
            Self::LinearSvm(p) => {
                p.sgd.validate()?;
                if !(p.margin > 0.0) {
                    return Err(Error::BadHyperparams(format!(
                        "hinge margin must be positive, got {}",
                        p.margin
                    )));
                }
                Ok(())
            }
            Self::RandomForest(p) => {
                if p.trees == 0 {
                    return Err(Error::BadHyperparams("tree count must be at least 1".into()));
                }
                if p.max_depth == Some(0) || p.max_features == Some(0) {
                    return Err(Error::BadHyperparams(
                        "max depth and max features must be positive".into(),
                    ));
                }
                Ok(())
            }
            Self::Knn(p) => {
                if p.k == 0 {
                    return Err(Error::BadHyperparams("k must be at least 1".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedModel {
    /// Only one class was seen during training.
    Constant {
        class: usize,
    },
    Linear(LinearModel),
    Forest(Forest),
    Knn(KnnModel),
}

/// A fitted classifier. Predictions are always drawn from `classes_seen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub spec: ClassifierSpec,
    pub dim: usize,
    pub class_count: usize,
    pub classes_seen: Vec<usize>,
    pub model: FittedModel,
}

static FIT_CALLS: AtomicU64 = AtomicU64::new(0);

/// Process-wide number of [`fit`] invocations so far.
pub fn fit_call_count() -> u64 {
    FIT_CALLS.load(Ordering::Relaxed)
}

pub fn fit(spec: &ClassifierSpec, ds: &LabeledDataset) -> Result<TrainedClassifier> {
    FIT_CALLS.fetch_add(1, Ordering::Relaxed);
    spec.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes_seen = ds.classes_present();
    let model = if let [only] = classes_seen[..] {
        FittedModel::Constant { class: only }
    } else {
        match spec {
            ClassifierSpec::Softmax(p) => {
                FittedModel::Linear(LinearModel::fit(ds, &classes_seen, p, LinearLoss::CrossEntropy)?.0)
            }
            ClassifierSpec::LinearSvm(p) => FittedModel::Linear(
                LinearModel::fit(ds, &classes_seen, &p.sgd, LinearLoss::Hinge { margin: p.margin })?.0,
            ),
            ClassifierSpec::RandomForest(p) => FittedModel::Forest(Forest::fit(ds, p)),
            ClassifierSpec::Knn(p) => FittedModel::Knn(KnnModel::fit(ds, p.k)),
        }
    };
    Ok(TrainedClassifier {
        spec: *spec,
        dim: ds.dim(),
        class_count: ds.class_count(),
        classes_seen,
        model,
    })
}

impl TrainedClassifier {
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(match &self.model {
            FittedModel::Constant { class } => *class,
            FittedModel::Linear(m) => m.predict(x),
            FittedModel::Forest(f) => f.predict(x),
            FittedModel::Knn(m) => m.predict(x),
        })
    }

    /// Predictions for every row, in row order.
    pub fn predict_all(&self, ds: &LabeledDataset) -> Result<Vec<usize>> {
        if ds.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: ds.dim(),
            });
        }
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

/// Convenience form of [`TrainedClassifier::predict`].
pub fn predict(clf: &TrainedClassifier, x: &[f64]) -> Result<usize> {
    clf.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_class() -> LabeledDataset {
        LabeledDataset::from_rows(&[vec![0.0, 1.0], vec![2.0, -1.0]], vec![2, 2], 4).unwrap()
    }

    #[test]
    fn single_class_is_constant_for_every_kind() {
        let ds = single_class();
        for spec in [
            ClassifierSpec::softmax(),
            ClassifierSpec::linear_svm(),
            ClassifierSpec::random_forest(),
            ClassifierSpec::knn(3),
        ] {
            let clf = fit(&spec, &ds).unwrap();
            assert_eq!(clf.classes_seen, vec![2]);
            assert_eq!(clf.predict(&[100.0, -7.0]).unwrap(), 2);
        }
    }

    #[test]
    fn bad_hyperparams_rejected() {
        let ds = single_class();
        let p = SgdParams {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            fit(&ClassifierSpec::Softmax(p), &ds),
            Err(Error::BadHyperparams(_))
        ));
        let p = ForestParams {
            trees: 0,
            ..Default::default()
        };
        assert!(matches!(
            fit(&ClassifierSpec::RandomForest(p), &ds),
            Err(Error::BadHyperparams(_))
        ));
        assert!(matches!(
            fit(&ClassifierSpec::knn(0), &ds),
            Err(Error::BadHyperparams(_))
        ));
    }

    #[test]
    fn predict_checks_dimension() {
        let clf = fit(&ClassifierSpec::knn(1), &single_class()).unwrap();
        assert!(matches!(
            clf.predict(&[1.0]),
            Err(Error::DimMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn spec_json_is_tagged() {
        let v = serde_json::to_value(ClassifierSpec::linear_svm()).unwrap();
        assert_eq!(v["kind"], "linear_svm");
        assert_eq!(v["margin"], 1.0);
        assert_eq!(v["learning_rate"], 0.05);
        let back: ClassifierSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, ClassifierSpec::linear_svm());
    }

    #[test]
    fn defaults_match_documented_values() {
        let p = SgdParams::default();
        assert_eq!(
            (p.learning_rate, p.momentum, p.batch_size, p.l2, p.epochs),
            (0.05, 0.5, 128, 1e-4, 100)
        );
        let f = ForestParams::default();
        assert_eq!((f.trees, f.max_depth, f.max_features), (100, None, None));
    }
}
