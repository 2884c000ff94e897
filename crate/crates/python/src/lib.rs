//! Python bindings for the CPC core library.
//!
//! Reports and other structured results are returned as plain Python
//! dictionaries decoded from their JSON form.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use cpc_core::classifiers::{self, ClassifierSpec, TrainedClassifier};
use cpc_core::cpc::{fit_pipeline, CpcConfig, CpcModel, EaseMode};
use cpc_core::dataset::{generate_two_regime, load_dataset, split, LabeledDataset, SplitSpec};
use cpc_core::feature_extractor::{MlpModel, TrainConfig};
use cpc_core::harness::{self, PipelineConfig};
use cpc_core::preprocess::{self, WhiteningTransform};

fn err(e: cpc_core::error::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

fn classifier_spec(name: &str, seed: u64, knn_k: usize) -> PyResult<ClassifierSpec> {
    let spec = match name {
        "softmax" => ClassifierSpec::softmax(),
        "svm" => ClassifierSpec::linear_svm(),
        "forest" => ClassifierSpec::random_forest(),
        "knn" => ClassifierSpec::knn(knn_k),
        other => return Err(PyValueError::new_err(format!("unknown classifier {other:?}"))),
    };
    Ok(spec.with_seed(seed))
}

#[pyclass(name = "Dataset", module = "cpc_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset(LabeledDataset);

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (rows, labels, class_count=None))]
    fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, class_count: Option<usize>) -> PyResult<Self> {
        let classes = class_count.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        LabeledDataset::from_rows(&rows, labels, classes).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (n_easy, n_hard, classes=4, dim=8, easy_margin=6.0, hard_margin=0.8, seed=0))]
    fn two_regime(
        n_easy: usize,
        n_hard: usize,
        classes: usize,
        dim: usize,
        easy_margin: f64,
        hard_margin: f64,
        seed: u64,
    ) -> PyResult<Self> {
        generate_two_regime(n_easy, n_hard, classes, dim, easy_margin, hard_margin, seed)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (path, header=false))]
    fn load_csv(path: &str, header: bool) -> PyResult<Self> {
        load_dataset(path, header).map(Self).map_err(err)
    }

    fn save_csv(&self, path: &str) -> PyResult<()> {
        self.0.save_csv(path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn class_count(&self) -> usize {
        self.0.class_count()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.0.labels().to_vec()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.0.rows().map(<[f64]>::to_vec).collect()
    }

    fn subset(&self, indices: Vec<usize>) -> PyResult<Self> {
        self.0.subset(&indices).map(Self).map_err(err)
    }

    /// Shuffled train/val/test split.
    #[pyo3(signature = (train=0.8, val=0.1, test=0.1, seed=0))]
    fn split(&self, train: f64, val: f64, test: f64, seed: u64) -> PyResult<(Self, Self, Self)> {
        let (a, b, c) = split(&self.0, &SplitSpec::new(train, val, test, seed)).map_err(err)?;
        Ok((Self(a), Self(b), Self(c)))
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, dim={}, classes={})",
            self.0.len(),
            self.0.dim(),
            self.0.class_count()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (ds, eps=1e-8))]
fn normalize_samples(ds: &PyDataset, eps: f64) -> PyResult<PyDataset> {
    preprocess::normalize_samples(&ds.0, eps).map(PyDataset).map_err(err)
}

#[pyclass(name = "Whitening", module = "cpc_py", frozen)]
struct PyWhitening(WhiteningTransform);

#[pymethods]
impl PyWhitening {
    #[staticmethod]
    #[pyo3(signature = (ds, epsilon=1e-6))]
    fn fit(ds: &PyDataset, epsilon: f64) -> PyResult<Self> {
        preprocess::fit_zca(&ds.0, epsilon).map(Self).map_err(err)
    }

    fn apply(&self, ds: &PyDataset) -> PyResult<PyDataset> {
        self.0.apply(&ds.0).map(PyDataset).map_err(err)
    }

    #[getter]
    fn rotation(&self) -> Vec<Vec<f64>> {
        self.0.rotation.clone()
    }
}

#[pyclass(name = "Classifier", module = "cpc_py", frozen)]
struct PyClassifier(TrainedClassifier);

#[pymethods]
impl PyClassifier {
    /// Train `kind` (softmax, svm, forest or knn) on `ds`.
    #[staticmethod]
    #[pyo3(signature = (ds, kind="softmax", seed=0, knn_k=5))]
    fn fit(ds: &PyDataset, kind: &str, seed: u64, knn_k: usize) -> PyResult<Self> {
        let spec = classifier_spec(kind, seed, knn_k)?;
        classifiers::fit(&spec, &ds.0).map(Self).map_err(err)
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<usize> {
        self.0.predict(&x).map_err(err)
    }

    fn predict_all(&self, ds: &PyDataset) -> PyResult<Vec<usize>> {
        self.0.predict_all(&ds.0).map_err(err)
    }
}

/// Indices of the `k` nearest rows of `ds` to `x`, ties broken by index.
#[pyfunction]
fn neighbors(ds: &PyDataset, x: Vec<f64>, k: usize) -> PyResult<Vec<usize>> {
    classifiers::neighbors(&ds.0, &x, k).map_err(err)
}

#[pyclass(name = "Mlp", module = "cpc_py", frozen)]
struct PyMlp(MlpModel);

#[pymethods]
impl PyMlp {
    #[new]
    #[pyo3(signature = (arch, seed=0))]
    fn new(arch: &str, seed: u64) -> PyResult<Self> {
        MlpModel::from_arch_str(arch, seed).map(Self).map_err(err)
    }

    /// Returns the trained model and its per-epoch report.
    #[pyo3(signature = (ds, epochs=30, learning_rate=0.05, momentum=0.5, dropout=0.0, batch_size=32, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn train<'py>(
        &self,
        py: Python<'py>,
        ds: &PyDataset,
        epochs: usize,
        learning_rate: f64,
        momentum: f64,
        dropout: f64,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<(Self, Bound<'py, PyAny>)> {
        let cfg = TrainConfig {
            epochs,
            learning_rate,
            momentum,
            dropout,
            batch_size,
            seed,
            ..TrainConfig::default()
        };
        let (model, report) = self.0.train(&ds.0, &cfg).map_err(err)?;
        Ok((Self(model), to_py(py, &report)?))
    }

    fn loss(&self, ds: &PyDataset) -> PyResult<f64> {
        self.0.loss(&ds.0).map_err(err)
    }

    fn extract(&self, ds: &PyDataset) -> PyResult<PyDataset> {
        self.0.extract_features(&ds.0).map(PyDataset).map_err(err)
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<usize> {
        self.0.predict(&x).map_err(err)
    }

    fn parameters(&self) -> Vec<f64> {
        self.0.parameters()
    }
}

#[pyclass(name = "Cpc", module = "cpc_py", frozen)]
struct PyCpc(CpcModel);

#[pymethods]
impl PyCpc {
    /// Build the ensemble, partition at `theta` and train both experts and
    /// the discriminator.
    #[staticmethod]
    #[pyo3(signature = (ds, theta=0.5, kind="softmax", k_folds=5, repetitions=3, exclude_in_fold=false, seed=0, knn_k=5))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        ds: &PyDataset,
        theta: f64,
        kind: &str,
        k_folds: usize,
        repetitions: usize,
        exclude_in_fold: bool,
        seed: u64,
        knn_k: usize,
    ) -> PyResult<Self> {
        let cfg = CpcConfig {
            theta,
            k_folds,
            repetitions,
            seed,
            ease_mode: if exclude_in_fold {
                EaseMode::ExcludeInFold
            } else {
                EaseMode::IncludeAll
            },
            ..CpcConfig::with_classifier(classifier_spec(kind, seed, knn_k)?)
        };
        fit_pipeline(&ds.0, &cfg).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        CpcModel::load(path).map(Self).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    /// `(route, label, margin)` with route `"+"` (easy) or `"-"` (difficult).
    fn predict(&self, x: Vec<f64>) -> PyResult<(char, usize, f64)> {
        let p = self.0.predict(&x).map_err(err)?;
        Ok((p.route.symbol(), p.label, p.margin))
    }

    fn predict_all(&self, ds: &PyDataset) -> PyResult<Vec<usize>> {
        Ok(self
            .0
            .predict_all(&ds.0)
            .map_err(err)?
            .iter()
            .map(|p| p.label)
            .collect())
    }

    fn evaluate<'py>(&self, py: Python<'py>, ds: &PyDataset) -> PyResult<Bound<'py, PyAny>> {
        let preds = self.0.predict_all(&ds.0).map_err(err)?;
        let report = harness::evaluate_routed(&preds, ds.0.labels(), ds.0.class_count()).map_err(err)?;
        to_py(py, &report)
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta
    }
}

#[pyfunction]
#[pyo3(signature = (preds, truth, class_count))]
fn evaluate<'py>(
    py: Python<'py>,
    preds: Vec<usize>,
    truth: Vec<usize>,
    class_count: usize,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &harness::evaluate(&preds, &truth, class_count).map_err(err)?)
}

/// Accuracy on `val` for each threshold in `grid`, training the ensemble once.
#[pyfunction]
#[pyo3(signature = (train, val, grid=None, kind="softmax", seed=0))]
fn theta_sweep<'py>(
    py: Python<'py>,
    train: &PyDataset,
    val: &PyDataset,
    grid: Option<Vec<f64>>,
    kind: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let grid = grid.unwrap_or_else(harness::default_grid);
    let cfg = CpcConfig {
        seed,
        ..CpcConfig::with_classifier(classifier_spec(kind, seed, 5)?)
    };
    to_py(py, &harness::theta_sweep(&train.0, &val.0, &grid, &cfg).map_err(err)?)
}

/// Stratified K-fold cross-validation of the baseline (`theta=None`) or of
/// CPC at a fixed threshold.
#[pyfunction]
#[pyo3(signature = (ds, folds=5, kind="softmax", theta=None, seed=0))]
fn cross_validate<'py>(
    py: Python<'py>,
    ds: &PyDataset,
    folds: usize,
    kind: &str,
    theta: Option<f64>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = classifier_spec(kind, seed, 5)?;
    let cfg = match theta {
        None => PipelineConfig::baseline(spec),
        Some(theta) => PipelineConfig::cpc(CpcConfig {
            theta,
            seed,
            ..CpcConfig::with_classifier(spec)
        }),
    };
    to_py(py, &harness::cross_validate(&ds.0, &cfg, folds, seed).map_err(err)?)
}

#[pymodule]
fn cpc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyWhitening>()?;
    m.add_class::<PyClassifier>()?;
    m.add_class::<PyMlp>()?;
    m.add_class::<PyCpc>()?;
    m.add_function(wrap_pyfunction!(normalize_samples, m)?)?;
    m.add_function(wrap_pyfunction!(neighbors, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(theta_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    Ok(())
}
