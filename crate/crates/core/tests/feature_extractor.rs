use cpc_core::dataset::{generate_two_regime, LabeledDataset};
use cpc_core::feature_extractor::{Activation, Architecture, MlpModel, TrainConfig};
use cpc_core::seed;
use cpc_core::Error;
use rand::Rng;

fn fixture() -> LabeledDataset {
    generate_two_regime(200, 200, 4, 8, 6.0, 0.8, 17).unwrap()
}

fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

/// Central differences of the mean batch loss, one parameter at a time.
fn numeric_gradient(model: &MlpModel, ds: &LabeledDataset, h: f64) -> Vec<f64> {
    let count = model.parameters().len();
    (0..count)
        .map(|k| {
            let at = |delta: f64| {
                let mut m = model.clone();
                *m.parameters_mut().nth(k).unwrap() += delta;
                m.loss(ds).unwrap()
            };
            (at(h) - at(-h)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn gradient_check_single_model_all_block_kinds() {
    let model = MlpModel::from_arch_str("in:4 fc:5 add:5 concat:3 head:3", 8).unwrap();
    let mut rng = seed::rng(1);
    let mut rows = Vec::new();
    while rows.len() < 4 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
        let clear = model
            .pre_activations(&x)
            .unwrap()
            .iter()
            .flatten()
            .all(|p| p.abs() >= 1e-3);
        if clear {
            rows.push(x);
        }
    }
    let ds = LabeledDataset::from_rows(&rows, vec![0, 1, 2, 1], 3).unwrap();
    let (_, grads) = model.backward(&ds, &[0, 1, 2, 3]).unwrap();
    let numeric = numeric_gradient(&model, &ds, 1e-5);
    let worst = grads
        .flatten()
        .iter()
        .zip(&numeric)
        .map(|(a, n)| rel_err(*a, *n))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4, "max relative error {worst}");
}

#[test]
fn saturated_softmax_has_vanishing_gradient() {
    // Two far-apart points, a head scaled until the softmax saturates.
    let rows = vec![vec![10.0, 0.0], vec![-10.0, 0.0]];
    let ds = LabeledDataset::from_rows(&rows, vec![0, 1], 2).unwrap();
    let arch: Architecture = "in:2 fc:2 head:2".parse().unwrap();
    let mut model = MlpModel::new(&arch, Activation::Identity, 0).unwrap();
    model.blocks[0].transform.weights = vec![1.0, 0.0, 0.0, 1.0];
    model.head.weights = vec![50.0, 0.0, -50.0, 0.0];
    let (loss, grads) = model.backward(&ds, &[0, 1]).unwrap();
    assert!(loss < 1e-12);
    assert!(grads.norm() <= 1e-3, "gradient norm {}", grads.norm());
}

#[test]
fn training_reduces_loss_on_fixture() {
    let ds = fixture();
    let model = MlpModel::from_arch_str("in:8 concat:32 concat:32 head:4", 5).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        seed: 5,
        ..Default::default()
    };
    let (_, report) = model.train(&ds, &cfg).unwrap();
    assert_eq!(report.epoch_losses.len(), 30);
    assert!(report.final_loss() < report.initial_loss);
}

#[test]
fn training_is_reproducible() {
    let ds = fixture();
    let model = MlpModel::from_arch_str("in:8 add:8 fc:6 head:4", 2).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        seed: 11,
        ..Default::default()
    };
    let a = model.train(&ds, &cfg).unwrap();
    let b = model.train(&ds, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_epochs_returns_model_unchanged() {
    let ds = fixture();
    let model = MlpModel::from_arch_str("in:8 concat:4 head:4", 3).unwrap();
    let cfg = TrainConfig {
        epochs: 0,
        ..Default::default()
    };
    let (trained, report) = model.train(&ds, &cfg).unwrap();
    assert_eq!(trained, model);
    assert!(report.epoch_losses.is_empty());
}

#[test]
fn huge_learning_rate_diverges() {
    let ds = fixture();
    let model = MlpModel::from_arch_str("in:8 concat:32 concat:32 head:4", 5).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e3,
        epochs: 30,
        ..Default::default()
    };
    let err = model.train(&ds, &cfg).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }), "{err}");
    assert!(err.is_numerical());
}

#[test]
fn extracted_features_have_tap_width_and_labels() {
    let ds = fixture();
    let model = MlpModel::from_arch_str("in:8 concat:16 tap:0 fc:5 head:4", 1).unwrap();
    let a = model.extract_features(&ds).unwrap();
    let b = model.extract_features(&ds).unwrap();
    assert_eq!(a.dim(), 24);
    assert_eq!(a, b);
    assert_eq!(a.labels(), ds.labels());
}

#[test]
fn model_json_roundtrip() {
    let model = MlpModel::from_arch_str("in:3 add:3 concat:2 head:2", 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    assert_eq!(MlpModel::load(&path).unwrap(), model);
}

#[test]
fn backward_rejects_empty_batch() {
    let ds = fixture();
    let model = MlpModel::from_arch_str("in:8 fc:4 head:4", 0).unwrap();
    assert!(model.backward(&ds, &[]).is_err());
}
