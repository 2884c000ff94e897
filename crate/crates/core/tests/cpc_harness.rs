use cpc_core::classifiers::{self, ClassifierSpec};
use cpc_core::cpc::{
    fit_cpc, fit_pipeline, CpcConfig, CpcModel, CpcTrainer, DiscriminatorConfig, EaseMode, MemberTraining, Route,
    SubspacePartition,
};
use cpc_core::dataset::{generate_two_regime, LabeledDataset};
use cpc_core::harness::{cross_validate, default_grid, theta_sweep, PipelineConfig};
use cpc_core::seed;
use rand::Rng;
use rand_distr::StandardNormal;

fn fixture(seed: u64) -> LabeledDataset {
    generate_two_regime(80, 80, 3, 4, 6.0, 0.8, seed).unwrap()
}

fn blob(center: f64, n: usize, rng: &mut seed::Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            vec![
                center + rng.sample::<f64, _>(StandardNormal),
                rng.sample(StandardNormal),
            ]
        })
        .collect()
}

#[test]
fn discriminator_separates_two_clusters() {
    let mut rng = seed::rng(3);
    let mut rows = blob(-4.0, 150, &mut rng);
    rows.extend(blob(4.0, 150, &mut rng));
    let labels: Vec<usize> = (0..300).map(|i| i % 2).collect();
    let ds = LabeledDataset::from_rows(&rows, labels, 2).unwrap();
    let part = SubspacePartition {
        theta: 0.5,
        easy: (0..150).collect(),
        difficult: (150..300).collect(),
    };
    let model = fit_cpc(&ds, &part, &ClassifierSpec::knn(3), DiscriminatorConfig::default(), 1).unwrap();
    let mut agree = 0;
    for q in 0..200 {
        let easy_side = q % 2 == 0;
        let x = blob(if easy_side { -4.0 } else { 4.0 }, 1, &mut rng).remove(0);
        let (route, _) = model.discriminate(&x).unwrap();
        agree += usize::from((route == Route::Easy) == easy_side);
    }
    assert!(agree >= 190, "agreement {agree}/200");
}

#[test]
fn mixed_neighborhood_trains_local_softmax() {
    let ds = fixture(4);
    let cfg = CpcConfig {
        theta: 0.7,
        ..CpcConfig::default()
    };
    let model = fit_pipeline(&ds, &cfg).unwrap();
    let margins: Vec<f64> = ds.rows().map(|x| model.discriminate(x).unwrap().1).collect();
    assert!(
        margins.iter().any(|m| m.abs() < 1.0),
        "some neighborhoods should be mixed"
    );
    for (x, m) in ds.rows().zip(&margins) {
        assert_eq!(model.discriminate(x).unwrap().1, *m);
        assert!((-1.0..=1.0).contains(m));
    }
}

#[test]
fn boundary_thresholds_reproduce_baseline() {
    let train = fixture(5);
    let test = fixture(6);
    for spec in [
        ClassifierSpec::softmax(),
        ClassifierSpec::random_forest(),
        ClassifierSpec::knn(5),
    ] {
        let spec = spec.with_seed(13);
        let baseline = classifiers::fit(&spec, &train).unwrap().predict_all(&test).unwrap();
        let trainer = CpcTrainer::new(&train, &CpcConfig::with_classifier(spec)).unwrap();
        for theta in [0.0, 1.01] {
            let model = trainer.fit_theta(theta).unwrap();
            let labels: Vec<usize> = model.predict_all(&test).unwrap().iter().map(|p| p.label).collect();
            assert_eq!(labels, baseline, "{} theta {theta}", spec.name());
        }
    }
}

#[test]
fn complement_fold_members_and_excluded_votes() {
    let ds = fixture(7);
    let cfg = CpcConfig {
        member_training: MemberTraining::ComplementFolds,
        ease_mode: EaseMode::ExcludeInFold,
        ..CpcConfig::default()
    };
    let trainer = CpcTrainer::new(&ds, &cfg).unwrap();
    assert_eq!(trainer.ensemble.len(), 15);
    assert!(trainer.ensemble.members.iter().all(|m| m.train_indices.len() == 128));
    // Each sample sits in the training set of K-1 members per repetition.
    assert!(trainer.ease.voters.iter().all(|&v| v == 3));
}

#[test]
fn cpc_is_deterministic_and_serializable() {
    let ds = fixture(8);
    let cfg = CpcConfig {
        theta: 0.6,
        seed: 21,
        ..CpcConfig::default()
    };
    let a = fit_pipeline(&ds, &cfg).unwrap();
    let b = fit_pipeline(&ds, &cfg).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cpc.json");
    a.save(&path).unwrap();
    let back = CpcModel::load(&path).unwrap();
    assert_eq!(back.predict_all(&ds).unwrap(), a.predict_all(&ds).unwrap());
}

#[test]
fn sweep_at_zero_matches_baseline() {
    let train = fixture(9);
    let val = fixture(10);
    let cfg = CpcConfig::default();
    let s = theta_sweep(&train, &val, &default_grid(), &cfg).unwrap();
    assert_eq!(s.thetas.len(), 11);
    assert_eq!(s.accuracies[0], s.baseline_accuracy);
    let best = s.best_accuracy();
    let first = s.accuracies.iter().position(|a| *a == best).unwrap();
    assert_eq!(s.best_theta, s.thetas[first]);
    assert!(s.easy_sizes.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn cross_validation_protocol() {
    let ds = generate_two_regime(50, 50, 2, 3, 5.0, 1.0, 11).unwrap();
    let cfg = PipelineConfig::baseline(ClassifierSpec::softmax());
    let r = cross_validate(&ds, &cfg, 5, 3).unwrap();
    // One fold id per sample, and each fold's report counts exactly its
    // held-out samples.
    assert_eq!(r.fold_of.len(), ds.len());
    assert!(r.fold_of.iter().all(|&f| f < 5));
    for f in 0..5 {
        let held = r.fold_of.iter().filter(|&&g| g == f).count() as u64;
        assert_eq!(r.folds[f].matrix().total(), held);
    }
    let total: u64 = r.folds.iter().map(|f| f.matrix().total()).sum();
    assert_eq!(total, 100);
    let mean = r.accuracies.iter().sum::<f64>() / 5.0;
    assert!((r.mean - mean).abs() <= 1e-12);
    let again = cross_validate(&ds, &cfg, 5, 3).unwrap();
    assert_eq!(again.accuracies, r.accuracies);
}

#[test]
fn cross_validation_with_full_pipeline() {
    let ds = fixture(12);
    let cpc = CpcConfig {
        theta: 0.6,
        ..CpcConfig::default()
    };
    let cfg = PipelineConfig {
        normalize: false,
        zca_epsilon: Some(1e-6),
        extractor: Some(cpc_core::harness::ExtractorConfig {
            arch: "in:4 concat:8 head:3".into(),
            train: cpc_core::feature_extractor::TrainConfig {
                epochs: 3,
                ..Default::default()
            },
        }),
        mode: cpc_core::harness::PipelineMode::Cpc(cpc),
    };
    let r = cross_validate(&ds, &cfg, 3, 0).unwrap();
    assert_eq!(r.folds.len(), 3);
    assert!(r.folds.iter().all(|f| f.routes.is_some()));
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["config"]["mode"], "cpc");
}
