#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Complexity perception classification.
//!
//! A base ensemble of weak classifiers scores how reliably each training
//! sample is classified. A threshold splits the training set into an easy
//! and a difficult subspace, each gets its own expert classifier, and a
//! per-query KNN-softmax discriminator routes every test sample to one of
//! the two experts.
//!
//! Modules:
//! - [`dataset`]: CSV loading, splits, folds, synthetic two-regime data
//! - [`preprocess`]: per-sample normalization and ZCA whitening
//! - [`classifiers`]: softmax, linear SVM, random forest, KNN
//! - [`feature_extractor`]: residual / concat-residual MLP feature extractor
//! - [`cpc`]: ease scoring, partitioning, experts and routing
//! - [`harness`]: metrics, cross-validation, threshold sweeps, reports

pub mod classifiers;
pub mod cpc;
pub mod dataset;
pub mod error;
pub mod feature_extractor;
pub mod harness;
pub mod preprocess;
pub mod seed;

pub use error::{Error, Result};
