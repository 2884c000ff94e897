//! Per-sample normalization and ZCA whitening.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

pub const DEFAULT_ZCA_EPSILON: f64 = 1e-6;
pub const DEFAULT_NORM_EPSILON: f64 = 1e-8;

/// Centers each row on its own mean and scales by its own standard
/// deviation (population form), floored at `eps_norm`.
pub fn normalize_samples(ds: &LabeledDataset, eps_norm: f64) -> Result<LabeledDataset> {
    if !(eps_norm > 0.0) {
        return Err(Error::BadHyperparams(format!(
            "eps_norm must be positive, got {eps_norm}"
        )));
    }
    let d = ds.dim() as f64;
    let mut out = Vec::with_capacity(ds.features().len());
    for row in ds.rows() {
        let mean = row.iter().sum::<f64>() / d;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
        let scale = var.sqrt().max(eps_norm);
        out.extend(row.iter().map(|v| (v - mean) / scale));
    }
    ds.with_features(out, ds.dim())
}

/// Column-wise standardization fitted on one dataset and reusable on others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &LabeledDataset, eps: f64) -> Result<Self> {
        let n = ds.len() as f64;
        let d = ds.dim();
        let mut mean = vec![0.0; d];
        for row in ds.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in ds.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var.into_iter().map(|s| (s / n).sqrt().max(eps)).collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        check_dim(self.mean.len(), ds.dim())?;
        let mut out = Vec::with_capacity(ds.features().len());
        for row in ds.rows() {
            out.extend(
                row.iter()
                    .zip(&self.mean)
                    .zip(&self.scale)
                    .map(|((v, m), s)| (v - m) / s),
            );
        }
        ds.with_features(out, ds.dim())
    }
}

/// Zero-phase whitening `x ↦ W (x − mean)` with `W = U (Λ + εI)^{-1/2} Uᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningTransform {
    pub mean: Vec<f64>,
    pub rotation: Vec<Vec<f64>>,
    pub epsilon: f64,
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimMismatch { expected, found });
    }
    Ok(())
}

/// Column means and sample covariance (divisor n − 1).
pub fn mean_and_covariance(ds: &LabeledDataset) -> (DVector<f64>, DMatrix<f64>) {
    let n = ds.len();
    let d = ds.dim();
    let x = DMatrix::from_row_slice(n, d, ds.features());
    let mean = x.row_mean().transpose();
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    (mean, cov)
}

pub fn fit_zca(ds: &LabeledDataset, epsilon: f64) -> Result<WhiteningTransform> {
    if ds.len() < 2 {
        return Err(Error::TooFewSamples(ds.len()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::BadHyperparams(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let (mean, cov) = mean_and_covariance(ds);
    let eig = SymmetricEigen::new(cov);
    let inv_sqrt = eig.eigenvalues.map(|l| (l.max(0.0) + epsilon).powf(-0.5));
    let u = &eig.eigenvectors;
    let w = u * DMatrix::from_diagonal(&inv_sqrt) * u.transpose();
    // Round-off leaves W slightly asymmetric; project back.
    let w = (&w + w.transpose()) * 0.5;
    let rotation = w.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(WhiteningTransform {
        mean: mean.iter().copied().collect(),
        rotation,
        epsilon,
    })
}

impl WhiteningTransform {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, x: &[f64], out: &mut Vec<f64>) {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        out.extend(
            self.rotation
                .iter()
                .map(|w| w.iter().zip(&centered).map(|(a, b)| a * b).sum::<f64>()),
        );
    }

    pub fn apply(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        check_dim(self.dim(), ds.dim())?;
        let mut out = Vec::with_capacity(ds.features().len());
        for row in ds.rows() {
            self.transform_row(row, &mut out);
        }
        ds.with_features(out, ds.dim())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: Self = serde_json::from_str(&text)?;
        let d = t.mean.len();
        if t.rotation.len() != d || t.rotation.iter().any(|r| r.len() != d) {
            return Err(Error::DimMismatch {
                expected: d,
                found: t.rotation.len(),
            });
        }
        Ok(t)
    }
}

pub fn apply_whitening(t: &WhiteningTransform, ds: &LabeledDataset) -> Result<LabeledDataset> {
    t.apply(ds)
}
