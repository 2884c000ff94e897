//! Brute-force Euclidean nearest neighbors.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Indices of the `k` rows closest to `x`, ascending by distance with ties
/// broken by lower index. `k` larger than the dataset returns every row.
pub fn neighbors(ds: &LabeledDataset, x: &[f64], k: usize) -> Result<Vec<usize>> {
    if x.len() != ds.dim() {
        return Err(Error::DimMismatch {
            expected: ds.dim(),
            found: x.len(),
        });
    }
    if k == 0 {
        return Err(Error::BadHyperparams("k must be at least 1".into()));
    }
    let mut dist: Vec<(f64, usize)> = ds.rows().map(|r| euclidean(r, x)).zip(0..).collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(dist.len());
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, by_distance);
        dist.truncate(k);
    }
    dist.sort_unstable_by(by_distance);
    Ok(dist.into_iter().map(|(_, i)| i).collect())
}

/// Stores the training set verbatim and votes among the `k` nearest rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub train: LabeledDataset,
}

impl KnnModel {
    pub fn fit(ds: &LabeledDataset, k: usize) -> Self {
        Self { k, train: ds.clone() }
    }

    /// Majority label of the neighbors. When classes tie on votes, the tied
    /// class whose member is nearest wins.
    pub fn predict(&self, x: &[f64]) -> usize {
        let idx = neighbors(&self.train, x, self.k).expect("dimension checked by caller");
        vote(idx.iter().map(|&i| self.train.label(i)), self.train.class_count())
    }
}

/// Plurality over labels given in nearest-first order.
pub(crate) fn vote(labels_nearest_first: impl Iterator<Item = usize> + Clone, class_count: usize) -> usize {
    let mut counts = vec![0usize; class_count];
    for l in labels_nearest_first.clone() {
        counts[l] += 1;
    }
    let top = *counts.iter().max().expect("at least one class");
    labels_nearest_first
        .into_iter()
        .find(|&l| counts[l] == top)
        .expect("top count belongs to some neighbor")
}
