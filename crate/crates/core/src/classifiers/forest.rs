//! Bagged CART trees split on Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ForestParams;
use crate::dataset::LabeledDataset;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: usize,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub class_count: usize,
    pub trees: Vec<Tree>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

/// Most frequent class; ties go to the lowest id.
fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &k) in counts.iter().enumerate() {
        if k > counts[best] {
            best = c;
        }
    }
    best
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

struct Grower<'a> {
    ds: &'a LabeledDataset,
    max_depth: Option<usize>,
    max_features: usize,
    rng: seed::Rng,
    nodes: Vec<Node>,
    features: Vec<usize>,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.ds.class_count()];
        for &i in idx {
            counts[self.ds.label(i)] += 1;
        }
        counts
    }

    /// Best Gini split on one feature, if the feature takes two or more values.
    fn best_on_feature(&self, idx: &[usize], feature: usize, total: &[usize]) -> Option<SplitCandidate> {
        let mut pairs: Vec<(f64, usize)> = idx
            .iter()
            .map(|&i| (self.ds.row(i)[feature], self.ds.label(i)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let mut left = vec![0; total.len()];
        let mut best: Option<SplitCandidate> = None;
        for s in 1..n {
            left[pairs[s - 1].1] += 1;
            let (lo, hi) = (pairs[s - 1].0, pairs[s].0);
            if lo == hi {
                continue;
            }
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let impurity = (s as f64 * gini(&left, s) + (n - s) as f64 * gini(&right, n - s)) / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: majority(&counts),
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || self.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }

        // Try features in random order; keep looking past `max_features`
        // until some feature offers a valid split.
        self.features.shuffle(&mut self.rng);
        let mut best: Option<SplitCandidate> = None;
        for t in 0..self.features.len() {
            if t >= self.max_features && best.is_some() {
                break;
            }
            let f = self.features[t];
            if let Some(c) = self.best_on_feature(&idx, f, &counts) {
                if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else {
            return id;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.ds.row(i)[split.feature] <= split.threshold);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

impl Forest {
    pub fn fit(ds: &LabeledDataset, params: &ForestParams) -> Self {
        let d = ds.dim();
        let max_features = params
            .max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d);
        let n = ds.len();
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(params.seed, &[t as u64]));
                let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut grower = Grower {
                    ds,
                    max_depth: params.max_depth,
                    max_features,
                    rng,
                    nodes: Vec::new(),
                    features: (0..d).collect(),
                };
                grower.grow(bootstrap, 0);
                Tree { nodes: grower.nodes }
            })
            .collect();
        Self {
            class_count: ds.class_count(),
            trees,
        }
    }

    /// Majority vote over trees; ties go to the lowest class id.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0; self.class_count];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        majority(&votes)
    }
}
