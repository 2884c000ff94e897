//! Linear models trained by mini-batch SGD with momentum: multinomial
//! cross-entropy (softmax regression) and one-vs-rest hinge (linear SVM).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::SgdParams;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "loss", rename_all = "snake_case")]
pub enum LinearLoss {
    CrossEntropy,
    Hinge { margin: f64 },
}

/// One score row per seen class: `score_l(x) = w_l·x + b_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub loss: LinearLoss,
    /// Global class id of each score row.
    pub classes: Vec<usize>,
    pub dim: usize,
    /// Row-major `classes.len() × dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// `log Σ exp(s) − s[target]`, computed stably.
pub(crate) fn cross_entropy(scores: &[f64], target: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    lse - scores[target]
}

impl LinearModel {
    fn zeros(classes: &[usize], dim: usize, loss: LinearLoss) -> Self {
        Self {
            loss,
            classes: classes.to_vec(),
            dim,
            weights: vec![0.0; classes.len() * dim],
            bias: vec![0.0; classes.len()],
        }
    }

    pub fn scores_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.dim)
                .zip(&self.bias)
                .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b),
        );
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.classes.len());
        self.scores_into(x, &mut out);
        out
    }

    /// Softmax of the class scores, aligned with `classes`.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.scores(x);
        softmax_in_place(&mut s);
        s
    }

    /// Argmax of the scores; ties go to the lowest class id.
    pub fn predict(&self, x: &[f64]) -> usize {
        let scores = self.scores(x);
        let mut best = 0;
        for (l, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = l;
            }
        }
        self.classes[best]
    }

    fn sample_loss(&self, scores: &[f64], local_target: usize) -> f64 {
        match self.loss {
            LinearLoss::CrossEntropy => cross_entropy(scores, local_target),
            LinearLoss::Hinge { margin } => scores
                .iter()
                .enumerate()
                .map(|(l, s)| {
                    let y = if l == local_target { 1.0 } else { -1.0 };
                    (margin - y * s).max(0.0)
                })
                .sum(),
        }
    }

    /// Mean loss over `ds` plus `l2/2 · |W|²`.
    pub fn objective(&self, ds: &LabeledDataset, l2: f64) -> f64 {
        let local = local_index(&self.classes, ds.class_count());
        let mut scores = Vec::new();
        let mut total = 0.0;
        for (i, x) in ds.rows().enumerate() {
            self.scores_into(x, &mut scores);
            total += self.sample_loss(&scores, local[ds.label(i)].expect("label among seen classes"));
        }
        let reg = 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        total / ds.len() as f64 + reg
    }

    /// Trains on `ds`, whose labels must all lie in `classes`. Returns the
    /// model and the objective before training followed by one value per
    /// epoch.
    pub fn fit(
        ds: &LabeledDataset,
        classes: &[usize],
        params: &SgdParams,
        loss: LinearLoss,
    ) -> Result<(Self, Vec<f64>)> {
        let d = ds.dim();
        let n = ds.len();
        let local = local_index(classes, ds.class_count());
        let mut model = Self::zeros(classes, d, loss);
        let mut vel_w = vec![0.0; model.weights.len()];
        let mut vel_b = vec![0.0; model.bias.len()];
        let mut grad_w = vec![0.0; model.weights.len()];
        let mut grad_b = vec![0.0; model.bias.len()];
        let mut scores = Vec::with_capacity(classes.len());
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = seed::rng(params.seed);
        let batch = params.batch_size.min(n);

        let mut trace = Vec::with_capacity(params.epochs + 1);
        trace.push(model.objective(ds, params.l2));

        for epoch in 0..params.epochs {
            if batch < n {
                order.shuffle(&mut rng);
            }
            for chunk in order.chunks(batch) {
                grad_w.iter_mut().for_each(|g| *g = 0.0);
                grad_b.iter_mut().for_each(|g| *g = 0.0);
                for &i in chunk {
                    let x = ds.row(i);
                    let target = local[ds.label(i)].expect("label among seen classes");
                    model.scores_into(x, &mut scores);
                    model.score_gradient(&mut scores, target);
                    for (l, g) in scores.iter().enumerate() {
                        if *g == 0.0 {
                            continue;
                        }
                        grad_b[l] += g;
                        for (gw, v) in grad_w[l * d..(l + 1) * d].iter_mut().zip(x) {
                            *gw += g * v;
                        }
                    }
                }
                let inv = 1.0 / chunk.len() as f64;
                for ((w, v), g) in model.weights.iter_mut().zip(&mut vel_w).zip(&grad_w) {
                    let g = g * inv + params.l2 * *w;
                    *v = params.momentum * *v - params.learning_rate * g;
                    *w += *v;
                }
                for ((b, v), g) in model.bias.iter_mut().zip(&mut vel_b).zip(&grad_b) {
                    *v = params.momentum * *v - params.learning_rate * g * inv;
                    *b += *v;
                }
            }
            let obj = model.objective(ds, params.l2);
            if !obj.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            trace.push(obj);
        }
        Ok((model, trace))
    }

    /// Replaces `scores` with d(loss)/d(scores) for one sample.
    fn score_gradient(&self, scores: &mut [f64], target: usize) {
        match self.loss {
            LinearLoss::CrossEntropy => {
                softmax_in_place(scores);
                scores[target] -= 1.0;
            }
            LinearLoss::Hinge { margin } => {
                for (l, s) in scores.iter_mut().enumerate() {
                    let y = if l == target { 1.0 } else { -1.0 };
                    *s = if y * *s < margin { -y } else { 0.0 };
                }
            }
        }
    }
}

fn local_index(classes: &[usize], class_count: usize) -> Vec<Option<usize>> {
    let mut local = vec![None; class_count.max(classes.iter().max().map_or(0, |m| m + 1))];
    for (l, &c) in classes.iter().enumerate() {
        local[c] = Some(l);
    }
    local
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_two_regime;

    fn blobs() -> LabeledDataset {
        // Two easy-regime clusters only: separated by 6σ.
        generate_two_regime(200, 0, 2, 2, 6.0, 1.0, 11).unwrap()
    }

    fn accuracy(m: &LinearModel, ds: &LabeledDataset) -> f64 {
        let hits = ds
            .rows()
            .enumerate()
            .filter(|(i, x)| m.predict(x) == ds.label(*i))
            .count();
        hits as f64 / ds.len() as f64
    }

    #[test]
    fn softmax_separates_blobs() {
        let ds = blobs();
        let (m, trace) = LinearModel::fit(&ds, &[0, 1], &SgdParams::default(), LinearLoss::CrossEntropy).unwrap();
        assert_eq!(trace.len(), 101);
        assert!(accuracy(&m, &ds) >= 0.99);
    }

    #[test]
    fn hinge_separates_blobs() {
        let ds = blobs();
        let (m, _) = LinearModel::fit(&ds, &[0, 1], &SgdParams::default(), LinearLoss::Hinge { margin: 1.0 }).unwrap();
        assert!(accuracy(&m, &ds) >= 0.99);
    }

    #[test]
    fn full_batch_loss_is_monotone_at_small_rate() {
        let ds = generate_two_regime(150, 150, 3, 4, 4.0, 1.0, 2).unwrap();
        let params = SgdParams {
            learning_rate: 0.01,
            batch_size: ds.len(),
            ..SgdParams::default()
        };
        let (_, trace) = LinearModel::fit(&ds, &[0, 1, 2], &params, LinearLoss::CrossEntropy).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn softmax_matches_numerical_objective_gradient() {
        // One SGD step from zero with full batch and no momentum moves the
        // weights by -lr * grad; compare against central differences.
        let ds = generate_two_regime(12, 0, 3, 2, 3.0, 1.0, 4).unwrap();
        let lr = 1e-3;
        let params = SgdParams {
            learning_rate: lr,
            momentum: 0.0,
            epochs: 1,
            batch_size: ds.len(),
            l2: 0.0,
            seed: 0,
        };
        let (m, _) = LinearModel::fit(&ds, &[0, 1, 2], &params, LinearLoss::CrossEntropy).unwrap();
        let zero = LinearModel::zeros(&[0, 1, 2], 2, LinearLoss::CrossEntropy);
        let h = 1e-6;
        for k in 0..zero.weights.len() {
            let mut plus = zero.clone();
            plus.weights[k] += h;
            let mut minus = zero.clone();
            minus.weights[k] -= h;
            let numeric = (plus.objective(&ds, 0.0) - minus.objective(&ds, 0.0)) / (2.0 * h);
            let analytic = -m.weights[k] / lr;
            assert!((numeric - analytic).abs() < 1e-7, "{k}: {numeric} vs {analytic}");
        }
    }

    #[test]
    fn cross_entropy_is_stable_for_large_scores() {
        let ce = cross_entropy(&[1000.0, 0.0], 0);
        assert!(ce.is_finite() && (0.0..1e-12).contains(&ce));
        let mut p = vec![1000.0, 0.0];
        softmax_in_place(&mut p);
        assert_eq!(p, vec![1.0, 0.0]);
    }
}
