//! Fully-connected feature extractor with plain, additive-residual and
//! concatenating-residual blocks.
//!
//! Every block computes `H(u) = act(W u + b)` and combines it with its input:
//!
//! | kind              | output        | width          |
//! |-------------------|---------------|----------------|
//! | `plain`           | `H(u)`        | hidden         |
//! | `residual_add`    | `H(u) + u`    | hidden = input |
//! | `residual_concat` | `[H(u), u]`   | hidden + input |
//!
//! A softmax head maps the last block to class scores. The activations of
//! block `feature_tap` are the exported features.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::classifiers::{cross_entropy, softmax_in_place};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Plain,
    ResidualAdd,
    ResidualConcat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    /// Linear blocks; used to check gradients without kinks.
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub hidden_width: usize,
}

impl BlockSpec {
    pub fn new(kind: BlockKind, hidden_width: usize) -> Self {
        Self { kind, hidden_width }
    }

    pub fn output_width(&self, input_width: usize) -> usize {
        match self.kind {
            BlockKind::Plain | BlockKind::ResidualAdd => self.hidden_width,
            BlockKind::ResidualConcat => self.hidden_width + input_width,
        }
    }
}

/// Dense map `rows × cols`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn glorot(rows: usize, cols: usize, rng: &mut seed::Rng) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let weights = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
        Self {
            rows,
            cols,
            weights,
            bias: vec![0.0; rows],
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect()
    }

    /// Accumulates `delta ⊗ input` and `delta`; returns `Wᵀ delta`.
    fn accumulate(&self, grad: &mut Dense, delta: &[f64], input: &[f64]) -> Vec<f64> {
        let mut back = vec![0.0; self.cols];
        for (r, &g) in delta.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[r] += g;
            let w = &self.weights[r * self.cols..(r + 1) * self.cols];
            let gw = &mut grad.weights[r * self.cols..(r + 1) * self.cols];
            for c in 0..self.cols {
                gw[c] += g * input[c];
                back[c] += g * w[c];
            }
        }
        back
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(&mut self.bias)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub input_width: usize,
    /// `hidden_width × input_width` transform inside `H`.
    pub transform: Dense,
}

impl Block {
    pub fn spec(&self) -> BlockSpec {
        BlockSpec::new(self.kind, self.transform.rows)
    }

    pub fn output_width(&self) -> usize {
        self.spec().output_width(self.input_width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input_width: usize,
    pub activation: Activation,
    pub blocks: Vec<Block>,
    pub head: Dense,
    /// Index of the block whose output is exported by `extract_features`.
    pub feature_tap: usize,
}

/// Forward-pass mode. Dropout masks exist only in training mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Eval,
    Train { dropout: f64, seed: u64 },
}

/// Parsed architecture string such as `in:8 concat:16 concat:16 fc:32 head:4`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_width: usize,
    pub blocks: Vec<BlockSpec>,
    pub classes: usize,
    pub feature_tap: usize,
}

impl FromStr for Architecture {
    type Err = Error;

    /// Tokens: `in:N`, then blocks `fc:N` / `plain:N`, `add:N` /
    /// `residual_add:N`, `concat:N` / `residual_concat:N`, then `head:C`.
    /// An optional `tap:I` picks the exported block (default: last block).
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::BadArchitecture {
            arch: s.to_string(),
            reason: reason.to_string(),
        };
        let mut input = None;
        let mut classes = None;
        let mut tap = None;
        let mut blocks = Vec::new();
        for token in s.split_whitespace() {
            let (key, value) = token
                .split_once(':')
                .ok_or_else(|| bad(&format!("token {token:?} is not key:value")))?;
            let value: usize = value
                .parse()
                .map_err(|_| bad(&format!("{value:?} is not a non-negative integer")))?;
            if classes.is_some() {
                return Err(bad("nothing may follow head"));
            }
            let kind = match key {
                "in" => {
                    if input.is_some() || !blocks.is_empty() {
                        return Err(bad("in must come first, once"));
                    }
                    input = Some(value);
                    continue;
                }
                "head" => {
                    classes = Some(value);
                    continue;
                }
                "tap" => {
                    tap = Some(value);
                    continue;
                }
                "fc" | "plain" => BlockKind::Plain,
                "add" | "residual_add" => BlockKind::ResidualAdd,
                "concat" | "residual_concat" => BlockKind::ResidualConcat,
                other => return Err(bad(&format!("unknown layer kind {other:?}"))),
            };
            if input.is_none() {
                return Err(bad("architecture must start with in:N"));
            }
            blocks.push(BlockSpec::new(kind, value));
        }
        let input_width = input.ok_or_else(|| bad("missing in:N"))?;
        let classes = classes.ok_or_else(|| bad("missing head:C"))?;
        let feature_tap = tap.unwrap_or(blocks.len().saturating_sub(1));
        let arch = Self {
            input_width,
            blocks,
            classes,
            feature_tap,
        };
        arch.check().map_err(|reason| bad(&reason))?;
        Ok(arch)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "in:{}", self.input_width)?;
        for b in &self.blocks {
            let key = match b.kind {
                BlockKind::Plain => "fc",
                BlockKind::ResidualAdd => "add",
                BlockKind::ResidualConcat => "concat",
            };
            write!(f, " {key}:{}", b.hidden_width)?;
        }
        if self.feature_tap + 1 != self.blocks.len() {
            write!(f, " tap:{}", self.feature_tap)?;
        }
        write!(f, " head:{}", self.classes)
    }
}

impl Architecture {
    fn check(&self) -> std::result::Result<(), String> {
        if self.input_width == 0 {
            return Err("input width must be positive".into());
        }
        if self.classes == 0 {
            return Err("head needs at least one class".into());
        }
        if self.blocks.is_empty() {
            return Err("need at least one block".into());
        }
        if self.feature_tap >= self.blocks.len() {
            return Err(format!("feature tap {} addresses no block", self.feature_tap));
        }
        let mut width = self.input_width;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.hidden_width == 0 {
                return Err(format!("block {i} has zero width"));
            }
            if b.kind == BlockKind::ResidualAdd && b.hidden_width != width {
                return Err(format!(
                    "block {i}: residual_add needs hidden width {width} equal to its input, got {}",
                    b.hidden_width
                ));
            }
            width = b.output_width(width);
        }
        Ok(())
    }
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub blocks: Vec<Dense>,
    pub head: Dense,
}

impl Gradients {
    /// Flattened in [`MlpModel::parameters`] order.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(Dense::params)
            .chain(self.head.params())
            .copied()
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

struct BlockTrace {
    pre: Vec<f64>,
    mask: Option<Vec<f64>>,
}

/// Everything the backward pass needs from one forward pass.
struct Trace {
    activations: Vec<Vec<f64>>,
    blocks: Vec<BlockTrace>,
    scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_decay_per_epoch: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.5,
            dropout: 0.2,
            batch_size: 128,
            epochs: 30,
            lr_decay_per_epoch: 0.95,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadHyperparams(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.lr_decay_per_epoch > 0.0) {
            return bad(format!(
                "learning-rate decay must be positive, got {}",
                self.lr_decay_per_epoch
            ));
        }
        Ok(())
    }
}

/// Mean cross-entropy before training and after every epoch (evaluation mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

impl MlpModel {
    /// Builds a model with scaled-uniform weights and zero biases.
    pub fn new(arch: &Architecture, activation: Activation, seed: u64) -> Result<Self> {
        arch.check().map_err(|reason| Error::BadArchitecture {
            arch: arch.to_string(),
            reason,
        })?;
        let mut rng = seed::rng(seed);
        let mut width = arch.input_width;
        let mut blocks = Vec::with_capacity(arch.blocks.len());
        for spec in &arch.blocks {
            blocks.push(Block {
                kind: spec.kind,
                input_width: width,
                transform: Dense::glorot(spec.hidden_width, width, &mut rng),
            });
            width = spec.output_width(width);
        }
        Ok(Self {
            input_width: arch.input_width,
            activation,
            blocks,
            head: Dense::glorot(arch.classes, width, &mut rng),
            feature_tap: arch.feature_tap,
        })
    }

    pub fn from_arch_str(arch: &str, seed: u64) -> Result<Self> {
        Self::new(&arch.parse()?, Activation::Relu, seed)
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_width: self.input_width,
            blocks: self.blocks.iter().map(Block::spec).collect(),
            classes: self.head.rows,
            feature_tap: self.feature_tap,
        }
    }

    pub fn class_count(&self) -> usize {
        self.head.rows
    }

    pub fn feature_width(&self) -> usize {
        self.blocks[self.feature_tap].output_width()
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.transform.params())
            .chain(self.head.params())
            .copied()
            .collect()
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.blocks
            .iter_mut()
            .flat_map(|b| b.transform.params_mut())
            .chain(self.head.params_mut())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width {
            return Err(Error::DimMismatch {
                expected: self.input_width,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn trace(&self, x: &[f64], mode: Mode, rng: Option<&mut seed::Rng>) -> Trace {
        let mut activations = Vec::with_capacity(self.blocks.len() + 1);
        activations.push(x.to_vec());
        let mut traces = Vec::with_capacity(self.blocks.len());
        let mut rng = rng;
        for block in &self.blocks {
            let input = activations.last().expect("input pushed above");
            let pre = block.transform.apply(input);
            let mut hidden: Vec<f64> = pre.iter().map(|&p| self.activation.apply(p)).collect();
            let mask = match (mode, rng.as_deref_mut()) {
                (Mode::Train { dropout, .. }, Some(r)) if dropout > 0.0 => {
                    let keep = 1.0 - dropout;
                    let mask: Vec<f64> = (0..hidden.len())
                        .map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    hidden.iter_mut().zip(&mask).for_each(|(h, m)| *h *= m);
                    Some(mask)
                }
                _ => None,
            };
            let output = match block.kind {
                BlockKind::Plain => hidden,
                BlockKind::ResidualAdd => hidden.iter().zip(input).map(|(h, u)| h + u).collect(),
                BlockKind::ResidualConcat => {
                    let mut out = hidden;
                    out.extend_from_slice(input);
                    out
                }
            };
            traces.push(BlockTrace { pre, mask });
            activations.push(output);
        }
        let scores = self.head.apply(activations.last().expect("at least one block"));
        Trace {
            activations,
            blocks: traces,
            scores,
        }
    }

    /// Class scores and the activations of every layer (`[0]` is the input,
    /// `[i + 1]` the output of block `i`).
    pub fn forward(&self, x: &[f64], mode: Mode) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        self.check_input(x)?;
        let mut rng = match mode {
            Mode::Train { seed, .. } => Some(seed::rng(seed::derive(seed, &[seed::hash_f64s(x)]))),
            Mode::Eval => None,
        };
        let t = self.trace(x, mode, rng.as_mut());
        Ok((t.scores, t.activations))
    }

    /// Evaluation-mode inputs to each block's activation function.
    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        Ok(self
            .trace(x, Mode::Eval, None)
            .blocks
            .into_iter()
            .map(|b| b.pre)
            .collect())
    }

    fn zero_gradients(&self) -> Gradients {
        Gradients {
            blocks: self.blocks.iter().map(|b| b.transform.zeros_like()).collect(),
            head: self.head.zeros_like(),
        }
    }

    /// Adds `scale · ∂CE/∂θ` for one traced sample into `grads`; returns its loss.
    fn backprop(&self, t: &Trace, label: usize, scale: f64, grads: &mut Gradients) -> f64 {
        let loss = cross_entropy(&t.scores, label);
        let mut delta = t.scores.clone();
        softmax_in_place(&mut delta);
        delta[label] -= 1.0;
        delta.iter_mut().for_each(|d| *d *= scale);

        let last = t.activations.last().expect("at least one block");
        let mut d_out = self.head.accumulate(&mut grads.head, &delta, last);

        for (i, block) in self.blocks.iter().enumerate().rev() {
            let input = &t.activations[i];
            let bt = &t.blocks[i];
            let hidden = block.transform.rows;
            let (d_hidden, skip): (&[f64], Option<&[f64]>) = match block.kind {
                BlockKind::Plain => (&d_out, None),
                BlockKind::ResidualAdd => (&d_out, Some(&d_out)),
                BlockKind::ResidualConcat => (&d_out[..hidden], Some(&d_out[hidden..])),
            };
            let d_pre: Vec<f64> = d_hidden
                .iter()
                .enumerate()
                .map(|(j, g)| {
                    let m = bt.mask.as_ref().map_or(1.0, |m| m[j]);
                    g * m * self.activation.derivative(bt.pre[j])
                })
                .collect();
            let mut d_in = block.transform.accumulate(&mut grads.blocks[i], &d_pre, input);
            if let Some(skip) = skip {
                d_in.iter_mut().zip(skip).for_each(|(a, s)| *a += s);
            }
            d_out = d_in;
        }
        loss
    }

    /// Mean cross-entropy over the batch and its exact gradient with
    /// respect to every weight and bias (evaluation mode, no dropout).
    pub fn backward(&self, ds: &LabeledDataset, batch: &[usize]) -> Result<(f64, Gradients)> {
        self.batch_gradient(ds, batch, Mode::Eval, None)
    }

    fn batch_gradient(
        &self,
        ds: &LabeledDataset,
        batch: &[usize],
        mode: Mode,
        mut rng: Option<&mut seed::Rng>,
    ) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        self.check_input(ds.row(batch[0]))?;
        self.check_labels(ds)?;
        let scale = 1.0 / batch.len() as f64;
        let mut grads = self.zero_gradients();
        let mut loss = 0.0;
        for &i in batch {
            let t = self.trace(ds.row(i), mode, rng.as_deref_mut());
            loss += self.backprop(&t, ds.label(i), scale, &mut grads);
        }
        Ok((loss * scale, grads))
    }

    fn check_labels(&self, ds: &LabeledDataset) -> Result<()> {
        if ds.class_count() > self.class_count() {
            return Err(Error::LabelOutOfRange {
                label: ds.class_count() - 1,
                class_count: self.class_count(),
            });
        }
        Ok(())
    }

    /// Mean cross-entropy over the whole dataset in evaluation mode.
    pub fn loss(&self, ds: &LabeledDataset) -> Result<f64> {
        if ds.dim() != self.input_width {
            return Err(Error::DimMismatch {
                expected: self.input_width,
                found: ds.dim(),
            });
        }
        self.check_labels(ds)?;
        let total: f64 = ds
            .rows()
            .enumerate()
            .map(|(i, x)| cross_entropy(&self.trace(x, Mode::Eval, None).scores, ds.label(i)))
            .sum();
        Ok(total / ds.len() as f64)
    }

    /// SGD with momentum over shuffled mini-batches; the learning rate is
    /// multiplied by `lr_decay_per_epoch` after each epoch.
    pub fn train(&self, ds: &LabeledDataset, cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
        cfg.validate()?;
        let mut model = self.clone();
        let initial_loss = model.loss(ds)?;
        let mut report = TrainReport {
            initial_loss,
            epoch_losses: Vec::with_capacity(cfg.epochs),
        };
        let mut velocity = vec![0.0; model.parameters().len()];
        let mut order: Vec<usize> = (0..ds.len()).collect();
        let mut rng = seed::rng(cfg.seed);
        let mode = Mode::Train {
            dropout: cfg.dropout,
            seed: cfg.seed,
        };
        let mut lr = cfg.learning_rate;
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let mut mask_rng = seed::rng(seed::derive(cfg.seed, &[epoch as u64, b as u64]));
                let (batch_loss, grads) = model.batch_gradient(ds, chunk, mode, Some(&mut mask_rng))?;
                if !batch_loss.is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                for ((p, v), g) in model.parameters_mut().zip(&mut velocity).zip(grads.flatten()) {
                    *v = cfg.momentum * *v - lr * g;
                    *p += *v;
                }
            }
            let loss = model.loss(ds)?;
            if !loss.is_finite() || model.parameters().iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            report.epoch_losses.push(loss);
            lr *= cfg.lr_decay_per_epoch;
        }
        Ok((model, report))
    }

    /// Evaluation-mode activations of the tap block, one row per sample.
    pub fn extract_features(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        if ds.dim() != self.input_width {
            return Err(Error::DimMismatch {
                expected: self.input_width,
                found: ds.dim(),
            });
        }
        let width = self.feature_width();
        let mut out = Vec::with_capacity(ds.len() * width);
        for x in ds.rows() {
            let mut t = self.trace(x, Mode::Eval, None);
            out.append(&mut t.activations[self.feature_tap + 1]);
        }
        ds.with_features(out, width)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let (scores, _) = self.forward(x, Mode::Eval)?;
        let mut best = 0;
        for (c, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = c;
            }
        }
        Ok(best)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text)?;
        model.architecture().check().map_err(|reason| Error::BadArchitecture {
            arch: model.architecture().to_string(),
            reason,
        })?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_reference_architecture() {
        let arch: Architecture = "in:8 concat:16 concat:16 fc:32 head:4".parse().unwrap();
        assert_eq!(arch.input_width, 8);
        assert_eq!(arch.blocks.len(), 3);
        assert_eq!(arch.feature_tap, 2);
        assert_eq!(arch.to_string(), "in:8 concat:16 concat:16 fc:32 head:4");
        let with_tap: Architecture = "in:8 concat:16 tap:0 fc:32 head:4".parse().unwrap();
        assert_eq!(with_tap.feature_tap, 0);
        assert_eq!(with_tap.to_string().parse::<Architecture>().unwrap(), with_tap);
    }

    #[test]
    fn rejects_bad_architectures() {
        for bad in [
            "in:8 add:4 head:2",
            "concat:4 head:2",
            "in:8 head:2",
            "in:8 fc:4",
            "in:8 fc:4 head:2 fc:3",
            "in:8 conv:3 head:2",
            "in:8 fc:4 tap:3 head:2",
            "in:8 fc:x head:2",
        ] {
            assert!(
                matches!(bad.parse::<Architecture>(), Err(Error::BadArchitecture { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn concat_width_adds() {
        let m = MlpModel::from_arch_str("in:8 concat:16 head:3", 0).unwrap();
        let (_, acts) = m.forward(&[0.5; 8], Mode::Eval).unwrap();
        assert_eq!(acts[1].len(), 24);
        assert_eq!(&acts[1][16..], &[0.5; 8]);
    }

    #[test]
    fn zero_residual_add_is_identity() {
        let mut m = MlpModel::from_arch_str("in:8 add:8 head:2", 0).unwrap();
        m.blocks[0].transform.weights.iter_mut().for_each(|w| *w = 0.0);
        let x: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        let (_, acts) = m.forward(&x, Mode::Eval).unwrap();
        assert_eq!(acts[1], x);
    }

    #[test]
    fn forward_checks_dimension() {
        let m = MlpModel::from_arch_str("in:3 fc:4 head:2", 0).unwrap();
        assert!(matches!(
            m.forward(&[1.0], Mode::Eval),
            Err(Error::DimMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn dropout_zero_matches_eval() {
        let m = MlpModel::from_arch_str("in:4 concat:5 add:9 fc:3 head:2", 3).unwrap();
        let x = [0.3, -1.0, 2.0, 0.7];
        let eval = m.forward(&x, Mode::Eval).unwrap();
        let train = m.forward(&x, Mode::Train { dropout: 0.0, seed: 9 }).unwrap();
        assert_eq!(eval, train);
    }

    #[test]
    fn dropout_masks_are_seeded() {
        let m = MlpModel::from_arch_str("in:4 fc:64 head:2", 3).unwrap();
        let x = [0.3, -1.0, 2.0, 0.7];
        let mode = Mode::Train { dropout: 0.5, seed: 4 };
        let a = m.forward(&x, mode).unwrap();
        assert_eq!(a, m.forward(&x, mode).unwrap());
        assert_ne!(a, m.forward(&x, Mode::Eval).unwrap());
        let zeros = a.1[1].iter().filter(|v| **v == 0.0).count();
        assert!(zeros > 0);
    }

    #[test]
    fn initialization_bounds() {
        let m = MlpModel::from_arch_str("in:6 fc:10 head:3", 1).unwrap();
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(m.blocks[0].transform.weights.iter().all(|w| w.abs() <= limit));
        assert!(m.blocks[0].transform.bias.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn training_config_defaults() {
        let c = TrainConfig::default();
        assert_eq!(
            (c.learning_rate, c.momentum, c.dropout, c.batch_size),
            (0.05, 0.5, 0.2, 128)
        );
        assert_eq!(c.lr_decay_per_epoch, 0.95);
        let bad = TrainConfig { dropout: 1.0, ..c };
        assert!(bad.validate().is_err());
    }
}
