//! Labeled feature matrices: CSV loading, splitting, folding and the
//! synthetic two-regime generator.
//!
//! This module owns sample indexing. Every other module refers to samples
//! by their row index in a [`LabeledDataset`].

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Which generative regime a synthetic sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Easy,
    Hard,
}

/// `n` feature vectors of dimension `d` with dense class ids in `0..C`.
///
/// Features are stored row-major. Subsets keep the parent's `class_count`,
/// so classifiers trained on a subspace still speak the global label space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    class_count: usize,
    /// Original label value for every dense class id, when loaded from a file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_names: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    regime_tags: Option<Vec<Regime>>,
}

impl LabeledDataset {
    /// Builds a dataset from a row-major feature buffer.
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if dim == 0 {
            return Err(Error::DimMismatch { expected: 1, found: 0 });
        }
        if features.len() != labels.len() * dim {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: labels.len() * dim,
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::LabelOutOfRange { label, class_count });
        }
        Ok(Self {
            features,
            dim,
            labels,
            class_count,
            label_names: None,
            regime_tags: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let mut features = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        Self::new(features, dim, labels, class_count)
    }

    pub fn with_label_names(mut self, names: Vec<i64>) -> Result<Self> {
        if names.len() != self.class_count {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: self.class_count,
            });
        }
        self.label_names = Some(names);
        Ok(self)
    }

    pub fn with_regime_tags(mut self, tags: Vec<Regime>) -> Result<Self> {
        if tags.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: tags.len(),
                right: self.len(),
            });
        }
        self.regime_tags = Some(tags);
        Ok(self)
    }

    /// Same labels and metadata, new features (e.g. after a transform).
    pub fn with_features(&self, features: Vec<f64>, dim: usize) -> Result<Self> {
        let mut out = Self::new(features, dim, self.labels.clone(), self.class_count)?;
        out.label_names = self.label_names.clone();
        out.regime_tags = self.regime_tags.clone();
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false for a constructed dataset; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn label_names(&self) -> Option<&[i64]> {
        self.label_names.as_deref()
    }

    pub fn regime_tags(&self) -> Option<&[Regime]> {
        self.regime_tags.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    /// Number of samples per class id.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Sorted set of class ids that actually occur.
    pub fn classes_present(&self) -> Vec<usize> {
        self.labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Rows at `indices`, in the given order. Empty `indices` is an error.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let mut out = Self::new(features, self.dim, labels, self.class_count)?;
        out.label_names = self.label_names.clone();
        out.regime_tags = self
            .regime_tags
            .as_ref()
            .map(|tags| indices.iter().map(|&i| tags[i]).collect());
        Ok(out)
    }

    /// Writes `f0,…,f{d−1},label` rows with a header line. Labels are written
    /// with their original values when a mapping is recorded.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim).map(|j| format!("f{j}")).collect();
        writeln!(out, "{},label", header.join(","))?;
        for (i, row) in self.rows().enumerate() {
            for v in row {
                write!(out, "{v},")?;
            }
            match &self.label_names {
                Some(names) => writeln!(out, "{}", names[self.labels[i]])?,
                None => writeln!(out, "{}", self.labels[i])?,
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

// ---------------------------------------------------------------------------
// CSV loading
// ---------------------------------------------------------------------------

/// Rows parsed from CSV before labels are densified.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub features: Vec<f64>,
    pub dim: usize,
    pub labels: Vec<i64>,
}

/// True when the line contains a field that is not a number, i.e. it can
/// only be a header.
pub fn looks_like_header(line: &str) -> bool {
    line.split(',').any(|f| f.trim().parse::<f64>().is_err())
}

pub fn parse_table<R: Read>(reader: R, has_header: bool) -> Result<RawTable> {
    let reader = BufReader::new(reader);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut header_pending = has_header;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<csv>", e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(Error::RaggedRow {
                line: line_no,
                expected,
                found: fields.len(),
            });
        }
        if expected < 2 {
            return Err(Error::RaggedRow {
                line: line_no,
                expected: 2,
                found: expected,
            });
        }
        let (label_field, feature_fields) = fields.split_last().expect("width >= 2");
        for (col, f) in feature_fields.iter().enumerate() {
            let v = f.parse::<f64>().map_err(|_| Error::NonNumeric {
                line: line_no,
                column: col + 1,
                value: (*f).to_string(),
            })?;
            features.push(v);
        }
        let label = label_field.parse::<i64>().map_err(|_| Error::NonNumeric {
            line: line_no,
            column: expected,
            value: (*label_field).to_string(),
        })?;
        labels.push(label);
    }

    match width {
        None => Err(Error::EmptyDataset),
        Some(w) => Ok(RawTable {
            features,
            dim: w - 1,
            labels,
        }),
    }
}

/// Densifies the labels of several tables against one shared, sorted
/// original→dense mapping.
pub fn densify(tables: Vec<RawTable>) -> Result<Vec<LabeledDataset>> {
    let names: Vec<i64> = tables
        .iter()
        .flat_map(|t| t.labels.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if let Some(dim) = tables.first().map(|t| t.dim) {
        if let Some(t) = tables.iter().find(|t| t.dim != dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                found: t.dim,
            });
        }
    }
    tables
        .into_iter()
        .map(|t| {
            let labels = t
                .labels
                .iter()
                .map(|l| names.binary_search(l).expect("label collected above"))
                .collect();
            LabeledDataset::new(t.features, t.dim, labels, names.len())?.with_label_names(names.clone())
        })
        .collect()
}

pub fn parse_dataset<R: Read>(reader: R, has_header: bool) -> Result<LabeledDataset> {
    let table = parse_table(reader, has_header)?;
    Ok(densify(vec![table])?.remove(0))
}

/// Loads one CSV feature file, densifying labels to `0..C`.
pub fn load_dataset(path: impl AsRef<Path>, has_header: bool) -> Result<LabeledDataset> {
    Ok(load_datasets(&[path.as_ref()], Some(has_header))?.remove(0))
}

/// Loads several files (train/val/test) with one shared label mapping.
/// With `has_header = None` the header is detected per file.
pub fn load_datasets<P: AsRef<Path>>(paths: &[P], has_header: Option<bool>) -> Result<Vec<LabeledDataset>> {
    let mut tables = Vec::with_capacity(paths.len());
    for p in paths {
        let path = p.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let header = has_header.unwrap_or_else(|| {
            text.lines()
                .find(|l| !l.trim().is_empty())
                .is_some_and(looks_like_header)
        });
        tables.push(parse_table(text.as_bytes(), header)?);
    }
    densify(tables)
}

// ---------------------------------------------------------------------------
// Splitting and folding
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// (train, validation, test)
    pub fractions: [f64; 3],
    pub stratified: bool,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Self {
        Self {
            fractions: [train, val, test],
            stratified: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.fractions.iter().sum();
        if self.fractions.iter().any(|f| !f.is_finite() || *f < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadFractions(self.fractions));
        }
        Ok(())
    }

    /// (train, val, test) sizes: validation and test are rounded to nearest,
    /// train takes the residue.
    pub fn sizes(&self, n: usize) -> Result<[usize; 3]> {
        self.validate()?;
        let val = ((n as f64) * self.fractions[1]).round() as usize;
        let test = ((n as f64) * self.fractions[2]).round() as usize;
        let val = val.min(n);
        let test = test.min(n - val);
        Ok([n - val - test, val, test])
    }
}

/// Sample order in which every prefix holds each class in roughly its
/// overall proportion. Members of a class are shuffled and spread evenly
/// over `[0, 1)`; ties between classes are broken by a random class rank.
fn stratified_order(labels: &[usize], class_count: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut class_rank: Vec<usize> = (0..class_count).collect();
    class_rank.shuffle(rng);

    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(labels.len());
    for (class, members) in by_class.iter_mut().enumerate() {
        members.shuffle(rng);
        let size = members.len() as f64;
        for (j, &i) in members.iter().enumerate() {
            keyed.push(((j as f64 + 0.5) / size, class_rank[class], i));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

fn sample_order(ds: &LabeledDataset, stratified: bool, rng: &mut seed::Rng) -> Vec<usize> {
    if stratified {
        stratified_order(ds.labels(), ds.class_count(), rng)
    } else {
        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.shuffle(rng);
        order
    }
}

/// Index sets of a three-way split, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(ds: &LabeledDataset, spec: &SplitSpec) -> Result<SplitIndices> {
    let [_, n_val, n_test] = spec.sizes(ds.len())?;
    let mut rng = seed::rng(spec.seed);
    let order = sample_order(ds, spec.stratified, &mut rng);
    let mut test = order[..n_test].to_vec();
    let mut val = order[n_test..n_test + n_val].to_vec();
    let mut train = order[n_test + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, val, test })
}

/// Splits into (train, validation, test). A split with zero rows cannot be
/// represented and is reported as [`Error::EmptyDataset`].
pub fn split(ds: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset)> {
    let idx = split_indices(ds, spec)?;
    Ok((ds.subset(&idx.train)?, ds.subset(&idx.val)?, ds.subset(&idx.test)?))
}

/// Assignment of every sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    /// Indices in fold `f`, ascending.
    pub fn members(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == f).collect()
    }

    /// Indices outside fold `f`, ascending.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != f).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified K-fold assignment.
pub fn kfold(ds: &LabeledDataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    kfold_with(ds, k, seed, true)
}

pub fn kfold_with(ds: &LabeledDataset, k: usize, seed: u64, stratified: bool) -> Result<FoldAssignment> {
    let n = ds.len();
    if k < 2 || k > n {
        return Err(Error::BadK { k, n });
    }
    let mut rng = seed::rng(seed);
    let order = sample_order(ds, stratified, &mut rng);
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

// ---------------------------------------------------------------------------
// Two-regime synthetic fixture
// ---------------------------------------------------------------------------

/// Gaussian class clusters in two regimes with different separations.
///
/// Class `c` sits on axis `c mod d` (positive side for `c < d`, negative
/// side after that), at distance `margin/√2` from the regime center, so any
/// two class centers of one regime are at least `margin` apart. The hard
/// regime is shifted by `3·easy_margin` along an alternating-sign unit
/// vector and its classes are mirrored through the regime center, so a
/// single linear model cannot fit both regimes at once. Noise is `N(0, I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoRegimeSpec {
    pub n_easy: usize,
    pub n_hard: usize,
    pub classes: usize,
    pub dim: usize,
    pub easy_margin: f64,
    pub hard_margin: f64,
    pub seed: u64,
}

impl TwoRegimeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::BadSpec(msg.to_string()));
        if self.classes < 2 {
            return bad("need at least 2 classes");
        }
        if self.dim < 2 {
            return bad("need dimension of at least 2");
        }
        if self.classes > 2 * self.dim {
            return bad("at most 2*dim classes can be placed on the axes");
        }
        if !(self.easy_margin > 0.0 && self.hard_margin > 0.0) {
            return bad("margins must be positive");
        }
        if self.easy_margin <= self.hard_margin {
            return bad("easy_margin must exceed hard_margin");
        }
        if self.n_easy + self.n_hard == 0 {
            return bad("no samples requested");
        }
        Ok(())
    }

    fn regime_offset(&self) -> Vec<f64> {
        let scale = 3.0 * self.easy_margin / (self.dim as f64).sqrt();
        (0..self.dim).map(|j| if j % 2 == 0 { scale } else { -scale }).collect()
    }

    /// Class centers of one regime, indexed by class id.
    pub fn centers(&self, regime: Regime) -> Vec<Vec<f64>> {
        let (margin, offset, sign) = match regime {
            Regime::Easy => (self.easy_margin, vec![0.0; self.dim], 1.0),
            Regime::Hard => (self.hard_margin, self.regime_offset(), -1.0),
        };
        let radius = margin / std::f64::consts::SQRT_2;
        (0..self.classes)
            .map(|c| {
                let mut center = offset.clone();
                let side = if c < self.dim { 1.0 } else { -1.0 };
                center[c % self.dim] += sign * side * radius;
                center
            })
            .collect()
    }

    /// Draws the dataset: easy samples first, then hard ones, with class ids
    /// cycling so every regime is balanced.
    pub fn generate(&self) -> Result<LabeledDataset> {
        self.validate()?;
        let mut rng = seed::rng(self.seed);
        let n = self.n_easy + self.n_hard;
        let mut features = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        let mut tags = Vec::with_capacity(n);
        for (regime, count) in [(Regime::Easy, self.n_easy), (Regime::Hard, self.n_hard)] {
            let centers = self.centers(regime);
            for i in 0..count {
                let class = i % self.classes;
                for &mu in &centers[class] {
                    let z: f64 = rng.sample(StandardNormal);
                    features.push(mu + z);
                }
                labels.push(class);
                tags.push(regime);
            }
        }
        LabeledDataset::new(features, self.dim, labels, self.classes)?.with_regime_tags(tags)
    }
}

/// Free-function form of [`TwoRegimeSpec::generate`].
pub fn generate_two_regime(
    n_easy: usize,
    n_hard: usize,
    classes: usize,
    dim: usize,
    easy_margin: f64,
    hard_margin: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    TwoRegimeSpec {
        n_easy,
        n_hard,
        classes,
        dim,
        easy_margin,
        hard_margin,
        seed,
    }
    .generate()
}
