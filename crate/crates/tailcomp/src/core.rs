//! Domain types and the normalized vector algebra shared by all modules:
//! cosine scoring, softmax predictions, class-group logic.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm threshold below which a vector is treated as zero.
pub const EPS: f64 = 1e-12;

/// True for finite, strictly positive reals; rejects NaN and infinities.
pub(crate) fn positive_finite(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Returns `v / ||v||`.
pub fn l2_normalize(v: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let norm = v.dot(&v).sqrt();
    if !norm.is_finite() || norm <= EPS {
        return Err(Error::ZeroVector);
    }
    Ok(v.mapv(|x| x / norm))
}

/// Scaled cosine similarity `s * (f̂ · ŵ)`.
pub fn cosine_score(f: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>, s: f64) -> Result<f64> {
    let fhat = l2_normalize(f)?;
    let what = l2_normalize(w)?;
    Ok(s * fhat.dot(&what))
}

/// Numerically stable softmax.
pub fn softmax(scores: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out = scores.mapv(|z| (z - max).exp());
    let sum: f64 = out.sum();
    out.mapv_inplace(|p| p / sum);
    out
}

/// Index of the maximum entry; ties resolve to the lowest index.
pub fn argmax(values: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Scoring variant of a classifier head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Cosine,
    DotProduct,
}

/// Softmax prediction over per-class scores.
///
/// `weights` is F×N with one column per class. The `Cosine` kind scores
/// `s * (f̂ · ŵ_i)`; `DotProduct` scores the raw `f · w_i` with no
/// normalization and no scale.
pub fn predict(
    weights: ArrayView2<'_, f64>,
    scale: f64,
    kind: HeadKind,
    f: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    if f.len() != weights.nrows() {
        return Err(Error::DimensionMismatch {
            expected: weights.nrows(),
            got: f.len(),
        });
    }
    let num_classes = weights.ncols();
    let mut scores = Array1::zeros(num_classes);
    match kind {
        HeadKind::Cosine => {
            let fhat = l2_normalize(f)?;
            for (i, w) in weights.columns().into_iter().enumerate() {
                let wnorm = w.dot(&w).sqrt();
                if !wnorm.is_finite() || wnorm <= EPS {
                    return Err(Error::ZeroVector);
                }
                scores[i] = scale * fhat.dot(&w) / wnorm;
            }
        }
        HeadKind::DotProduct => {
            for (i, w) in weights.columns().into_iter().enumerate() {
                scores[i] = f.dot(&w);
            }
        }
    }
    Ok(softmax(scores.view()))
}

/// Anything that maps a feature vector to a probability vector over classes.
pub trait Predictor {
    fn num_classes(&self) -> usize;
    fn predict(&self, f: ArrayView1<'_, f64>) -> Result<Array1<f64>>;
}

/// Class grouping by training cardinality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassGroup {
    ManyShot,
    MediumShot,
    FewShot,
}

/// Boundaries of the class groups: many-shot `n >= many_min`,
/// few-shot `n <= few_max`, medium-shot in between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupThresholds {
    pub many_min: u32,
    pub few_max: u32,
}

impl Default for GroupThresholds {
    fn default() -> Self {
        GroupThresholds {
            many_min: 100,
            few_max: 20,
        }
    }
}

impl GroupThresholds {
    pub fn new(many_min: u32, few_max: u32) -> Result<Self> {
        if few_max >= many_min {
            return Err(Error::ConfigInvalid(format!(
                "few_max ({few_max}) must be below many_min ({many_min})"
            )));
        }
        Ok(GroupThresholds { many_min, few_max })
    }

    /// Maps a training count onto its class group.
    pub fn group(&self, n: u32) -> ClassGroup {
        if n >= self.many_min {
            ClassGroup::ManyShot
        } else if n <= self.few_max {
            ClassGroup::FewShot
        } else {
            ClassGroup::MediumShot
        }
    }
}

/// Labeled feature vectors with per-class training counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    dim: usize,
    num_classes: usize,
    labels: Vec<u32>,
    features: Array2<f64>,
    train_counts: Vec<u32>,
}

impl EmbeddingDataset {
    /// Builds a dataset whose counts are tallied from its own labels
    /// (the training-split convention).
    pub fn new(features: Array2<f64>, labels: Vec<u32>, num_classes: usize) -> Result<Self> {
        let mut counts = vec![0u32; num_classes];
        for &l in &labels {
            if (l as usize) >= num_classes {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    num_classes: num_classes as u32,
                });
            }
            counts[l as usize] += 1;
        }
        Self::with_counts(features, labels, num_classes, counts)
    }

    /// Builds a dataset with externally supplied per-class counts
    /// (val/test splits carry the counts of the training split).
    pub fn with_counts(
        features: Array2<f64>,
        labels: Vec<u32>,
        num_classes: usize,
        train_counts: Vec<u32>,
    ) -> Result<Self> {
        if num_classes == 0 || features.ncols() == 0 {
            return Err(Error::ConfigInvalid(
                "dataset needs at least one class and a positive feature dimension".into(),
            ));
        }
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: features.nrows(),
            });
        }
        if train_counts.len() != num_classes {
            return Err(Error::DimensionMismatch {
                expected: num_classes,
                got: train_counts.len(),
            });
        }
        for &l in &labels {
            if (l as usize) >= num_classes {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    num_classes: num_classes as u32,
                });
            }
        }
        for row in features.rows() {
            let norm = row.dot(&row).sqrt();
            if !norm.is_finite() || norm <= EPS {
                return Err(Error::ZeroVector);
            }
        }
        Ok(EmbeddingDataset {
            dim: features.ncols(),
            num_classes,
            labels,
            features,
            train_counts,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, sample: usize) -> u32 {
        self.labels[sample]
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn feature(&self, sample: usize) -> ArrayView1<'_, f64> {
        self.features.row(sample)
    }

    pub fn train_counts(&self) -> &[u32] {
        &self.train_counts
    }

    /// Copy of the dataset with all samples of non-kept classes removed.
    /// The class space stays intact; dropped classes end up with zero counts.
    pub fn retain_classes(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.num_classes {
            return Err(Error::DimensionMismatch {
                expected: self.num_classes,
                got: keep.len(),
            });
        }
        let rows: Vec<usize> = (0..self.len())
            .filter(|&i| keep[self.labels[i] as usize])
            .collect();
        let mut features = Array2::zeros((rows.len(), self.dim));
        let mut labels = Vec::with_capacity(rows.len());
        for (dst, &src) in rows.iter().enumerate() {
            features.row_mut(dst).assign(&self.features.row(src));
            labels.push(self.labels[src]);
        }
        Self::new(features, labels, self.num_classes)
    }
}

/// Learned classifier head: weight matrix plus a positive scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    weights: Array2<f64>,
    scale: f64,
    kind: HeadKind,
}

impl ClassifierHead {
    pub fn new(weights: Array2<f64>, scale: f64, kind: HeadKind) -> Result<Self> {
        if !positive_finite(scale) {
            return Err(Error::ConfigInvalid(format!(
                "scale must be a positive finite real, got {scale}"
            )));
        }
        Ok(ClassifierHead {
            weights,
            scale,
            kind,
        })
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn weight(&self, class: usize) -> ArrayView1<'_, f64> {
        self.weights.column(class)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn kind(&self) -> HeadKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }
}

impl Predictor for ClassifierHead {
    fn num_classes(&self) -> usize {
        self.weights.ncols()
    }

    fn predict(&self, f: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        predict(self.weights.view(), self.scale, self.kind, f)
    }
}

/// Split a prototype set was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrototypeSource {
    Train,
    Validation,
}

/// Per-class mean-of-normalized-features, stored un-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    prototypes: Array2<f64>,
    source: PrototypeSource,
    present: Vec<bool>,
}

impl PrototypeSet {
    /// Wraps a raw F×N prototype matrix. Columns of absent classes are ignored.
    pub fn new(prototypes: Array2<f64>, source: PrototypeSource, present: Vec<bool>) -> Result<Self> {
        if present.len() != prototypes.ncols() {
            return Err(Error::DimensionMismatch {
                expected: prototypes.ncols(),
                got: present.len(),
            });
        }
        Ok(PrototypeSet {
            prototypes,
            source,
            present,
        })
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.prototypes.view()
    }

    /// Raw prototype of a class, or an error if the class had no samples.
    pub fn prototype(&self, class: usize) -> Result<ArrayView1<'_, f64>> {
        if !self.present[class] {
            return Err(Error::AbsentPrototype { class });
        }
        Ok(self.prototypes.column(class))
    }

    pub fn source(&self) -> PrototypeSource {
        self.source
    }

    pub fn is_present(&self, class: usize) -> bool {
        self.present[class]
    }

    pub fn present(&self) -> &[bool] {
        &self.present
    }

    pub fn all_present(&self) -> bool {
        self.present.iter().all(|&p| p)
    }

    pub fn num_classes(&self) -> usize {
        self.prototypes.ncols()
    }

    pub fn dim(&self) -> usize {
        self.prototypes.nrows()
    }
}

/// Correct/total tally for one evaluation slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct GroupTally {
    pub correct: usize,
    pub total: usize,
}

impl GroupTally {
    /// Accuracy, or `None` when the slice is empty (absent rather than 0).
    pub fn accuracy(&self) -> Option<f64> {
        if self.total == 0 {
            None
        } else {
            Some(self.correct as f64 / self.total as f64)
        }
    }

    pub fn add(&mut self, correct: bool) {
        self.total += 1;
        if correct {
            self.correct += 1;
        }
    }
}

/// Top-1 accuracies over the many/medium/few-shot groups and overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub many: GroupTally,
    pub medium: GroupTally,
    pub few: GroupTally,
    pub overall: GroupTally,
    pub per_class: Vec<GroupTally>,
}

impl GroupReport {
    pub fn acc_many(&self) -> Option<f64> {
        self.many.accuracy()
    }

    pub fn acc_medium(&self) -> Option<f64> {
        self.medium.accuracy()
    }

    pub fn acc_few(&self) -> Option<f64> {
        self.few.accuracy()
    }

    pub fn acc_total(&self) -> f64 {
        self.overall.accuracy().unwrap_or(0.0)
    }

    pub fn per_class_acc(&self) -> Vec<Option<f64>> {
        self.per_class.iter().map(GroupTally::accuracy).collect()
    }
}
