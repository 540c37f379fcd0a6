//! Training-free knowledge transfer: attention over eligible classifier
//! weights, knowledge-transfer vectors, hybrid and continual classifiers,
//! and prediction ensembling.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::core::{l2_normalize, predict, softmax, ClassifierHead, HeadKind, Predictor, PrototypeSet};
use crate::data::{load_head, save_head, HeadFile, StoredKind};
use crate::error::{Error, Result};

/// Which representation queries and which is recombined. The default
/// prototype-to-weights direction queries with p̂_i and sums ŵ_j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "p_to_w")]
    PtoW,
    #[serde(rename = "w_to_p")]
    WtoP,
    #[serde(rename = "w_to_w")]
    WtoW,
    #[serde(rename = "p_to_p")]
    PtoP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    Hybrid,
    Continual,
}

/// Temperature, eligibility thresholds and direction for transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    pub tau: f64,
    pub k_values: Vec<usize>,
    pub direction: Direction,
    pub mode: TransferMode,
    /// Drop the class's own weight from its eligible set. The eligibility
    /// rule itself keeps it whenever n_i > k.
    pub exclude_self: bool,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            tau: 10.0,
            k_values: vec![0, 20, 100],
            direction: Direction::PtoW,
            mode: TransferMode::Hybrid,
            exclude_self: false,
        }
    }
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        if !crate::core::positive_finite(self.tau) {
            return Err(Error::ConfigInvalid(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.k_values.is_empty() {
            return Err(Error::ConfigInvalid("k_values must be non-empty".into()));
        }
        if !self.k_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::ConfigInvalid(format!(
                "k_values must be strictly increasing, got {:?}",
                self.k_values
            )));
        }
        Ok(())
    }
}

/// Classes whose classifier knowledge may be transferred: exactly those with
/// n_l > k, in ascending index order.
pub fn eligible_set(counts: &[u32], k: usize) -> Result<Vec<usize>> {
    let set: Vec<usize> = counts
        .iter()
        .enumerate()
        .filter(|&(_, &n)| n as usize > k)
        .map(|(i, _)| i)
        .collect();
    if set.is_empty() {
        return Err(Error::EmptyEligibleSet { k });
    }
    Ok(set)
}

/// Softmax over temperature-scaled cosine similarities between the
/// normalized query and each normalized key column.
pub fn attention_weights(
    query: ArrayView1<'_, f64>,
    keys: ArrayView2<'_, f64>,
    tau: f64,
) -> Result<Array1<f64>> {
    let q = l2_normalize(query)?;
    let mut scores = Array1::zeros(keys.ncols());
    for (j, key) in keys.columns().into_iter().enumerate() {
        let khat = l2_normalize(key)?;
        scores[j] = tau * q.dot(&khat);
    }
    Ok(softmax(scores.view()))
}

/// The query vector of class i for a direction.
fn query_vector<'a>(
    class: usize,
    direction: Direction,
    protos: &'a PrototypeSet,
    head: &'a ClassifierHead,
) -> Result<ArrayView1<'a, f64>> {
    match direction {
        Direction::PtoW | Direction::PtoP => protos.prototype(class),
        Direction::WtoP | Direction::WtoW => Ok(head.weight(class)),
    }
}

/// Eligible classes paired with their normalized value matrix (one column
/// per surviving class). Prototype-valued directions drop absent classes
/// from the eligible set.
fn value_columns(
    eligible: &[usize],
    direction: Direction,
    protos: &PrototypeSet,
    head: &ClassifierHead,
) -> Result<(Vec<usize>, Array2<f64>)> {
    let value_is_prototype = matches!(direction, Direction::WtoP | Direction::PtoP);
    let survivors: Vec<usize> = if value_is_prototype {
        eligible
            .iter()
            .copied()
            .filter(|&j| protos.is_present(j))
            .collect()
    } else {
        eligible.to_vec()
    };
    if survivors.is_empty() {
        return Err(Error::EmptyEligibleSet { k: 0 });
    }
    let dim = head.dim();
    let mut values = Array2::zeros((dim, survivors.len()));
    for (col, &j) in survivors.iter().enumerate() {
        let raw = if value_is_prototype {
            protos.prototype(j)?
        } else {
            head.weight(j)
        };
        values.column_mut(col).assign(&l2_normalize(raw)?);
    }
    Ok((survivors, values))
}

/// Knowledge-transfer vector: the attention-weighted convex combination of
/// normalized value vectors from the eligible set.
pub fn kt_vector(
    class: usize,
    protos: &PrototypeSet,
    head: &ClassifierHead,
    counts: &[u32],
    cfg: &TransferConfig,
    k: usize,
) -> Result<Array1<f64>> {
    cfg.validate()?;
    let mut eligible = eligible_set(counts, k)?;
    if cfg.exclude_self {
        eligible.retain(|&j| j != class);
        if eligible.is_empty() {
            return Err(Error::EmptyEligibleSet { k });
        }
    }
    let query = query_vector(class, cfg.direction, protos, head)?;
    let (_, values) = value_columns(&eligible, cfg.direction, protos, head)?;
    let alpha = attention_weights(query, values.view(), cfg.tau)?;
    Ok(values.dot(&alpha))
}

/// A recomposed classifier: hybrid (kt + prototype + learned weight) or
/// continual (kt + prototype), with the transfer metadata that built it.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridClassifier {
    weights: Array2<f64>,
    pub k: usize,
    pub tau: f64,
    pub direction: Direction,
    pub mode: TransferMode,
    scale: f64,
}

impl HybridClassifier {
    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }
}

impl Predictor for HybridClassifier {
    fn num_classes(&self) -> usize {
        self.weights.ncols()
    }

    fn predict(&self, f: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        predict(self.weights.view(), self.scale, HeadKind::Cosine, f)
    }
}

/// Builds w^h_i(k) = ŵ^kt_i(k) + p̂_i + ŵ_i for every class.
pub fn build_hybrid(
    protos: &PrototypeSet,
    head: &ClassifierHead,
    counts: &[u32],
    cfg: &TransferConfig,
    k: usize,
) -> Result<HybridClassifier> {
    let n = head.num_classes();
    let mut weights = Array2::zeros((head.dim(), n));
    for class in 0..n {
        let kt = kt_vector(class, protos, head, counts, cfg, k)?;
        let mut col = l2_normalize(kt.view())?;
        col += &l2_normalize(protos.prototype(class)?)?;
        col += &l2_normalize(head.weight(class))?;
        weights.column_mut(class).assign(&col);
    }
    Ok(HybridClassifier {
        weights,
        k,
        tau: cfg.tau,
        direction: cfg.direction,
        mode: TransferMode::Hybrid,
        scale: head.scale(),
    })
}

/// Builds w^hc_i(k) = ŵ^kt_i(k) + p̂_i for every class. Classifier weights
/// are only read for eligible classes, so classes the head never saw are
/// fine as long as they have prototypes.
pub fn build_continual(
    protos: &PrototypeSet,
    head: &ClassifierHead,
    counts: &[u32],
    cfg: &TransferConfig,
    k: usize,
) -> Result<HybridClassifier> {
    let n = head.num_classes();
    let mut weights = Array2::zeros((head.dim(), n));
    for class in 0..n {
        let kt = kt_vector(class, protos, head, counts, cfg, k)?;
        let mut col = l2_normalize(kt.view())?;
        col += &l2_normalize(protos.prototype(class)?)?;
        weights.column_mut(class).assign(&col);
    }
    Ok(HybridClassifier {
        weights,
        k,
        tau: cfg.tau,
        direction: cfg.direction,
        mode: TransferMode::Continual,
        scale: head.scale(),
    })
}

/// Arithmetic mean of the members' softmax outputs. Every member is scored
/// as a cosine classifier with its own scale.
pub fn ensemble_predict(
    members: &[(ArrayView2<'_, f64>, f64)],
    f: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    let ensemble = CosineEnsemble::new(members.to_vec())?;
    ensemble.predict(f)
}

/// An owned list of (weights, scale) cosine members.
pub struct CosineEnsemble<'a> {
    members: Vec<(ArrayView2<'a, f64>, f64)>,
}

impl<'a> CosineEnsemble<'a> {
    pub fn new(members: Vec<(ArrayView2<'a, f64>, f64)>) -> Result<Self> {
        let (first, rest) = members.split_first().ok_or(Error::EmptyEnsemble)?;
        for (w, _) in rest {
            if w.ncols() != first.0.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: first.0.ncols(),
                    got: w.ncols(),
                });
            }
            if w.nrows() != first.0.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: first.0.nrows(),
                    got: w.nrows(),
                });
            }
        }
        Ok(CosineEnsemble { members })
    }
}

impl Predictor for CosineEnsemble<'_> {
    fn num_classes(&self) -> usize {
        self.members[0].0.ncols()
    }

    fn predict(&self, f: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let mut mean = Array1::zeros(self.num_classes());
        for (w, s) in &self.members {
            mean += &predict(*w, *s, HeadKind::Cosine, f)?;
        }
        Ok(mean.mapv(|p| p / self.members.len() as f64))
    }
}

/// Sidecar metadata written next to persisted hybrid classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSidecar {
    pub k: usize,
    pub tau: f64,
    pub direction: Direction,
    pub mode: TransferMode,
}

/// Writes the classifier in HEAD format (kind 3 or 4) plus a `.json`
/// sidecar recording k, tau, direction and mode.
pub fn save_hybrid(path: impl AsRef<Path>, classifier: &HybridClassifier) -> Result<()> {
    let path = path.as_ref();
    let kind = match classifier.mode {
        TransferMode::Hybrid => StoredKind::Hybrid,
        TransferMode::Continual => StoredKind::Continual,
    };
    save_head(
        path,
        &HeadFile {
            kind,
            scale: classifier.scale,
            weights: classifier.weights.clone(),
        },
    )?;
    let sidecar = TransferSidecar {
        k: classifier.k,
        tau: classifier.tau,
        direction: classifier.direction,
        mode: classifier.mode,
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    fs::write(path.with_extension("json"), json)?;
    Ok(())
}

/// Loads a hybrid/continual classifier and its sidecar.
pub fn load_hybrid(path: impl AsRef<Path>) -> Result<HybridClassifier> {
    let path = path.as_ref();
    let file = load_head(path)?;
    let mode = match file.kind {
        StoredKind::Hybrid => TransferMode::Hybrid,
        StoredKind::Continual => TransferMode::Continual,
        other => return Err(Error::BadKind(other.to_byte())),
    };
    let text = fs::read_to_string(path.with_extension("json"))?;
    let sidecar: TransferSidecar =
        serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    Ok(HybridClassifier {
        weights: file.weights,
        k: sidecar.k,
        tau: sidecar.tau,
        direction: sidecar.direction,
        mode,
        scale: file.scale,
    })
}
