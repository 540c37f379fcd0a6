//! Batch sampling strategies for classifier-head training: sample-uniform,
//! square-root and class-aware.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::core::EmbeddingDataset;
use crate::error::{Error, Result};

/// Sampling strategy for drawing training batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Uniform over samples: classes drawn proportionally to n_j.
    Uniform,
    /// Classes drawn proportionally to sqrt(n_j).
    SquareRoot,
    /// Classes drawn uniformly, then a fixed number of samples each.
    ClassAware { samples_per_class: usize },
}

impl SamplerKind {
    /// The class-aware strategy with its customary 4 samples per class.
    pub fn class_aware_default() -> Self {
        SamplerKind::ClassAware {
            samples_per_class: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SamplerKind::ClassAware { samples_per_class } = self {
            if *samples_per_class < 1 {
                return Err(Error::ConfigInvalid(
                    "class-aware sampler needs samples_per_class >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Per-class draw probabilities for a strategy. Classes with zero samples
/// get probability zero.
pub fn class_probabilities(kind: SamplerKind, counts: &[u32]) -> Result<Vec<f64>> {
    kind.validate()?;
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::EmptyDataset);
    }
    let weights: Vec<f64> = match kind {
        SamplerKind::Uniform => counts.iter().map(|&c| c as f64).collect(),
        SamplerKind::SquareRoot => counts.iter().map(|&c| (c as f64).sqrt()).collect(),
        SamplerKind::ClassAware { .. } => counts
            .iter()
            .map(|&c| if c > 0 { 1.0 } else { 0.0 })
            .collect(),
    };
    let sum: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / sum).collect())
}

/// Stateful batch sampler over a dataset. Owns its RNG; two samplers with
/// the same seed replay the same index stream.
pub struct BatchSampler {
    kind: SamplerKind,
    class_indices: Vec<Vec<usize>>,
    class_dist: WeightedIndex<f64>,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(dataset: &EmbeddingDataset, kind: SamplerKind, rng: ChaCha8Rng) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let probs = class_probabilities(kind, dataset.train_counts())?;
        let mut class_indices = vec![Vec::new(); dataset.num_classes()];
        for i in 0..dataset.len() {
            class_indices[dataset.label(i) as usize].push(i);
        }
        let class_dist =
            WeightedIndex::new(&probs).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        Ok(BatchSampler {
            kind,
            class_indices,
            class_dist,
            rng,
        })
    }

    /// Draws the next batch of sample indices; within-class draws are with
    /// replacement for every strategy.
    pub fn next_batch(&mut self, batch_size: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(batch_size);
        match self.kind {
            SamplerKind::Uniform | SamplerKind::SquareRoot => {
                while batch.len() < batch_size {
                    let class = self.class_dist.sample(&mut self.rng);
                    let members = &self.class_indices[class];
                    let pick = self.rng.random_range(0..members.len());
                    batch.push(members[pick]);
                }
            }
            SamplerKind::ClassAware { samples_per_class } => {
                while batch.len() < batch_size {
                    let class = self.class_dist.sample(&mut self.rng);
                    let members = &self.class_indices[class];
                    for _ in 0..samples_per_class {
                        if batch.len() == batch_size {
                            break;
                        }
                        let pick = self.rng.random_range(0..members.len());
                        batch.push(members[pick]);
                    }
                }
            }
        }
        batch
    }
}
