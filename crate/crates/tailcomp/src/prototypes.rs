//! Class prototypes: per-class means of normalized features.

use ndarray::{Array1, Array2, ArrayView1};

use crate::core::{
    l2_normalize, predict, EmbeddingDataset, HeadKind, Predictor, PrototypeSet, PrototypeSource,
};
use crate::error::{Error, Result};

/// Computes p_i = (1/n_i) Σ x_j/||x_j|| over the samples of class i in the
/// given split. Classes without samples are marked absent. Prototypes are
/// stored raw (un-normalized); uses normalize them as needed.
pub fn compute_prototypes(
    dataset: &EmbeddingDataset,
    source: PrototypeSource,
) -> Result<PrototypeSet> {
    let n = dataset.num_classes();
    let mut sums = Array2::<f64>::zeros((dataset.dim(), n));
    let mut counts = vec![0usize; n];
    for i in 0..dataset.len() {
        let unit = l2_normalize(dataset.feature(i))?;
        let class = dataset.label(i) as usize;
        sums.column_mut(class).scaled_add(1.0, &unit);
        counts[class] += 1;
    }
    for (class, &c) in counts.iter().enumerate() {
        if c > 0 {
            sums.column_mut(class).mapv_inplace(|x| x / c as f64);
        }
    }
    let present = counts.iter().map(|&c| c > 0).collect();
    PrototypeSet::new(sums, source, present)
}

/// Prediction with prototypes substituted for classifier weights.
/// Errors if any candidate class has no prototype.
pub fn prototype_predict(
    protos: &PrototypeSet,
    scale: f64,
    f: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    if let Some(class) = protos.present().iter().position(|&p| !p) {
        return Err(Error::AbsentClass { class });
    }
    predict(protos.matrix(), scale, HeadKind::Cosine, f)
}

/// A prototype set used as a cosine classifier with a fixed scale.
pub struct PrototypeClassifier<'a> {
    protos: &'a PrototypeSet,
    scale: f64,
}

impl<'a> PrototypeClassifier<'a> {
    pub fn new(protos: &'a PrototypeSet, scale: f64) -> Result<Self> {
        if let Some(class) = protos.present().iter().position(|&p| !p) {
            return Err(Error::AbsentClass { class });
        }
        Ok(PrototypeClassifier { protos, scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Predictor for PrototypeClassifier<'_> {
    fn num_classes(&self) -> usize {
        self.protos.num_classes()
    }

    fn predict(&self, f: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        prototype_predict(self.protos, self.scale, f)
    }
}
