//! Synthetic long-tail embedding generator.
//!
//! Classes live in superclusters so that every rare class has semantically
//! near common classes to borrow from: supercluster centres are drawn
//! uniformly on a radius-R sphere, class centres are Gaussian offsets from
//! their supercluster centre, and samples are Gaussian around the class
//! centre. Class-to-supercluster assignment is round-robin by index, so each
//! supercluster mixes head and tail classes. Per-class training counts follow
//! a clamped power law in the class index.
//!
//! All randomness comes from a single `ChaCha8Rng` seeded with `cfg.seed`;
//! generated features are quantized to binary32 so that EMBD files round-trip
//! the exact values.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::core::{positive_finite, EmbeddingDataset, EPS};
use crate::error::{Error, Result};

/// Geometry, count law and split sizes for the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Feature dimension F.
    pub dim: usize,
    /// Number of superclusters G.
    pub num_superclusters: usize,
    /// Classes per supercluster C; the class count is N = G*C.
    pub classes_per_supercluster: usize,
    /// Radius R of the sphere the supercluster centres live on.
    pub supercluster_radius: f64,
    /// Std-dev of the class-centre offset from its supercluster centre.
    pub class_offset_sigma: f64,
    /// Std-dev of the per-sample noise around the class centre.
    pub sample_noise_sigma: f64,
    /// Training count of the most frequent class.
    pub count_max: u32,
    /// Training count floor.
    pub count_min: u32,
    /// Power-law exponent a in n_i = count_max * (i+1)^(-a).
    pub count_exponent: f64,
    /// Balanced test samples per class.
    pub test_per_class: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dim: 32,
            num_superclusters: 10,
            classes_per_supercluster: 10,
            supercluster_radius: 8.0,
            class_offset_sigma: 1.0,
            sample_noise_sigma: 2.0,
            count_max: 500,
            count_min: 5,
            count_exponent: 1.0,
            test_per_class: 20,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn num_classes(&self) -> usize {
        self.num_superclusters * self.classes_per_supercluster
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.dim < 2 {
            return fail(format!("dim must be >= 2, got {}", self.dim));
        }
        if self.num_superclusters < 1 || self.classes_per_supercluster < 1 {
            return fail("need at least one supercluster and one class per supercluster".into());
        }
        let geometry_ok = positive_finite(self.class_offset_sigma)
            && positive_finite(self.supercluster_radius)
            && self.supercluster_radius > self.class_offset_sigma;
        if !geometry_ok {
            return fail(format!(
                "require supercluster_radius > class_offset_sigma > 0, got {} and {}",
                self.supercluster_radius, self.class_offset_sigma
            ));
        }
        if !positive_finite(self.sample_noise_sigma) {
            return fail(format!(
                "sample_noise_sigma must be positive, got {}",
                self.sample_noise_sigma
            ));
        }
        if self.count_min < 1 || self.count_max < self.count_min {
            return fail(format!(
                "require count_max >= count_min >= 1, got {} and {}",
                self.count_max, self.count_min
            ));
        }
        if !positive_finite(self.count_exponent) {
            return fail(format!(
                "count_exponent must be positive, got {}",
                self.count_exponent
            ));
        }
        if self.test_per_class < 1 {
            return fail("test_per_class must be at least 1".into());
        }
        Ok(())
    }
}

/// Training count per class: n_i = clamp(round(count_max * (i+1)^(-a)),
/// count_min, count_max). Non-increasing in the class index.
pub fn class_counts(cfg: &SynthConfig) -> Vec<u32> {
    (0..cfg.num_classes())
        .map(|i| {
            let raw = cfg.count_max as f64 * ((i + 1) as f64).powf(-cfg.count_exponent);
            (raw.round() as u32).clamp(cfg.count_min, cfg.count_max)
        })
        .collect()
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, dim: usize) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| StandardNormal.sample(rng))
}

/// Gaussian sample around `centre`, quantized to binary32 per coordinate.
fn sample_around(rng: &mut ChaCha8Rng, centre: &Array1<f64>, sigma: f64) -> Vec<f64> {
    centre
        .iter()
        .map(|&c| {
            let z: f64 = StandardNormal.sample(rng);
            (c + sigma * z) as f32 as f64
        })
        .collect()
}

fn dataset_from_rows(rows: Vec<Vec<f64>>, labels: Vec<u32>, dim: usize, n: usize) -> Result<EmbeddingDataset> {
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let features = Array2::from_shape_vec((labels.len(), dim), flat)
        .expect("row collection matches declared shape");
    EmbeddingDataset::new(features, labels, n)
}

/// Generates (train, val, test) splits. Validation holds min(5, n_i) fresh
/// samples per class; the test split is balanced with `test_per_class` each.
pub fn generate_synthetic(
    cfg: &SynthConfig,
) -> Result<(EmbeddingDataset, EmbeddingDataset, EmbeddingDataset)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.dim;
    let g = cfg.num_superclusters;
    let n = cfg.num_classes();

    let mut supercentres = Vec::with_capacity(g);
    for _ in 0..g {
        loop {
            let v = standard_normal_vec(&mut rng, dim);
            let norm = v.dot(&v).sqrt();
            if norm > EPS {
                supercentres.push(v.mapv(|x| x * cfg.supercluster_radius / norm));
                break;
            }
        }
    }

    let mut class_centres = Vec::with_capacity(n);
    for i in 0..n {
        let offset = standard_normal_vec(&mut rng, dim);
        class_centres.push(&supercentres[i % g] + &(offset * cfg.class_offset_sigma));
    }

    let counts = class_counts(cfg);

    let mut train_rows = Vec::new();
    let mut train_labels = Vec::new();
    for (i, centre) in class_centres.iter().enumerate() {
        for _ in 0..counts[i] {
            train_rows.push(sample_around(&mut rng, centre, cfg.sample_noise_sigma));
            train_labels.push(i as u32);
        }
    }

    let mut val_rows = Vec::new();
    let mut val_labels = Vec::new();
    for (i, centre) in class_centres.iter().enumerate() {
        for _ in 0..counts[i].min(5) {
            val_rows.push(sample_around(&mut rng, centre, cfg.sample_noise_sigma));
            val_labels.push(i as u32);
        }
    }

    let mut test_rows = Vec::new();
    let mut test_labels = Vec::new();
    for (i, centre) in class_centres.iter().enumerate() {
        for _ in 0..cfg.test_per_class {
            test_rows.push(sample_around(&mut rng, centre, cfg.sample_noise_sigma));
            test_labels.push(i as u32);
        }
    }

    Ok((
        dataset_from_rows(train_rows, train_labels, dim, n)?,
        dataset_from_rows(val_rows, val_labels, dim, n)?,
        dataset_from_rows(test_rows, test_labels, dim, n)?,
    ))
}
