//! Classifier-head training on fixed embeddings: cross-entropy, SGD with
//! momentum and weight decay, cosine-decayed learning rate, learnable scale.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::core::{l2_normalize, positive_finite, ClassifierHead, EmbeddingDataset, HeadKind, EPS};
use crate::error::{Error, Result};
use crate::sampling::{BatchSampler, SamplerKind};

/// Scale is projected back to this floor if an update would push it to zero
/// or below.
const SCALE_FLOOR: f64 = 1e-3;

/// Training hyperparameters. The learning rate follows a cosine decay to 0
/// over all steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub scale_init: f64,
    pub scale_learnable: bool,
    pub sampler: SamplerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 128,
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            scale_init: 16.0,
            scale_learnable: true,
            sampler: SamplerKind::SquareRoot,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.epochs < 1 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1".into());
        }
        if !positive_finite(self.learning_rate) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return fail(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        if !positive_finite(self.scale_init) {
            return fail(format!("scale_init must be positive, got {}", self.scale_init));
        }
        self.sampler.validate()
    }
}

/// Per-class scores for one feature vector: `s*(f̂·ŵ_i)` for the cosine kind,
/// raw `f·w_i` for the dot-product kind.
pub fn forward_logits(head: &ClassifierHead, f: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    logits_raw(head.weights(), head.scale(), head.kind(), f)
}

fn logits_raw(
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
    let mut out = Array1::zeros(weights.ncols());
    match kind {
        HeadKind::Cosine => {
            let fhat = l2_normalize(f)?;
            for (i, w) in weights.columns().into_iter().enumerate() {
                let wnorm = w.dot(&w).sqrt();
                if !wnorm.is_finite() || wnorm <= EPS {
                    return Err(Error::ZeroVector);
                }
                out[i] = scale * fhat.dot(&w) / wnorm;
            }
        }
        HeadKind::DotProduct => {
            for (i, w) in weights.columns().into_iter().enumerate() {
                out[i] = f.dot(&w);
            }
        }
    }
    Ok(out)
}

/// Mean cross-entropy of a batch plus exact analytic gradients.
///
/// For the cosine kind the weight gradient carries the normalization
/// Jacobian (I - ŵŵᵀ)/||w||; `grad_s` is 0 when the scale is frozen or the
/// kind is dot-product.
pub fn ce_loss_and_grads(
    head: &ClassifierHead,
    features: ArrayView2<'_, f64>,
    labels: &[u32],
    scale_learnable: bool,
) -> Result<(f64, Array2<f64>, f64)> {
    ce_loss_and_grads_raw(
        head.weights(),
        head.scale(),
        head.kind(),
        features,
        labels,
        scale_learnable,
    )
}

fn ce_loss_and_grads_raw(
    weights: ArrayView2<'_, f64>,
    scale: f64,
    kind: HeadKind,
    features: ArrayView2<'_, f64>,
    labels: &[u32],
    scale_learnable: bool,
) -> Result<(f64, Array2<f64>, f64)> {
    let batch = features.nrows();
    if batch == 0 || batch != labels.len() {
        return Err(Error::EmptyDataset);
    }
    let (dim, n) = (weights.nrows(), weights.ncols());

    // per-column norms and unit columns, shared across the batch
    let mut unit_w = Array2::zeros((dim, n));
    let mut norms = vec![0.0f64; n];
    if kind == HeadKind::Cosine {
        for (i, w) in weights.columns().into_iter().enumerate() {
            let norm = w.dot(&w).sqrt();
            if !norm.is_finite() || norm <= EPS {
                return Err(Error::ZeroVector);
            }
            norms[i] = norm;
            unit_w.column_mut(i).assign(&w.mapv(|x| x / norm));
        }
    }

    let mut loss = 0.0;
    let mut grad_w = Array2::zeros((dim, n));
    let mut grad_s = 0.0;
    let inv_batch = 1.0 / batch as f64;

    for (b, f) in features.rows().into_iter().enumerate() {
        let y = labels[b] as usize;
        let (logits, fhat) = match kind {
            HeadKind::Cosine => {
                let fhat = l2_normalize(f)?;
                let mut z = Array1::zeros(n);
                for i in 0..n {
                    z[i] = scale * fhat.dot(&unit_w.column(i));
                }
                (z, Some(fhat))
            }
            HeadKind::DotProduct => {
                let mut z = Array1::zeros(n);
                for i in 0..n {
                    z[i] = f.dot(&weights.column(i));
                }
                (z, None)
            }
        };

        let max = logits.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let exps = logits.mapv(|z| (z - max).exp());
        let denom: f64 = exps.sum();
        loss -= (logits[y] - max - denom.ln()) * inv_batch;

        for i in 0..n {
            let d = (exps[i] / denom - if i == y { 1.0 } else { 0.0 }) * inv_batch;
            match kind {
                HeadKind::Cosine => {
                    let fhat = fhat.as_ref().expect("cosine path always normalizes");
                    let cos = fhat.dot(&unit_w.column(i));
                    if scale_learnable {
                        grad_s += d * cos;
                    }
                    // d * s/||w|| * (f̂ - cos·ŵ)
                    let coeff = d * scale / norms[i];
                    let mut col = grad_w.column_mut(i);
                    col.scaled_add(coeff, fhat);
                    col.scaled_add(-coeff * cos, &unit_w.column(i));
                }
                HeadKind::DotProduct => {
                    grad_w.column_mut(i).scaled_add(d, &f);
                }
            }
        }
    }

    Ok((loss, grad_w, grad_s))
}

/// Trains a head from scratch with SGD + momentum + weight decay and the
/// configured batch sampler. Deterministic for a fixed seed. Classes with no
/// samples are never drawn; their columns keep their unit-norm random
/// initialization.
pub fn train_head(
    dataset: &EmbeddingDataset,
    kind: HeadKind,
    cfg: &TrainConfig,
) -> Result<ClassifierHead> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = dataset.dim();
    let n = dataset.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut weights = Array2::zeros((dim, n));
    for class in 0..n {
        loop {
            let col: Array1<f64> = Array1::from_shape_fn(dim, |_| StandardNormal.sample(&mut rng));
            let norm = col.dot(&col).sqrt();
            if norm > EPS {
                weights.column_mut(class).assign(&col.mapv(|x| x / norm));
                break;
            }
        }
    }
    let mut scale = cfg.scale_init;

    let mut sampler = BatchSampler::new(dataset, cfg.sampler, rng)?;
    let batches_per_epoch = dataset.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;

    let mut velocity = Array2::<f64>::zeros((dim, n));
    let mut scale_velocity = 0.0f64;

    for step in 0..total_steps {
        let lr = cfg.learning_rate
            * 0.5
            * (1.0 + (std::f64::consts::PI * step as f64 / total_steps as f64).cos());

        let indices = sampler.next_batch(cfg.batch_size);
        let mut batch_features = Array2::zeros((indices.len(), dim));
        let mut batch_labels = Vec::with_capacity(indices.len());
        for (row, &idx) in indices.iter().enumerate() {
            batch_features.row_mut(row).assign(&dataset.feature(idx));
            batch_labels.push(dataset.label(idx));
        }

        let (loss, grad_w, grad_s) = ce_loss_and_grads_raw(
            weights.view(),
            scale,
            kind,
            batch_features.view(),
            &batch_labels,
            cfg.scale_learnable,
        )?;
        if !loss.is_finite() {
            return Err(Error::DivergedLoss { step });
        }

        // weight decay on raw W, momentum buffer, descent step
        velocity.zip_mut_with(&(&grad_w + &weights.mapv(|w| w * cfg.weight_decay)), |v, &g| {
            *v = cfg.momentum * *v + g;
        });
        weights.zip_mut_with(&velocity, |w, &v| *w -= lr * v);

        if cfg.scale_learnable && kind == HeadKind::Cosine {
            scale_velocity = cfg.momentum * scale_velocity + grad_s;
            let next = scale - lr * scale_velocity;
            if next <= 0.0 {
                log::warn!("scale update hit {next:.3e} at step {step}; projecting to {SCALE_FLOOR}");
                scale = SCALE_FLOOR;
            } else {
                scale = next;
            }
        }
    }

    ClassifierHead::new(weights, scale, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{argmax, Predictor};
    use ndarray::array;
    use rand::Rng;

    fn random_head(rng: &mut ChaCha8Rng, dim: usize, n: usize, kind: HeadKind) -> ClassifierHead {
        let w = Array2::from_shape_fn((dim, n), |_| rng.random_range(-1.0..1.0f64) + 0.05);
        ClassifierHead::new(w, rng.random_range(2.0..20.0), kind).unwrap()
    }

    fn random_batch(rng: &mut ChaCha8Rng, b: usize, dim: usize, n: usize) -> (Array2<f64>, Vec<u32>) {
        let f = Array2::from_shape_fn((b, dim), |_| rng.random_range(-1.0..1.0f64) + 0.02);
        let labels = (0..b).map(|_| rng.random_range(0..n as u32)).collect();
        (f, labels)
    }

    #[test]
    fn logits_parallel_and_orthogonal() {
        let head = ClassifierHead::new(array![[2.0, 0.0], [0.0, 3.0]], 16.0, HeadKind::Cosine)
            .unwrap();
        let z = forward_logits(&head, array![5.0, 0.0].view()).unwrap();
        assert!((z[0] - 16.0).abs() < 1e-12);
        assert!(z[1].abs() < 1e-12);
    }

    #[test]
    fn dot_product_logits_are_raw() {
        let head = ClassifierHead::new(array![[3.0], [0.0]], 16.0, HeadKind::DotProduct).unwrap();
        let z = forward_logits(&head, array![2.0, 0.0].view()).unwrap();
        assert_eq!(z[0], 6.0);
    }

    #[test]
    fn cosine_logits_match_scalar_oracle() {
        let head = ClassifierHead::new(array![[1.0, 0.0], [0.0, 1.0]], 10.0, HeadKind::Cosine)
            .unwrap();
        let z = forward_logits(&head, array![1.0, 1.0].view()).unwrap();
        let expect = 10.0 / 2.0_f64.sqrt();
        assert!((z[0] - expect).abs() < 1e-12);
        assert!((z[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn uniform_logits_give_ln_n_loss() {
        // two identical columns: softmax is uniform, loss = ln 2
        let head = ClassifierHead::new(array![[1.0, 1.0], [0.0, 0.0]], 16.0, HeadKind::Cosine)
            .unwrap();
        let (loss, _, _) =
            ce_loss_and_grads(&head, array![[0.4, 0.8]].view(), &[0], true).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn near_perfect_prediction_has_negligible_loss_and_grads() {
        let head = ClassifierHead::new(array![[1.0, -1.0], [0.1, -0.1]], 60.0, HeadKind::Cosine)
            .unwrap();
        let (loss, grad_w, grad_s) =
            ce_loss_and_grads(&head, array![[1.0, 0.1]].view(), &[0], true).unwrap();
        assert!(loss < 1e-10);
        assert!(grad_w.iter().all(|g| g.abs() < 1e-10));
        assert!(grad_s.abs() < 1e-10);
    }

    #[test]
    fn frozen_scale_zeroes_its_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let head = random_head(&mut rng, 3, 4, HeadKind::Cosine);
        let (f, y) = random_batch(&mut rng, 5, 3, 4);
        let (_, _, gs) = ce_loss_and_grads(&head, f.view(), &y, false).unwrap();
        assert_eq!(gs, 0.0);
        let (_, _, gs) = ce_loss_and_grads(&head, f.view(), &y, true).unwrap();
        assert!(gs != 0.0);
    }

    /// Central finite differences over every raw weight entry and the scale.
    fn finite_difference_check(kind: HeadKind, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.random_range(2..=5);
        let n = rng.random_range(2..=6);
        let head = random_head(&mut rng, dim, n, kind);
        let (f, y) = random_batch(&mut rng, 5, dim, n);
        let h = 1e-5;

        let loss_at = |w: &Array2<f64>, s: f64| -> f64 {
            let head = ClassifierHead::new(w.clone(), s, kind).unwrap();
            ce_loss_and_grads(&head, f.view(), &y, true).unwrap().0
        };

        let (_, grad_w, grad_s) = ce_loss_and_grads(&head, f.view(), &y, true).unwrap();

        let mut fd = Array2::zeros((dim, n));
        let base = head.weights().to_owned();
        for i in 0..dim {
            for j in 0..n {
                let mut plus = base.clone();
                plus[(i, j)] += h;
                let mut minus = base.clone();
                minus[(i, j)] -= h;
                fd[(i, j)] = (loss_at(&plus, head.scale()) - loss_at(&minus, head.scale()))
                    / (2.0 * h);
            }
        }
        let fd_s = (loss_at(&base, head.scale() + h) - loss_at(&base, head.scale() - h)) / (2.0 * h);

        let num = (&grad_w - &fd).mapv(|x| x * x).sum() + (grad_s - fd_s) * (grad_s - fd_s);
        let den = fd.mapv(|x| x * x).sum() + fd_s * fd_s;
        (num / den).sqrt()
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for seed in 0..20 {
            let rel = finite_difference_check(HeadKind::Cosine, 100 + seed);
            assert!(rel < 1e-6, "cosine seed {seed}: rel error {rel}");
        }
        for seed in 0..5 {
            let rel = finite_difference_check(HeadKind::DotProduct, 200 + seed);
            assert!(rel < 1e-6, "dot seed {seed}: rel error {rel}");
        }
    }

    fn separable_toy(seed: u64) -> EmbeddingDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2u32 {
            let centre = if class == 0 { 5.0 } else { -5.0 };
            for _ in 0..30 {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                rows.push(vec![centre + 0.1 * x, 0.1 * y]);
                labels.push(class);
            }
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        EmbeddingDataset::new(Array2::from_shape_vec((60, 2), flat).unwrap(), labels, 2).unwrap()
    }

    #[test]
    fn separable_toy_trains_to_full_accuracy() {
        let data = separable_toy(5);
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let head = train_head(&data, HeadKind::Cosine, &cfg).unwrap();

        let initial = ClassifierHead::new(
            // fresh random unit columns, same init rule as training
            {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut w = Array2::zeros((2, 2));
                for c in 0..2 {
                    let col = Array1::from_shape_fn(2, |_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z
                    });
                    let norm = col.dot(&col).sqrt();
                    w.column_mut(c).assign(&col.mapv(|x| x / norm));
                }
                w
            },
            cfg.scale_init,
            HeadKind::Cosine,
        )
        .unwrap();

        let mut correct = 0;
        for i in 0..data.len() {
            let p = head.predict(data.feature(i)).unwrap();
            if argmax(p.view()) == data.label(i) as usize {
                correct += 1;
            }
        }
        assert_eq!(correct, data.len(), "training accuracy should reach 1.0");

        let all_labels: Vec<u32> = data.labels().to_vec();
        let (final_loss, _, _) = ce_loss_and_grads(
            &head,
            data.features(),
            &all_labels,
            true,
        )
        .unwrap();
        let (init_loss, _, _) = ce_loss_and_grads(
            &initial,
            data.features(),
            &all_labels,
            true,
        )
        .unwrap();
        assert!(
            final_loss < init_loss,
            "final {final_loss} should be below initial {init_loss}"
        );
        assert!(head.scale() > 0.0);
    }

    #[test]
    fn zero_epochs_is_a_config_error() {
        let data = separable_toy(6);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_head(&data, HeadKind::Cosine, &cfg),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn same_seed_trains_bit_identical_heads() {
        let data = separable_toy(7);
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let a = train_head(&data, HeadKind::Cosine, &cfg).unwrap();
        let b = train_head(&data, HeadKind::Cosine, &cfg).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.scale(), b.scale());
    }

    #[test]
    fn training_leaves_dataset_untouched() {
        let data = separable_toy(8);
        let before = data.clone();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 8,
            ..TrainConfig::default()
        };
        train_head(&data, HeadKind::Cosine, &cfg).unwrap();
        assert_eq!(data, before);
    }

    #[test]
    fn dot_product_head_trains() {
        let data = separable_toy(9);
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 16,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let head = train_head(&data, HeadKind::DotProduct, &cfg).unwrap();
        assert_eq!(head.kind(), HeadKind::DotProduct);
        // scale untouched for dot-product heads
        assert_eq!(head.scale(), cfg.scale_init);
        let mut correct = 0;
        for i in 0..data.len() {
            let p = head.predict(data.feature(i)).unwrap();
            if argmax(p.view()) == data.label(i) as usize {
                correct += 1;
            }
        }
        assert!(correct as f64 / data.len() as f64 > 0.95);
    }
}
