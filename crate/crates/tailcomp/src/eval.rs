//! Group-wise accuracy reporting and diagnostic analyses: prototype/weight
//! mismatch counts, attention sharpness curves, memorization checks, CSV and
//! JSON emission.

use std::fs;
use std::path::Path;

use ndarray::ArrayView1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{
    argmax, l2_normalize, ClassGroup, ClassifierHead, EmbeddingDataset, GroupReport, GroupTally,
    GroupThresholds, Predictor, PrototypeSet,
};
use crate::error::{Error, Result};
use crate::prototypes::PrototypeClassifier;
use crate::transfer::eligible_set;

/// Top-1 accuracy of a classifier over a split, grouped by the training
/// split's per-class counts. Bit-stable: samples are scored in parallel but
/// tallied in index order.
pub fn evaluate(
    predictor: &(impl Predictor + Sync),
    split: &EmbeddingDataset,
    train_counts: &[u32],
    thresholds: GroupThresholds,
) -> Result<GroupReport> {
    if train_counts.len() != split.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: split.num_classes(),
            got: train_counts.len(),
        });
    }
    if predictor.num_classes() != split.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: split.num_classes(),
            got: predictor.num_classes(),
        });
    }

    let predictions: Vec<usize> = (0..split.len())
        .into_par_iter()
        .map(|i| -> Result<usize> {
            let probs = predictor.predict(split.feature(i))?;
            Ok(argmax(probs.view()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut many = GroupTally::default();
    let mut medium = GroupTally::default();
    let mut few = GroupTally::default();
    let mut overall = GroupTally::default();
    let mut per_class = vec![GroupTally::default(); split.num_classes()];

    for (i, &pred) in predictions.iter().enumerate() {
        let label = split.label(i) as usize;
        let correct = pred == label;
        overall.add(correct);
        per_class[label].add(correct);
        match thresholds.group(train_counts[label]) {
            ClassGroup::ManyShot => many.add(correct),
            ClassGroup::MediumShot => medium.add(correct),
            ClassGroup::FewShot => few.add(correct),
        }
    }

    Ok(GroupReport {
        many,
        medium,
        few,
        overall,
        per_class,
    })
}

/// Number of classes whose prototype is nearest (by cosine) to a different
/// class's classifier weight, plus the offending class list. A tie counts as
/// a mismatch unless the class itself attains the maximum.
pub fn mismatch_count(
    protos: &PrototypeSet,
    head: &ClassifierHead,
) -> Result<(usize, Vec<usize>)> {
    let n = head.num_classes();
    let mut mismatched = Vec::new();
    for i in 0..n {
        let p = l2_normalize(protos.prototype(i)?)?;
        let mut best = f64::NEG_INFINITY;
        let mut own = 0.0;
        for j in 0..n {
            let sim = p.dot(&l2_normalize(head.weight(j))?);
            best = best.max(sim);
            if j == i {
                own = sim;
            }
        }
        if own < best {
            mismatched.push(i);
        }
    }
    Ok((mismatched.len(), mismatched))
}

/// For each prototype, cosine similarities to the eligible classifier
/// weights sorted descending, averaged rank-wise over all prototypes.
pub fn sharpness_curve(
    protos: &PrototypeSet,
    head: &ClassifierHead,
    counts: &[u32],
    k: usize,
) -> Result<Vec<f64>> {
    let eligible = eligible_set(counts, k)?;
    let n = head.num_classes();
    let mut curve = vec![0.0f64; eligible.len()];
    for i in 0..n {
        let p = l2_normalize(protos.prototype(i)?)?;
        let mut sims: Vec<f64> = eligible
            .iter()
            .map(|&j| -> Result<f64> { Ok(p.dot(&l2_normalize(head.weight(j))?)) })
            .collect::<Result<_>>()?;
        sims.sort_by(|a, b| b.partial_cmp(a).expect("cosine sims are finite"));
        for (rank, sim) in sims.iter().enumerate() {
            curve[rank] += sim / n as f64;
        }
    }
    Ok(curve)
}

/// Accuracy on the training split using validation prototypes as the
/// classifier — near-perfect scores flag memorization of oversampled data.
pub fn memorization_check(
    val_protos: &PrototypeSet,
    scale: f64,
    train: &EmbeddingDataset,
    thresholds: GroupThresholds,
) -> Result<GroupReport> {
    if let Some(class) = val_protos.present().iter().position(|&p| !p) {
        return Err(Error::AbsentPrototype { class });
    }
    let clf = PrototypeClassifier::new(val_protos, scale)?;
    evaluate(&clf, train, train.train_counts(), thresholds)
}

/// A group report labeled with the classifier and split it describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledReport {
    pub classifier: String,
    pub split: String,
    pub report: GroupReport,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    classifier: String,
    split: String,
    group: String,
    accuracy: Option<f64>,
    correct: usize,
    total: usize,
}

fn report_rows(reports: &[LabeledReport]) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for lr in reports {
        let slices = [
            ("many", &lr.report.many),
            ("medium", &lr.report.medium),
            ("few", &lr.report.few),
            ("total", &lr.report.overall),
        ];
        for (group, tally) in slices {
            rows.push(CsvRow {
                classifier: lr.classifier.clone(),
                split: lr.split.clone(),
                group: group.to_string(),
                accuracy: tally.accuracy(),
                correct: tally.correct,
                total: tally.total,
            });
        }
    }
    rows
}

/// RFC-4180 CSV, one row per (classifier, split, group) with columns
/// classifier,split,group,accuracy,correct,total. Absent groups leave the
/// accuracy field empty.
pub fn emit_csv(reports: &[LabeledReport], path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path.as_ref())
        .map_err(csv_io)?;
    writer
        .write_record(["classifier", "split", "group", "accuracy", "correct", "total"])
        .map_err(csv_io)?;
    for row in report_rows(reports) {
        let acc = row.accuracy.map(|a| a.to_string()).unwrap_or_default();
        writer
            .write_record([
                row.classifier,
                row.split,
                row.group,
                acc,
                row.correct.to_string(),
                row.total.to_string(),
            ])
            .map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

/// JSON mirror of `emit_csv`: the same rows with identical values.
pub fn emit_json(reports: &[LabeledReport], path: impl AsRef<Path>) -> Result<()> {
    let rows = report_rows(reports);
    let json = serde_json::to_string_pretty(&rows).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    fs::write(path, json)?;
    Ok(())
}

/// Per-rank sharpness curve as CSV (rank,mean_cosine).
pub fn emit_sharpness_csv(curve: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path.as_ref())
        .map_err(csv_io)?;
    writer.write_record(["rank", "mean_cosine"]).map_err(csv_io)?;
    for (rank, v) in curve.iter().enumerate() {
        writer
            .write_record([rank.to_string(), v.to_string()])
            .map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::ConfigInvalid(format!("csv error: {other:?}")),
    }
}

/// Diagnostic bundle: prototype/classifier compatibility and attention
/// sharpness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub mismatch_count: usize,
    pub mismatch_classes: Vec<usize>,
    pub sharpness_curve: Vec<f64>,
}

pub fn analyze(
    protos: &PrototypeSet,
    head: &ClassifierHead,
    counts: &[u32],
    k: usize,
) -> Result<AnalysisReport> {
    let (count, classes) = mismatch_count(protos, head)?;
    let curve = sharpness_curve(protos, head, counts, k)?;
    Ok(AnalysisReport {
        mismatch_count: count,
        mismatch_classes: classes,
        sharpness_curve: curve,
    })
}

/// Evaluation helper: classifier weights plus scale, scored as cosine.
/// Used for prototype+classifier style derived matrices.
pub struct CosineMatrix {
    pub weights: ndarray::Array2<f64>,
    pub scale: f64,
}

impl Predictor for CosineMatrix {
    fn num_classes(&self) -> usize {
        self.weights.ncols()
    }

    fn predict(&self, f: ArrayView1<'_, f64>) -> Result<ndarray::Array1<f64>> {
        crate::core::predict(self.weights.view(), self.scale, crate::core::HeadKind::Cosine, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{HeadKind, PrototypeSource};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Split whose features are scaled one-hots of the labels, so an
    /// identity-weight cosine head is always correct.
    fn one_hot_split(n: usize, per_class: usize) -> EmbeddingDataset {
        let m = n * per_class;
        let mut features = Array2::zeros((m, n));
        let mut labels = Vec::with_capacity(m);
        for c in 0..n {
            for s in 0..per_class {
                features[(c * per_class + s, c)] = 1.0 + s as f64;
                labels.push(c as u32);
            }
        }
        EmbeddingDataset::new(features, labels, n).unwrap()
    }

    fn identity_head(n: usize) -> ClassifierHead {
        ClassifierHead::new(Array2::eye(n), 16.0, HeadKind::Cosine).unwrap()
    }

    #[test]
    fn perfect_classifier_scores_one_everywhere() {
        let split = one_hot_split(4, 3);
        let counts = vec![200, 50, 10, 5];
        let report =
            evaluate(&identity_head(4), &split, &counts, GroupThresholds::default()).unwrap();
        assert_eq!(report.acc_many(), Some(1.0));
        assert_eq!(report.acc_medium(), Some(1.0));
        assert_eq!(report.acc_few(), Some(1.0));
        assert_eq!(report.acc_total(), 1.0);
        assert!(report.per_class_acc().iter().all(|a| *a == Some(1.0)));
    }

    #[test]
    fn label_independent_classifier_hits_chance() {
        // features independent of labels: expected accuracy 1/N
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let n = 5;
        let m = 20_000;
        let features = Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0f64) + 0.01);
        let labels: Vec<u32> = (0..m).map(|i| (i % n) as u32).collect();
        let split = EmbeddingDataset::new(features, labels, n).unwrap();
        let head = ClassifierHead::new(
            Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0f64) + 0.01),
            16.0,
            HeadKind::Cosine,
        )
        .unwrap();
        let report = evaluate(&head, &split, &[10; 5], GroupThresholds::default()).unwrap();
        let p = 1.0 / n as f64;
        let sigma = (p * (1.0 - p) / m as f64).sqrt();
        assert!(
            (report.acc_total() - p).abs() < 3.0 * sigma,
            "total {} vs chance {p}",
            report.acc_total()
        );
    }

    #[test]
    fn empty_groups_report_absent_not_zero() {
        let split = one_hot_split(3, 2);
        // all classes few-shot
        let report =
            evaluate(&identity_head(3), &split, &[5, 5, 5], GroupThresholds::default()).unwrap();
        assert_eq!(report.acc_many(), None);
        assert_eq!(report.acc_medium(), None);
        assert_eq!(report.acc_few(), Some(1.0));
    }

    #[test]
    fn total_is_count_weighted_group_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let n = 6;
        let m = 600;
        let features = Array2::from_shape_fn((m, 4), |_| rng.random_range(-1.0..1.0f64) + 0.01);
        let labels: Vec<u32> = (0..m).map(|i| (i % n) as u32).collect();
        let split = EmbeddingDataset::new(features, labels, n).unwrap();
        let head = ClassifierHead::new(
            Array2::from_shape_fn((4, n), |_| rng.random_range(-1.0..1.0f64) + 0.01),
            16.0,
            HeadKind::Cosine,
        )
        .unwrap();
        let counts = [500, 200, 70, 30, 10, 5];
        let r = evaluate(&head, &split, &counts, GroupThresholds::default()).unwrap();
        let weighted = (r.many.correct + r.medium.correct + r.few.correct) as f64
            / (r.many.total + r.medium.total + r.few.total) as f64;
        assert!((r.acc_total() - weighted).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let split = one_hot_split(3, 1);
        assert!(matches!(
            evaluate(&identity_head(3), &split, &[5, 5], GroupThresholds::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            evaluate(&identity_head(4), &split, &[5, 5, 5], GroupThresholds::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identical_matrices_have_zero_mismatches() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let w = Array2::from_shape_fn((5, 4), |_| rng.random_range(-1.0..1.0f64) + 0.02);
        let head = ClassifierHead::new(w.clone(), 16.0, HeadKind::Cosine).unwrap();
        let protos = PrototypeSet::new(w, PrototypeSource::Train, vec![true; 4]).unwrap();
        let (count, classes) = mismatch_count(&protos, &head).unwrap();
        assert_eq!(count, 0);
        assert!(classes.is_empty());
    }

    #[test]
    fn deranged_prototypes_all_mismatch() {
        // orthonormal weights, prototypes cycled by one
        let n = 5;
        let w = Array2::eye(n);
        let mut p = Array2::zeros((n, n));
        for c in 0..n {
            p.column_mut(c).assign(&w.column((c + 1) % n));
        }
        let head = ClassifierHead::new(w, 16.0, HeadKind::Cosine).unwrap();
        let protos = PrototypeSet::new(p, PrototypeSource::Train, vec![true; n]).unwrap();
        let (count, classes) = mismatch_count(&protos, &head).unwrap();
        assert_eq!(count, n);
        assert_eq!(classes, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn small_perturbations_keep_matches() {
        // well separated weights (pairwise cosine 0), perturbation <= 0.01:
        // the oracle below verifies each class stays nearest to itself
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let n = 6;
        let w = Array2::eye(n);
        let p = Array2::from_shape_fn((n, n), |(i, j)| {
            w[(i, j)] + rng.random_range(-0.01..0.01f64)
        });
        let head = ClassifierHead::new(w.clone(), 16.0, HeadKind::Cosine).unwrap();
        let protos = PrototypeSet::new(p.clone(), PrototypeSource::Train, vec![true; n]).unwrap();

        // independent check of the geometric claim
        for i in 0..n {
            let pi = l2_normalize(p.column(i)).unwrap();
            let own = pi.dot(&w.column(i));
            for j in 0..n {
                if j != i {
                    assert!(pi.dot(&w.column(j)) < own);
                }
            }
        }

        let (count, _) = mismatch_count(&protos, &head).unwrap();
        assert_eq!(count, 0);
    }

    #[test]
    fn mismatch_invariant_to_column_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let w = Array2::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0f64) + 0.02);
        let p = Array2::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0f64) + 0.02);
        let head = ClassifierHead::new(w.clone(), 16.0, HeadKind::Cosine).unwrap();
        let protos = PrototypeSet::new(p.clone(), PrototypeSource::Train, vec![true; 5]).unwrap();
        let base = mismatch_count(&protos, &head).unwrap();

        let mut w2 = w;
        w2.column_mut(2).mapv_inplace(|x| 17.0 * x);
        let mut p2 = p;
        p2.column_mut(4).mapv_inplace(|x| 0.03 * x);
        let head2 = ClassifierHead::new(w2, 16.0, HeadKind::Cosine).unwrap();
        let protos2 = PrototypeSet::new(p2, PrototypeSource::Train, vec![true; 5]).unwrap();
        assert_eq!(base, mismatch_count(&protos2, &head2).unwrap());
    }

    #[test]
    fn sharpness_of_matching_orthonormal_sets() {
        let n = 4;
        let w = Array2::eye(n);
        let head = ClassifierHead::new(w.clone(), 16.0, HeadKind::Cosine).unwrap();
        let protos = PrototypeSet::new(w, PrototypeSource::Train, vec![true; n]).unwrap();
        let curve = sharpness_curve(&protos, &head, &[10; 4], 0).unwrap();
        assert!((curve[0] - 1.0).abs() < 1e-12);
        for v in &curve[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn sharpness_constant_for_identical_directions() {
        let n = 3;
        let mut w = Array2::zeros((2, n));
        for c in 0..n {
            w[(0, c)] = (c + 1) as f64; // same direction, different norms
        }
        let head = ClassifierHead::new(w.clone(), 16.0, HeadKind::Cosine).unwrap();
        let protos = PrototypeSet::new(w, PrototypeSource::Train, vec![true; n]).unwrap();
        let curve = sharpness_curve(&protos, &head, &[10; 3], 0).unwrap();
        for v in &curve {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sharpness_matches_brute_force_and_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let n = 5;
        let dim = 4;
        let w = Array2::from_shape_fn((dim, n), |_| rng.random_range(-1.0..1.0f64) + 0.02);
        let p = Array2::from_shape_fn((dim, n), |_| rng.random_range(-1.0..1.0f64) + 0.02);
        let counts = [120, 80, 30, 9, 2];
        let k = 5;
        let head = ClassifierHead::new(w.clone(), 16.0, HeadKind::Cosine).unwrap();
        let protos = PrototypeSet::new(p.clone(), PrototypeSource::Train, vec![true; n]).unwrap();
        let curve = sharpness_curve(&protos, &head, &counts, k).unwrap();

        // brute force oracle with plain loops
        let eligible: Vec<usize> = (0..n).filter(|&j| counts[j] as usize > k).collect();
        let mut expect = vec![0.0f64; eligible.len()];
        for i in 0..n {
            let pi = l2_normalize(p.column(i)).unwrap();
            let mut sims: Vec<f64> = eligible
                .iter()
                .map(|&j| pi.dot(&l2_normalize(w.column(j)).unwrap()))
                .collect();
            sims.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (r, s) in sims.iter().enumerate() {
                expect[r] += s / n as f64;
            }
        }
        assert_eq!(curve.len(), eligible.len());
        for (a, b) in curve.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for pair in curve.windows(2) {
            assert!(pair[0] >= pair[1] - 1e-12);
        }
    }

    #[test]
    fn memorization_check_equals_manual_evaluation() {
        let split = one_hot_split(3, 4);
        let protos = PrototypeSet::new(
            Array2::eye(3),
            PrototypeSource::Validation,
            vec![true; 3],
        )
        .unwrap();
        let direct = memorization_check(&protos, 16.0, &split, GroupThresholds::default()).unwrap();
        let clf = PrototypeClassifier::new(&protos, 16.0).unwrap();
        let manual = evaluate(&clf, &split, split.train_counts(), GroupThresholds::default())
            .unwrap();
        assert_eq!(direct, manual);
        assert_eq!(direct.acc_total(), 1.0);
    }

    #[test]
    fn orthogonal_validation_prototypes_score_near_chance() {
        // features live on the first axes, prototypes on disjoint axes
        let n = 4;
        let m = 400;
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let features = Array2::from_shape_fn((m, 2 * n), |(_, j)| {
            if j < n {
                rng.random_range(0.1..1.0f64)
            } else {
                0.0
            }
        });
        let labels: Vec<u32> = (0..m).map(|i| (i % n) as u32).collect();
        let split = EmbeddingDataset::new(features, labels, n).unwrap();
        let mut p = Array2::zeros((2 * n, n));
        for c in 0..n {
            p[(n + c, c)] = 1.0;
        }
        let protos = PrototypeSet::new(p, PrototypeSource::Validation, vec![true; n]).unwrap();
        let r = memorization_check(&protos, 16.0, &split, GroupThresholds::default()).unwrap();
        // scores all equal: ties resolve to class 0, so accuracy is 1/N here
        assert!((r.acc_total() - 1.0 / n as f64).abs() < 0.05);
    }

    #[test]
    fn absent_validation_prototype_errors() {
        let split = one_hot_split(2, 2);
        let protos = PrototypeSet::new(
            Array2::eye(2),
            PrototypeSource::Validation,
            vec![true, false],
        )
        .unwrap();
        assert!(matches!(
            memorization_check(&protos, 16.0, &split, GroupThresholds::default()),
            Err(Error::AbsentPrototype { class: 1 })
        ));
    }

    #[test]
    fn csv_header_only_for_empty_reports() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        emit_csv(&[], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "classifier,split,group,accuracy,correct,total\r\n");
    }

    #[test]
    fn csv_one_report_is_header_plus_four_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        let split = one_hot_split(3, 2);
        let report =
            evaluate(&identity_head(3), &split, &[200, 50, 5], GroupThresholds::default())
                .unwrap();
        emit_csv(
            &[LabeledReport {
                classifier: "cosine".into(),
                split: "test".into(),
                report,
            }],
            &path,
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.trim_end().split("\r\n").collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("cosine,test,many,"));
        assert!(lines[4].starts_with("cosine,test,total,"));
    }

    #[test]
    fn csv_round_trip_recovers_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.csv");
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        let n = 5;
        let m = 300;
        let features = Array2::from_shape_fn((m, 3), |_| rng.random_range(-1.0..1.0f64) + 0.01);
        let labels: Vec<u32> = (0..m).map(|i| (i % n) as u32).collect();
        let split = EmbeddingDataset::new(features, labels, n).unwrap();
        let head = ClassifierHead::new(
            Array2::from_shape_fn((3, n), |_| rng.random_range(-1.0..1.0f64) + 0.01),
            16.0,
            HeadKind::Cosine,
        )
        .unwrap();
        let report =
            evaluate(&head, &split, &[300, 120, 60, 12, 4], GroupThresholds::default()).unwrap();
        let labeled = LabeledReport {
            classifier: "cosine".into(),
            split: "test".into(),
            report: report.clone(),
        };
        emit_csv(std::slice::from_ref(&labeled), &path).unwrap();

        let mut reader = csv::Reader::from_path(&path).unwrap();
        let mut seen = 0;
        for row in reader.records() {
            let row = row.unwrap();
            let group = &row[2];
            let acc: Option<f64> = if row[3].is_empty() {
                None
            } else {
                Some(row[3].parse().unwrap())
            };
            let expect = match group {
                "many" => report.acc_many(),
                "medium" => report.acc_medium(),
                "few" => report.acc_few(),
                "total" => Some(report.acc_total()),
                other => panic!("unexpected group {other}"),
            };
            assert_eq!(acc, expect, "group {group}");
            seen += 1;
        }
        assert_eq!(seen, 4);
    }

    #[test]
    fn json_mirror_carries_identical_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let split = one_hot_split(2, 2);
        let report =
            evaluate(&identity_head(2), &split, &[120, 3], GroupThresholds::default()).unwrap();
        emit_json(
            &[LabeledReport {
                classifier: "c".into(),
                split: "test".into(),
                report,
            }],
            &path,
        )
        .unwrap();
        let rows: Vec<serde_json::Value> =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0]["group"], "many");
        assert_eq!(rows[0]["accuracy"], 1.0);
        assert_eq!(rows[1]["group"], "medium");
        assert!(rows[1]["accuracy"].is_null());
    }
}
