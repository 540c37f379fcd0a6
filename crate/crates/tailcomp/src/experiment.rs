//! End-to-end pipeline: generate → train → prototypes → transfer → evaluate,
//! with a table-shaped report. Every stage round-trips its artifact through
//! the on-disk formats, so a pipeline run composes exactly like the
//! equivalent sequence of CLI subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::core::{
    ClassGroup, ClassifierHead, EmbeddingDataset, GroupReport, GroupThresholds, HeadKind,
    Predictor, PrototypeSet, PrototypeSource,
};
use crate::data::{
    generate_synthetic, load_classifier, load_embd, load_prototypes, save_classifier, save_embd,
    save_prototypes, SynthConfig,
};
use crate::error::{Error, Result};
use crate::eval::{
    analyze, emit_csv, emit_sharpness_csv, evaluate, memorization_check, AnalysisReport,
    CosineMatrix, LabeledReport,
};
use crate::head::{train_head, TrainConfig};
use crate::prototypes::{compute_prototypes, PrototypeClassifier};
use crate::transfer::{
    build_continual, build_hybrid, save_hybrid, CosineEnsemble, HybridClassifier, TransferConfig,
    TransferMode,
};
use crate::core::l2_normalize;

/// Everything a full experiment run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub transfer: TransferConfig,
    pub kind: HeadKind,
    pub thresholds: GroupThresholds,
    /// Drop few-shot classes from head training and build continual
    /// classifiers instead of hybrids.
    pub continual: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            transfer: TransferConfig::default(),
            kind: HeadKind::Cosine,
            thresholds: GroupThresholds::default(),
            continual: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.train.validate()?;
        self.transfer.validate()?;
        if self.continual && self.transfer.k_values.iter().all(|&k| k == 0) {
            return Err(Error::ConfigInvalid(
                "continual mode needs at least one k above 0".into(),
            ));
        }
        Ok(())
    }

    /// One seed drives generation and training.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.synth.seed = seed;
        self.train.seed = seed;
        self
    }
}

/// Table-shaped experiment outcome plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub continual: bool,
    pub rows: Vec<LabeledReport>,
    pub analysis: AnalysisReport,
    pub memorization: LabeledReport,
}

impl ExperimentReport {
    pub fn row(&self, classifier: &str) -> Option<&GroupReport> {
        self.rows
            .iter()
            .find(|r| r.classifier == classifier)
            .map(|r| &r.report)
    }

    /// The ensemble row is always last.
    pub fn ensemble(&self) -> &GroupReport {
        &self.rows.last().expect("report always has rows").report
    }
}

fn labeled(name: &str, report: GroupReport) -> LabeledReport {
    LabeledReport {
        classifier: name.to_string(),
        split: "test".to_string(),
        report,
    }
}

/// Runs the full pipeline into `out_dir`, writing the EMBD/HEAD artifacts,
/// `report.json`, `report.csv` and `sharpness.csv`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let out = out_dir.as_ref();
    fs::create_dir_all(out)?;

    let (train, val, test) = generate_synthetic(&cfg.synth)?;
    save_embd(out.join("train.embd"), &train)?;
    save_embd(out.join("val.embd"), &val)?;
    save_embd(out.join("test.embd"), &test)?;
    let train = load_embd(out.join("train.embd"))?;
    let val = load_embd(out.join("val.embd"))?;
    let test = load_embd(out.join("test.embd"))?;

    let group_counts: Vec<u32> = train.train_counts().to_vec();

    // continual protocol: the head never sees few-shot classes
    let head_train = if cfg.continual {
        let keep: Vec<bool> = group_counts
            .iter()
            .map(|&n| cfg.thresholds.group(n) != ClassGroup::FewShot)
            .collect();
        train.retain_classes(&keep)?
    } else {
        train.clone()
    };
    let eligibility_counts: Vec<u32> = head_train.train_counts().to_vec();

    let head = train_head(&head_train, cfg.kind, &cfg.train)?;
    save_classifier(out.join("head.head"), &head)?;
    let head = load_classifier(out.join("head.head"))?;

    let train_protos = compute_prototypes(&train, PrototypeSource::Train)?;
    save_prototypes(out.join("protos_train.head"), &train_protos)?;
    let train_protos = load_prototypes(out.join("protos_train.head"), PrototypeSource::Train)?;

    let val_protos = compute_prototypes(&val, PrototypeSource::Validation)?;
    save_prototypes(out.join("protos_val.head"), &val_protos)?;
    let val_protos = load_prototypes(out.join("protos_val.head"), PrototypeSource::Validation)?;

    let classifiers = build_transfer_classifiers(
        &train_protos,
        &head,
        &eligibility_counts,
        &cfg.transfer,
        cfg.continual,
    )?;
    for clf in &classifiers {
        let tag = match clf.mode {
            TransferMode::Hybrid => "hybrid",
            TransferMode::Continual => "continual",
        };
        save_hybrid(out.join(format!("{tag}_k{:03}.head", clf.k)), clf)?;
    }

    let report = build_report(
        cfg,
        &head,
        &train_protos,
        &val_protos,
        &classifiers,
        &train,
        &test,
        &group_counts,
        &eligibility_counts,
    )?;

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    fs::write(out.join("report.json"), json)?;
    emit_csv(&report.rows, out.join("report.csv"))?;
    emit_sharpness_csv(&report.analysis.sharpness_curve, out.join("sharpness.csv"))?;

    Ok(report)
}

/// The transfer classifiers an experiment evaluates: w^h(k) for every k in
/// hybrid mode; w^hc(k) for every k > 0 in continual mode (prototypes stand
/// in for the low-k member of the continual ensemble).
pub fn build_transfer_classifiers(
    protos: &PrototypeSet,
    head: &ClassifierHead,
    eligibility_counts: &[u32],
    transfer: &TransferConfig,
    continual: bool,
) -> Result<Vec<HybridClassifier>> {
    let mut out = Vec::new();
    for &k in &transfer.k_values {
        if continual {
            if k == 0 {
                continue;
            }
            out.push(build_continual(protos, head, eligibility_counts, transfer, k)?);
        } else {
            out.push(build_hybrid(protos, head, eligibility_counts, transfer, k)?);
        }
    }
    Ok(out)
}

/// Matrix of p̂_i + ŵ_i columns (the prototypes-plus-classifier row).
fn prototype_plus_classifier(
    protos: &PrototypeSet,
    head: &ClassifierHead,
) -> Result<CosineMatrix> {
    let mut weights = ndarray::Array2::zeros((head.dim(), head.num_classes()));
    for class in 0..head.num_classes() {
        let mut col = l2_normalize(protos.prototype(class)?)?;
        col += &l2_normalize(head.weight(class))?;
        weights.column_mut(class).assign(&col);
    }
    Ok(CosineMatrix {
        weights,
        scale: head.scale(),
    })
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    cfg: &ExperimentConfig,
    head: &ClassifierHead,
    train_protos: &PrototypeSet,
    val_protos: &PrototypeSet,
    classifiers: &[HybridClassifier],
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    group_counts: &[u32],
    eligibility_counts: &[u32],
) -> Result<ExperimentReport> {
    let thresholds = cfg.thresholds;
    let mut rows = Vec::new();

    rows.push(labeled(
        "cosine classifier",
        evaluate(head, test, group_counts, thresholds)?,
    ));

    let proto_clf = PrototypeClassifier::new(train_protos, head.scale())?;
    rows.push(labeled(
        "prototypes",
        evaluate(&proto_clf, test, group_counts, thresholds)?,
    ));

    let tag = if cfg.continual { "w^hc" } else { "w^h" };
    if !cfg.continual {
        let combined = prototype_plus_classifier(train_protos, head)?;
        rows.push(labeled(
            "prototypes + classifier",
            evaluate(&combined, test, group_counts, thresholds)?,
        ));
    }

    for clf in classifiers {
        rows.push(labeled(
            &format!("{tag}({})", clf.k),
            evaluate(clf, test, group_counts, thresholds)?,
        ));
    }

    let mut members: Vec<(ndarray::ArrayView2<'_, f64>, f64)> = Vec::new();
    let mut member_names: Vec<String> = Vec::new();
    if cfg.continual {
        members.push((train_protos.matrix(), head.scale()));
        member_names.push("prototypes".to_string());
    }
    for clf in classifiers {
        members.push((clf.weights(), clf.scale()));
        member_names.push(format!("{tag}({})", clf.k));
    }
    let ensemble = CosineEnsemble::new(members)?;
    rows.push(labeled(
        &format!("ensemble({})", member_names.join(", ")),
        evaluate(&ensemble, test, group_counts, thresholds)?,
    ));

    let analysis = analyze(train_protos, head, eligibility_counts, 0)?;
    let memorization = LabeledReport {
        classifier: "validation prototypes".to_string(),
        split: "train".to_string(),
        report: memorization_check(val_protos, head.scale(), train, thresholds)?,
    };

    Ok(ExperimentReport {
        seed: cfg.synth.seed,
        continual: cfg.continual,
        rows,
        analysis,
        memorization,
    })
}

fn fmt_acc(acc: Option<f64>) -> String {
    match acc {
        Some(a) => format!("{:6.2}", 100.0 * a),
        None => "   n/a".to_string(),
    }
}

/// Fixed-width table with one row per classifier and many/medium/few/total
/// columns, accuracies in percent.
pub fn format_table(report: &ExperimentReport) -> String {
    let name_width = report
        .rows
        .iter()
        .map(|r| r.classifier.len())
        .max()
        .unwrap_or(10)
        .max(10);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_width$}  {:>6}  {:>6}  {:>6}  {:>6}",
        "classifier", "many", "medium", "few", "total"
    );
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{:<name_width$}  {}  {}  {}  {}",
            row.classifier,
            fmt_acc(row.report.acc_many()),
            fmt_acc(row.report.acc_medium()),
            fmt_acc(row.report.acc_few()),
            fmt_acc(Some(row.report.acc_total())),
        );
    }
    let _ = writeln!(
        out,
        "\nprototype/weight mismatches: {}  (classes {:?})",
        report.analysis.mismatch_count, report.analysis.mismatch_classes
    );
    let _ = writeln!(
        out,
        "memorization check (val prototypes on train): total {}",
        fmt_acc(Some(report.memorization.report.acc_total())).trim()
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A small but structured configuration that runs in well under a second.
    pub(crate) fn tiny_config(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            synth: SynthConfig {
                dim: 8,
                num_superclusters: 2,
                classes_per_supercluster: 3,
                count_max: 120,
                count_min: 4,
                test_per_class: 5,
                ..SynthConfig::default()
            },
            train: TrainConfig {
                epochs: 3,
                batch_size: 32,
                ..TrainConfig::default()
            },
            transfer: TransferConfig {
                k_values: vec![0, 20, 100],
                ..TransferConfig::default()
            },
            ..ExperimentConfig::default()
        }
        .with_seed(seed)
    }

    #[test]
    fn experiment_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&tiny_config(1), dir.path()).unwrap();
        for file in [
            "train.embd",
            "val.embd",
            "test.embd",
            "head.head",
            "protos_train.head",
            "protos_val.head",
            "hybrid_k000.head",
            "hybrid_k000.json",
            "hybrid_k020.head",
            "hybrid_k100.head",
            "report.json",
            "report.csv",
            "sharpness.csv",
        ] {
            assert!(dir.path().join(file).exists(), "{file} missing");
        }
        assert_eq!(report.rows.len(), 3 + 3 + 1);
        assert_eq!(report.rows[0].classifier, "cosine classifier");
        assert!(report.rows.last().unwrap().classifier.starts_with("ensemble("));
    }

    #[test]
    fn experiment_is_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let r1 = run_experiment(&tiny_config(2), d1.path()).unwrap();
        let r2 = run_experiment(&tiny_config(2), d2.path()).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(
            std::fs::read(d1.path().join("report.json")).unwrap(),
            std::fs::read(d2.path().join("report.json")).unwrap()
        );
    }

    #[test]
    fn continual_mode_builds_positive_k_members_only() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            continual: true,
            ..tiny_config(3)
        };
        let report = run_experiment(&cfg, dir.path()).unwrap();
        assert!(dir.path().join("continual_k020.head").exists());
        assert!(dir.path().join("continual_k100.head").exists());
        assert!(!dir.path().join("continual_k000.head").exists());
        // rows: cosine, prototypes, w^hc(20), w^hc(100), ensemble
        assert_eq!(report.rows.len(), 5);
        assert_eq!(
            report.rows.last().unwrap().classifier,
            "ensemble(prototypes, w^hc(20), w^hc(100))"
        );
    }

    #[test]
    fn continual_with_only_k_zero_is_rejected() {
        let mut cfg = tiny_config(4);
        cfg.continual = true;
        cfg.transfer.k_values = vec![0];
        assert!(matches!(
            cfg.validate(),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn table_formatting_handles_absent_groups() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&tiny_config(5), dir.path()).unwrap();
        let table = format_table(&report);
        assert!(table.contains("classifier"));
        assert!(table.contains("cosine classifier"));
        assert!(table.contains("total"));
    }
}
