//! Command-line front end: synthetic data generation, head training,
//! prototype computation, knowledge transfer and the end-to-end experiment.
//!
//! Exit codes: 0 on success, 1 on runtime errors, 2 on usage/config errors.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::ArrayView2;

use tailcomp::core::{GroupThresholds, HeadKind, PrototypeSource};
use tailcomp::data::{
    generate_synthetic, load_classifier, load_embd, load_head, load_prototypes, save_classifier,
    save_embd, save_prototypes, StoredKind, SynthConfig,
};
use tailcomp::error::{Error, Result};
use tailcomp::eval::{emit_csv, emit_json, evaluate, CosineMatrix, LabeledReport};
use tailcomp::experiment::{format_table, run_experiment, ExperimentConfig};
use tailcomp::head::{train_head, TrainConfig};
use tailcomp::prototypes::compute_prototypes;
use tailcomp::sampling::SamplerKind;
use tailcomp::transfer::{
    build_continual, build_hybrid, save_hybrid, CosineEnsemble, Direction, TransferConfig,
    TransferMode,
};

#[derive(Parser)]
#[command(
    name = "tailcomp",
    version,
    about = "Compositional knowledge transfer for long-tail classification over fixed embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic long-tail train/val/test EMBD files
    Gen(GenArgs),
    /// Train a classifier head on an EMBD file
    Train(TrainArgs),
    /// Compute class prototypes from an EMBD split
    Protos(ProtosArgs),
    /// Build hybrid or continual classifiers from a head and prototypes
    Transfer(TransferArgs),
    /// Evaluate stored classifiers on a split, grouped by training counts
    Eval(EvalArgs),
    /// Run the full pipeline and print a per-group accuracy table
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Cosine,
    Dot,
}

impl From<ClassifierArg> for HeadKind {
    fn from(c: ClassifierArg) -> Self {
        match c {
            ClassifierArg::Cosine => HeadKind::Cosine,
            ClassifierArg::Dot => HeadKind::DotProduct,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Uniform,
    Sqrt,
    ClassAware,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    P2w,
    W2p,
    W2w,
    P2p,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::P2w => Direction::PtoW,
            DirectionArg::W2p => Direction::WtoP,
            DirectionArg::W2w => Direction::WtoW,
            DirectionArg::P2p => Direction::PtoP,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Hybrid,
    Continual,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Train,
    Val,
}

/// Synthetic-generator overrides shared by `gen` and `experiment`;
/// unset flags fall back to the config file, then to the defaults.
#[derive(Args)]
struct SynthOverrides {
    /// Feature dimension F
    #[arg(long)]
    dim: Option<usize>,
    /// Number of superclusters G
    #[arg(long)]
    superclusters: Option<usize>,
    /// Classes per supercluster C (N = G*C)
    #[arg(long)]
    classes_per_supercluster: Option<usize>,
    /// Radius of the supercluster-centre sphere
    #[arg(long)]
    radius: Option<f64>,
    /// Std-dev of class-centre offsets
    #[arg(long)]
    class_offset_sigma: Option<f64>,
    /// Std-dev of per-sample noise
    #[arg(long)]
    sample_noise_sigma: Option<f64>,
    /// Training count of the most frequent class
    #[arg(long)]
    count_max: Option<u32>,
    /// Training count floor
    #[arg(long)]
    count_min: Option<u32>,
    /// Power-law exponent of the count decay
    #[arg(long)]
    count_exponent: Option<f64>,
    /// Balanced test samples per class
    #[arg(long)]
    test_per_class: Option<u32>,
}

impl SynthOverrides {
    fn apply(&self, cfg: &mut SynthConfig) {
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = self.superclusters {
            cfg.num_superclusters = v;
        }
        if let Some(v) = self.classes_per_supercluster {
            cfg.classes_per_supercluster = v;
        }
        if let Some(v) = self.radius {
            cfg.supercluster_radius = v;
        }
        if let Some(v) = self.class_offset_sigma {
            cfg.class_offset_sigma = v;
        }
        if let Some(v) = self.sample_noise_sigma {
            cfg.sample_noise_sigma = v;
        }
        if let Some(v) = self.count_max {
            cfg.count_max = v;
        }
        if let Some(v) = self.count_min {
            cfg.count_min = v;
        }
        if let Some(v) = self.count_exponent {
            cfg.count_exponent = v;
        }
        if let Some(v) = self.test_per_class {
            cfg.test_per_class = v;
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Key=value config file (flags win on conflict)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for train.embd, val.embd, test.embd
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    synth: SynthOverrides,
}

#[derive(Args)]
struct TrainArgs {
    /// Training split (EMBD)
    train_embd: PathBuf,
    #[arg(long, value_enum, default_value_t = ClassifierArg::Cosine)]
    classifier: ClassifierArg,
    #[arg(long, value_enum, default_value_t = SamplerArg::Sqrt)]
    sampler: SamplerArg,
    /// Within-class draws per class pick (class-aware sampler)
    #[arg(long, default_value_t = 4)]
    samples_per_class: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 5e-4)]
    weight_decay: f64,
    #[arg(long, default_value_t = 16.0)]
    scale_init: f64,
    /// Freeze the scale parameter at its initial value
    #[arg(long)]
    scale_fixed: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output HEAD file
    #[arg(long, default_value = "head.head")]
    out: PathBuf,
}

#[derive(Args)]
struct ProtosArgs {
    /// Labeled split to average (EMBD)
    split_embd: PathBuf,
    /// Split tag recorded for bookkeeping
    #[arg(long, value_enum, default_value_t = SourceArg::Train)]
    source: SourceArg,
    /// Output HEAD file (kind byte 2)
    #[arg(long, default_value = "protos.head")]
    out: PathBuf,
}

#[derive(Args)]
struct TransferArgs {
    /// Trained classifier head (HEAD)
    #[arg(long)]
    head: PathBuf,
    /// Prototype set (HEAD, kind 2)
    #[arg(long)]
    protos: PathBuf,
    /// EMBD file whose labels supply the per-class eligibility counts
    #[arg(long)]
    counts: PathBuf,
    /// Attention temperature
    #[arg(long, default_value_t = 10.0)]
    tau: f64,
    /// Eligibility thresholds, strictly increasing
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 20, 100])]
    k: Vec<usize>,
    #[arg(long, value_enum, default_value_t = DirectionArg::P2w)]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Hybrid)]
    mode: ModeArg,
    /// Drop each class's own weight from its eligible set
    #[arg(long)]
    exclude_self: bool,
    /// Output directory for <mode>_k###.head files and sidecars
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// One or more stored classifiers (HEAD format, any kind)
    #[arg(long, required = true, num_args = 1..)]
    weights: Vec<PathBuf>,
    /// Split to score (EMBD)
    #[arg(long)]
    split: PathBuf,
    /// Training split whose labels define the class groups (EMBD)
    #[arg(long)]
    counts: PathBuf,
    /// Average the classifiers' softmax outputs instead of reporting each
    #[arg(long)]
    ensemble: bool,
    /// Scale override applied to every cosine-scored member
    #[arg(long)]
    scale: Option<f64>,
    /// Many-shot group boundary (n >= many-min)
    #[arg(long, default_value_t = 100)]
    many_min: u32,
    /// Few-shot group boundary (n <= few-max)
    #[arg(long, default_value_t = 20)]
    few_max: u32,
    /// Optional CSV report path
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Optional JSON report path
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Key=value config file (flags win on conflict)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for generation and training
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts and reports
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Exclude few-shot classes from head training; build continual classifiers
    #[arg(long)]
    continual: bool,
    #[command(flatten)]
    synth: SynthOverrides,
    #[arg(long, value_enum)]
    classifier: Option<ClassifierArg>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    scale_init: Option<f64>,
    #[arg(long)]
    scale_fixed: bool,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    #[arg(long)]
    exclude_self: bool,
    #[arg(long)]
    many_min: Option<u32>,
    #[arg(long)]
    few_max: Option<u32>,
}

fn main() -> ExitCode {
    env_logger::init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// TAILCOMP_THREADS caps internal parallelism; unset means one thread per
/// logical processor.
fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("TAILCOMP_THREADS") {
        let n: usize = raw.parse().map_err(|_| {
            Error::ConfigInvalid(format!("TAILCOMP_THREADS must be a positive integer, got {raw:?}"))
        })?;
        if n == 0 {
            return Err(Error::ConfigInvalid(
                "TAILCOMP_THREADS must be at least 1".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Protos(args) => cmd_protos(args),
        Command::Transfer(args) => cmd_transfer(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

// ---------------------------------------------------------------------------
// key=value config files

fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::ConfigInvalid(format!(
                "{}:{}: expected key=value, got {line:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::ConfigInvalid(format!("bad value for {key}: {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::ConfigInvalid(format!(
            "bad value for {key}: {value:?} (expected true/false)"
        ))),
    }
}

fn sampler_from_str(value: &str, samples_per_class: usize) -> Result<SamplerKind> {
    match value {
        "uniform" => Ok(SamplerKind::Uniform),
        "sqrt" => Ok(SamplerKind::SquareRoot),
        "class-aware" => Ok(SamplerKind::ClassAware { samples_per_class }),
        _ => Err(Error::ConfigInvalid(format!(
            "unknown sampler {value:?} (expected uniform, sqrt or class-aware)"
        ))),
    }
}

fn direction_from_str(value: &str) -> Result<Direction> {
    match value {
        "p2w" => Ok(Direction::PtoW),
        "w2p" => Ok(Direction::WtoP),
        "w2w" => Ok(Direction::WtoW),
        "p2p" => Ok(Direction::PtoP),
        _ => Err(Error::ConfigInvalid(format!(
            "unknown direction {value:?} (expected p2w, w2p, w2w or p2p)"
        ))),
    }
}

/// Applies a parsed config file onto the defaults. Unknown keys are errors.
fn apply_config(map: &HashMap<String, String>, cfg: &mut ExperimentConfig) -> Result<()> {
    let mut samples_per_class = 4usize;
    if let Some(v) = map.get("samples_per_class") {
        samples_per_class = parse_value("samples_per_class", v)?;
    }
    for (key, value) in map {
        match key.as_str() {
            "dim" => cfg.synth.dim = parse_value(key, value)?,
            "superclusters" => cfg.synth.num_superclusters = parse_value(key, value)?,
            "classes_per_supercluster" => {
                cfg.synth.classes_per_supercluster = parse_value(key, value)?
            }
            "radius" => cfg.synth.supercluster_radius = parse_value(key, value)?,
            "class_offset_sigma" => cfg.synth.class_offset_sigma = parse_value(key, value)?,
            "sample_noise_sigma" => cfg.synth.sample_noise_sigma = parse_value(key, value)?,
            "count_max" => cfg.synth.count_max = parse_value(key, value)?,
            "count_min" => cfg.synth.count_min = parse_value(key, value)?,
            "count_exponent" => cfg.synth.count_exponent = parse_value(key, value)?,
            "test_per_class" => cfg.synth.test_per_class = parse_value(key, value)?,
            "seed" => {
                let seed = parse_value(key, value)?;
                cfg.synth.seed = seed;
                cfg.train.seed = seed;
            }
            "epochs" => cfg.train.epochs = parse_value(key, value)?,
            "batch_size" => cfg.train.batch_size = parse_value(key, value)?,
            "lr" => cfg.train.learning_rate = parse_value(key, value)?,
            "momentum" => cfg.train.momentum = parse_value(key, value)?,
            "weight_decay" => cfg.train.weight_decay = parse_value(key, value)?,
            "scale_init" => cfg.train.scale_init = parse_value(key, value)?,
            "scale_learnable" => cfg.train.scale_learnable = parse_bool(key, value)?,
            "sampler" => cfg.train.sampler = sampler_from_str(value, samples_per_class)?,
            "samples_per_class" => {} // consumed above
            "classifier" => {
                cfg.kind = match value.as_str() {
                    "cosine" => HeadKind::Cosine,
                    "dot" => HeadKind::DotProduct,
                    _ => {
                        return Err(Error::ConfigInvalid(format!(
                            "unknown classifier {value:?} (expected cosine or dot)"
                        )))
                    }
                }
            }
            "tau" => cfg.transfer.tau = parse_value(key, value)?,
            "k" => {
                cfg.transfer.k_values = value
                    .split(',')
                    .map(|t| parse_value("k", t.trim()))
                    .collect::<Result<_>>()?
            }
            "direction" => cfg.transfer.direction = direction_from_str(value)?,
            "exclude_self" => cfg.transfer.exclude_self = parse_bool(key, value)?,
            "continual" => cfg.continual = parse_bool(key, value)?,
            "many_min" => cfg.thresholds.many_min = parse_value(key, value)?,
            "few_max" => cfg.thresholds.few_max = parse_value(key, value)?,
            _ => {
                return Err(Error::ConfigInvalid(format!("unknown config key {key:?}")));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// subcommands

fn cmd_gen(args: GenArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        apply_config(&parse_config_file(path)?, &mut cfg)?;
    }
    args.synth.apply(&mut cfg.synth);
    if let Some(seed) = args.seed {
        cfg.synth.seed = seed;
    }

    let (train, val, test) = generate_synthetic(&cfg.synth)?;
    fs::create_dir_all(&args.out)?;
    save_embd(args.out.join("train.embd"), &train)?;
    save_embd(args.out.join("val.embd"), &val)?;
    save_embd(args.out.join("test.embd"), &test)?;
    println!(
        "wrote {} ({} samples), {} ({}), {} ({})",
        args.out.join("train.embd").display(),
        train.len(),
        args.out.join("val.embd").display(),
        val.len(),
        args.out.join("test.embd").display(),
        test.len(),
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let dataset = load_embd(&args.train_embd)?;
    let sampler = match args.sampler {
        SamplerArg::Uniform => SamplerKind::Uniform,
        SamplerArg::Sqrt => SamplerKind::SquareRoot,
        SamplerArg::ClassAware => SamplerKind::ClassAware {
            samples_per_class: args.samples_per_class,
        },
    };
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        momentum: args.momentum,
        weight_decay: args.weight_decay,
        scale_init: args.scale_init,
        scale_learnable: !args.scale_fixed,
        sampler,
        seed: args.seed,
    };
    let head = train_head(&dataset, args.classifier.into(), &cfg)?;
    save_classifier(&args.out, &head)?;
    println!(
        "trained {:?} head on {} samples; scale {:.4}; wrote {}",
        head.kind(),
        dataset.len(),
        head.scale(),
        args.out.display()
    );
    Ok(())
}

fn cmd_protos(args: ProtosArgs) -> Result<()> {
    let dataset = load_embd(&args.split_embd)?;
    let source = match args.source {
        SourceArg::Train => PrototypeSource::Train,
        SourceArg::Val => PrototypeSource::Validation,
    };
    let protos = compute_prototypes(&dataset, source)?;
    save_prototypes(&args.out, &protos)?;
    let present = protos.present().iter().filter(|&&p| p).count();
    println!(
        "computed prototypes for {present}/{} classes; wrote {}",
        protos.num_classes(),
        args.out.display()
    );
    Ok(())
}

fn cmd_transfer(args: TransferArgs) -> Result<()> {
    let head = load_classifier(&args.head)?;
    let protos = load_prototypes(&args.protos, PrototypeSource::Train)?;
    let counts_ds = load_embd(&args.counts)?;
    let counts = counts_ds.train_counts();

    let cfg = TransferConfig {
        tau: args.tau,
        k_values: args.k.clone(),
        direction: args.direction.into(),
        mode: match args.mode {
            ModeArg::Hybrid => TransferMode::Hybrid,
            ModeArg::Continual => TransferMode::Continual,
        },
        exclude_self: args.exclude_self,
    };
    cfg.validate()?;

    fs::create_dir_all(&args.out)?;
    for &k in &cfg.k_values {
        let clf = match cfg.mode {
            TransferMode::Hybrid => build_hybrid(&protos, &head, counts, &cfg, k)?,
            TransferMode::Continual => build_continual(&protos, &head, counts, &cfg, k)?,
        };
        let tag = match cfg.mode {
            TransferMode::Hybrid => "hybrid",
            TransferMode::Continual => "continual",
        };
        let path = args.out.join(format!("{tag}_k{k:03}.head"));
        save_hybrid(&path, &clf)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let split = load_embd(&args.split)?;
    let counts_ds = load_embd(&args.counts)?;
    let thresholds = GroupThresholds::new(args.many_min, args.few_max)?;

    let mut loaded = Vec::new();
    for path in &args.weights {
        let file = load_head(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        loaded.push((name, file));
    }

    let mut reports = Vec::new();
    if args.ensemble {
        let mut members: Vec<(ArrayView2<'_, f64>, f64)> = Vec::new();
        for (_, file) in &loaded {
            if file.kind == StoredKind::DotProduct {
                return Err(Error::ConfigInvalid(
                    "dot-product heads cannot join a cosine ensemble".into(),
                ));
            }
            members.push((file.weights.view(), args.scale.unwrap_or(file.scale)));
        }
        let ensemble = CosineEnsemble::new(members)?;
        let report = evaluate(&ensemble, &split, counts_ds.train_counts(), thresholds)?;
        reports.push(LabeledReport {
            classifier: "ensemble".to_string(),
            split: "eval".to_string(),
            report,
        });
    } else {
        for (name, file) in &loaded {
            let report = match file.kind {
                StoredKind::DotProduct => {
                    let head = tailcomp::core::ClassifierHead::new(
                        file.weights.clone(),
                        file.scale,
                        HeadKind::DotProduct,
                    )?;
                    evaluate(&head, &split, counts_ds.train_counts(), thresholds)?
                }
                _ => {
                    let clf = CosineMatrix {
                        weights: file.weights.clone(),
                        scale: args.scale.unwrap_or(file.scale),
                    };
                    evaluate(&clf, &split, counts_ds.train_counts(), thresholds)?
                }
            };
            reports.push(LabeledReport {
                classifier: name.clone(),
                split: "eval".to_string(),
                report,
            });
        }
    }

    for lr in &reports {
        let r = &lr.report;
        let show = |a: Option<f64>| {
            a.map(|v| format!("{:.2}", 100.0 * v))
                .unwrap_or_else(|| "n/a".to_string())
        };
        println!(
            "{}: many {} medium {} few {} total {:.2}",
            lr.classifier,
            show(r.acc_many()),
            show(r.acc_medium()),
            show(r.acc_few()),
            100.0 * r.acc_total()
        );
    }
    if let Some(path) = &args.csv {
        emit_csv(&reports, path)?;
    }
    if let Some(path) = &args.json {
        emit_json(&reports, path)?;
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        apply_config(&parse_config_file(path)?, &mut cfg)?;
    }
    args.synth.apply(&mut cfg.synth);
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(v) = args.classifier {
        cfg.kind = v.into();
    }
    if let Some(v) = args.sampler {
        cfg.train.sampler = match v {
            SamplerArg::Uniform => SamplerKind::Uniform,
            SamplerArg::Sqrt => SamplerKind::SquareRoot,
            SamplerArg::ClassAware => SamplerKind::ClassAware {
                samples_per_class: args.samples_per_class.unwrap_or(4),
            },
        };
    }
    if let Some(v) = args.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.lr {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = args.momentum {
        cfg.train.momentum = v;
    }
    if let Some(v) = args.weight_decay {
        cfg.train.weight_decay = v;
    }
    if let Some(v) = args.scale_init {
        cfg.train.scale_init = v;
    }
    if args.scale_fixed {
        cfg.train.scale_learnable = false;
    }
    if let Some(v) = args.tau {
        cfg.transfer.tau = v;
    }
    if let Some(v) = args.k.clone() {
        cfg.transfer.k_values = v;
    }
    if let Some(v) = args.direction {
        cfg.transfer.direction = v.into();
    }
    if args.exclude_self {
        cfg.transfer.exclude_self = true;
    }
    if args.continual {
        cfg.continual = true;
    }
    if let Some(v) = args.many_min {
        cfg.thresholds.many_min = v;
    }
    if let Some(v) = args.few_max {
        cfg.thresholds.few_max = v;
    }
    cfg.thresholds = GroupThresholds::new(cfg.thresholds.many_min, cfg.thresholds.few_max)?;
    cfg.transfer.mode = if cfg.continual {
        TransferMode::Continual
    } else {
        TransferMode::Hybrid
    };

    let report = run_experiment(&cfg, &args.out)?;
    print!("{}", format_table(&report));
    println!(
        "wrote {} and {}",
        args.out.join("report.json").display(),
        args.out.join("report.csv").display()
    );
    Ok(())
}
