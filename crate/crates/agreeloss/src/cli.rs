//! Command-line surface: train, eval, gradcheck, profile and compare.
//!
//! Every command honors `--seed`; identical invocations write identical
//! artifact bytes (manifests record wall-clock, so they are the one file
//! that differs between reruns). Verbosity is controlled by the
//! `AGREELOSS_LOG` environment variable.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::data::{self, ColumnSpec, Dataset};
use crate::features::FeaturizerConfig;
use crate::gradcheck::{check_all, GradCheckConfig};
use crate::losses::{loss_profile, write_profile_csv, LossKind};
use crate::manifest::{DataFormat, RunManifest};
use crate::metrics::{compare_runs, evaluate, EvalReport};
use crate::model::{predict, train, Checkpoint, ModelError, TrainConfig};
use crate::util::fmt_f64;

pub const EXIT_OK: i32 = 0;
/// Input error: unreadable files, malformed data, bad flags.
pub const EXIT_INPUT: i32 = 1;
/// Numerical failure: training produced a non-finite loss or gradient.
pub const EXIT_NUMERIC: i32 = 2;
/// Gradient check exceeded its tolerance.
pub const EXIT_GRADCHECK: i32 = 3;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFUSION_FILE: &str = "confusion.csv";

#[derive(Debug, Parser)]
#[command(
    name = "agreeloss",
    version,
    about = "Annotation-aware cross-entropy training for causality detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier; writes checkpoint, loss trace and run manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a labeled dataset.
    Eval(EvalArgs),
    /// Verify analytic loss gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Sweep single-sentence loss curves over a prediction grid.
    Profile(ProfileArgs),
    /// Evaluate several runs on one dataset and rank them by F1.
    Compare(CompareArgs),
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data (CSV with header; default columns
    /// text,label,agreement,num_votes).
    #[arg(long, required_unless_present = "from_manifest")]
    pub data: Option<PathBuf>,
    /// Treat input files as JSON lines instead of CSV.
    #[arg(long)]
    pub jsonl: bool,
    /// Optional validation split evaluated after training.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Loss to train with: vanilla, noisy or refined.
    #[arg(long, default_value = "vanilla", value_parser = parse_loss)]
    pub loss: LossKind,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Learning rate. The conservative default suits very large encoders;
    /// for this linear model values near 0.5-4 train much faster.
    #[arg(long, default_value_t = 5e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Visit examples in file order instead of a seeded shuffle.
    #[arg(long)]
    pub no_shuffle: bool,
    /// Feature dimension (power of two).
    #[arg(long, default_value_t = 1 << 18)]
    pub dim: usize,
    #[arg(long, default_value_t = 1)]
    pub ngram_min: usize,
    #[arg(long, default_value_t = 2)]
    pub ngram_max: usize,
    /// Keep original casing when tokenizing.
    #[arg(long)]
    pub no_lowercase: bool,
    /// Skip L2 normalization of feature vectors.
    #[arg(long)]
    pub no_normalize: bool,
    /// Decision threshold used for the optional --val evaluation.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value = "run")]
    pub out_dir: PathBuf,
    /// Re-run a previous training run from its manifest; the flags above
    /// are taken from the manifest and only --out-dir/--val apply.
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labeled dataset to evaluate on.
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub jsonl: bool,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Expected feature dimension; must match the checkpoint when given.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub ngram_min: Option<usize>,
    #[arg(long)]
    pub ngram_max: Option<usize>,
    /// Also write metrics.json and confusion.csv here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random batches per loss kind.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long, default_value = "noisy", value_parser = parse_loss)]
    pub loss: LossKind,
    /// Gold label of the profiled sentence.
    #[arg(long, default_value_t = 1)]
    pub label: u8,
    /// Vote count of the profiled sentence.
    #[arg(long, default_value_t = 3)]
    pub votes: u32,
    /// Agreement values, one curve each.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.6, 2.0 / 3.0, 0.8, 1.0])]
    pub r_values: Vec<f64>,
    /// Number of y_pred grid points.
    #[arg(long, default_value_t = 1001)]
    pub grid: usize,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Labeled dataset all runs are evaluated on.
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub jsonl: bool,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Also write the ranking as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run directories, each containing manifest.json and model.ckpt.
    #[arg(num_args = 2.., required = true)]
    pub runs: Vec<PathBuf>,
}

pub fn run(cli: Cli) -> i32 {
    match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Profile(args) => cmd_profile(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn fail(code: i32, message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    code
}

fn load_dataset(path: &Path, jsonl: bool) -> Result<Dataset, String> {
    let cols = ColumnSpec::default();
    let loaded = if jsonl {
        data::load_jsonl(path, &cols)
    } else {
        data::load_csv(path, &cols)
    };
    loaded.map_err(|e| format!("{}: {e}", path.display()))
}

struct TrainSetup {
    data_path: PathBuf,
    format: DataFormat,
    train: TrainConfig,
    featurizer: FeaturizerConfig,
}

fn resolve_train_setup(args: &TrainArgs) -> Result<TrainSetup, String> {
    if let Some(manifest_path) = &args.from_manifest {
        let manifest = RunManifest::load(manifest_path).map_err(|e| e.to_string())?;
        return Ok(TrainSetup {
            data_path: PathBuf::from(&manifest.data_path),
            format: manifest.data_format,
            train: manifest.train,
            featurizer: manifest.featurizer,
        });
    }
    let data_path = args.data.clone().expect("clap enforces --data");
    let train = TrainConfig {
        epochs: args.epochs,
        lr: args.lr,
        seed: args.seed,
        batch_size: args.batch_size,
        loss: args.loss,
        shuffle: !args.no_shuffle,
    };
    let featurizer = FeaturizerConfig {
        dim: args.dim,
        ngram_min: args.ngram_min,
        ngram_max: args.ngram_max,
        lowercase: !args.no_lowercase,
        normalize: !args.no_normalize,
    };
    featurizer.validate().map_err(|e| e.to_string())?;
    Ok(TrainSetup {
        data_path,
        format: if args.jsonl { DataFormat::Jsonl } else { DataFormat::Csv },
        train,
        featurizer,
    })
}

fn write_eval_outputs(report: &EvalReport, out_dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    let metrics_path = out_dir.join(METRICS_FILE);
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&metrics_path, json + "\n").map_err(|e| format!("{}: {e}", metrics_path.display()))?;
    let confusion_path = out_dir.join(CONFUSION_FILE);
    std::fs::write(&confusion_path, report.confusion_csv())
        .map_err(|e| format!("{}: {e}", confusion_path.display()))
}

fn cmd_train(args: &TrainArgs) -> i32 {
    let setup = match resolve_train_setup(args) {
        Ok(setup) => setup,
        Err(message) => return fail(EXIT_INPUT, message),
    };
    let dataset = match load_dataset(&setup.data_path, setup.format == DataFormat::Jsonl) {
        Ok(ds) => ds,
        Err(message) => return fail(EXIT_INPUT, message),
    };
    log::info!(
        "training on {} examples with the {} loss",
        dataset.len(),
        setup.train.loss
    );

    let started = Instant::now();
    let result = match train(&dataset, &setup.featurizer, &setup.train) {
        Ok(result) => result,
        Err(e @ ModelError::NonFiniteLoss { .. }) => return fail(EXIT_NUMERIC, e),
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let wall_clock_secs = started.elapsed().as_secs_f64();

    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        return fail(EXIT_INPUT, format!("{}: {e}", args.out_dir.display()));
    }
    let checkpoint = Checkpoint {
        model: result.model,
        featurizer: setup.featurizer,
    };
    let checkpoint_path = args.out_dir.join(CHECKPOINT_FILE);
    if let Err(e) = checkpoint.save(&checkpoint_path) {
        return fail(EXIT_INPUT, e);
    }
    let trace_path = args.out_dir.join(TRACE_FILE);
    if let Err(message) = write_trace(&trace_path, &result.trace) {
        return fail(EXIT_INPUT, message);
    }
    let manifest = RunManifest {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix_ms: RunManifest::now_unix_ms(),
        wall_clock_secs,
        data_path: setup.data_path.display().to_string(),
        data_format: setup.format,
        train: setup.train,
        featurizer: setup.featurizer,
        out_dir: args.out_dir.display().to_string(),
        checkpoint_file: CHECKPOINT_FILE.to_string(),
        trace_file: TRACE_FILE.to_string(),
        final_loss: result.trace.last().copied().unwrap_or(f64::NAN),
    };
    if let Err(e) = manifest.save(args.out_dir.join(MANIFEST_FILE)) {
        return fail(EXIT_INPUT, e);
    }
    println!("final training loss: {}", manifest.final_loss);

    if let Some(val_path) = &args.val {
        let val = match load_dataset(val_path, args.jsonl) {
            Ok(ds) => ds,
            Err(message) => return fail(EXIT_INPUT, message),
        };
        match evaluate_checkpoint(&checkpoint, &val, args.threshold) {
            Ok(report) => {
                println!("validation f1: {}", report.f1);
                if let Err(message) = write_eval_outputs(&report, &args.out_dir) {
                    return fail(EXIT_INPUT, message);
                }
            }
            Err(message) => return fail(EXIT_INPUT, message),
        }
    }
    EXIT_OK
}

fn write_trace(path: &Path, trace: &[f64]) -> Result<(), String> {
    let mut out = String::from("epoch,loss\n");
    for (epoch, loss) in trace.iter().enumerate() {
        out.push_str(&format!("{},{}\n", epoch + 1, fmt_f64(*loss)));
    }
    std::fs::write(path, out).map_err(|e| format!("{}: {e}", path.display()))
}

fn evaluate_checkpoint(checkpoint: &Checkpoint, dataset: &Dataset, threshold: f64) -> Result<EvalReport, String> {
    let predictions =
        predict(&checkpoint.model, dataset, &checkpoint.featurizer, threshold).map_err(|e| e.to_string())?;
    let gold: Vec<u8> = dataset.iter().map(|e| e.label).collect();
    evaluate(&predictions, &gold).map_err(|e| e.to_string())
}

fn cmd_eval(args: &EvalArgs) -> i32 {
    let checkpoint = match Checkpoint::load(&args.checkpoint) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let cfg = checkpoint.featurizer;
    let mismatch = [
        ("dim", args.dim, cfg.dim),
        ("ngram-min", args.ngram_min, cfg.ngram_min),
        ("ngram-max", args.ngram_max, cfg.ngram_max),
    ]
    .into_iter()
    .find(|(_, requested, actual)| requested.is_some_and(|r| r != *actual));
    if let Some((name, requested, actual)) = mismatch {
        return fail(
            EXIT_INPUT,
            format!(
                "featurizer mismatch: checkpoint has {name} {actual}, requested {}",
                requested.unwrap()
            ),
        );
    }
    let dataset = match load_dataset(&args.val, args.jsonl) {
        Ok(ds) => ds,
        Err(message) => return fail(EXIT_INPUT, message),
    };
    let report = match evaluate_checkpoint(&checkpoint, &dataset, args.threshold) {
        Ok(report) => report,
        Err(message) => return fail(EXIT_INPUT, message),
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if let Some(out_dir) = &args.out_dir {
        if let Err(message) = write_eval_outputs(&report, out_dir) {
            return fail(EXIT_INPUT, message);
        }
    }
    EXIT_OK
}

fn cmd_gradcheck(args: &GradcheckArgs) -> i32 {
    let cfg = GradCheckConfig {
        trials: args.trials,
        seed: args.seed,
        ..GradCheckConfig::default()
    };
    let reports = check_all(&cfg);
    for report in &reports {
        println!("{report}");
    }
    let mut failed = false;
    for report in reports.iter().filter(|r| !r.passed()) {
        failed = true;
        if let Some(worst) = &report.worst {
            eprintln!(
                "gradcheck failed for {}: trial {}, entry {}: analytic {} vs numeric {} (relative error {:.3e})",
                report.kind, worst.trial, worst.index, worst.analytic, worst.numeric, worst.rel_error
            );
        }
    }
    if failed {
        EXIT_GRADCHECK
    } else {
        EXIT_OK
    }
}

fn cmd_profile(args: &ProfileArgs) -> i32 {
    let points = match loss_profile(args.loss, args.label, args.votes, &args.r_values, args.grid) {
        Ok(points) => points,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let written = match &args.out {
        Some(path) => std::fs::File::create(path)
            .map_err(|e| format!("{}: {e}", path.display()))
            .and_then(|file| {
                let mut writer = std::io::BufWriter::new(file);
                write_profile_csv(&points, &mut writer)
                    .and_then(|()| writer.flush())
                    .map_err(|e| format!("{}: {e}", path.display()))
            }),
        None => {
            let stdout = std::io::stdout();
            write_profile_csv(&points, stdout.lock()).map_err(|e| e.to_string())
        }
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(message) => fail(EXIT_INPUT, message),
    }
}

fn cmd_compare(args: &CompareArgs) -> i32 {
    let dataset = match load_dataset(&args.val, args.jsonl) {
        Ok(ds) => ds,
        Err(message) => return fail(EXIT_INPUT, message),
    };
    let mut reports = BTreeMap::new();
    for run_dir in &args.runs {
        let manifest = match RunManifest::load(run_dir.join(MANIFEST_FILE)) {
            Ok(m) => m,
            Err(e) => return fail(EXIT_INPUT, e),
        };
        let checkpoint = match Checkpoint::load(run_dir.join(&manifest.checkpoint_file)) {
            Ok(c) => c,
            Err(e) => return fail(EXIT_INPUT, e),
        };
        let report = match evaluate_checkpoint(&checkpoint, &dataset, args.threshold) {
            Ok(report) => report,
            Err(message) => return fail(EXIT_INPUT, message),
        };
        if reports.insert(manifest.train.loss, report).is_some() {
            return fail(
                EXIT_INPUT,
                format!("duplicate run for the {} loss", manifest.train.loss),
            );
        }
    }
    let rows = compare_runs(&reports);
    println!("{:<10} {:>10} {:>8} {:>16}", "loss", "f1", "tp", "tp_vs_vanilla");
    for row in &rows {
        let delta = row
            .tp_delta_vs_vanilla
            .map_or_else(|| "-".to_string(), |d| format!("{d:+}"));
        println!("{:<10} {:>10.4} {:>8} {:>16}", row.kind, row.f1, row.true_pos, delta);
    }
    if let Some(path) = &args.out {
        let mut out = String::from("loss,f1,tp,tp_delta_vs_vanilla\n");
        for row in &rows {
            let delta = row.tp_delta_vs_vanilla.map_or_else(String::new, |d| d.to_string());
            out.push_str(&format!("{},{},{},{delta}\n", row.kind, fmt_f64(row.f1), row.true_pos));
        }
        if let Err(e) = std::fs::write(path, out) {
            return fail(EXIT_INPUT, format!("{}: {e}", path.display()));
        }
    }
    EXIT_OK
}
