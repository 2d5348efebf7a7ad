//! Command-line interface: data generation, training, evaluation, gradient
//! checking, and the method comparison, each reproducible from its manifest.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! abort (non-finite loss or a failed gradient check).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::jsonl::{load_jsonl, save_jsonl};
use crate::data::split::split_dataset;
use crate::data::synth::{dataset_stats, generate_synthetic, SynthConfig};
use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::model::check::network_reports;
use crate::nn::gradcheck::DEFAULT_TOLERANCE;
use crate::train::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::train::{
    compare_methods, evaluate, fit, format_comparison, EmbeddedSplit, Method, TrainConfig,
};

#[derive(Parser)]
#[command(name = "lacgan", version, about = "Latent-space GAN classifier")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset as JSONL.
    GenData(GenDataArgs),
    /// Train one method and write checkpoint, metrics, and manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint's best model on one split.
    Eval(EvalArgs),
    /// Verify backprop against finite differences for all three networks.
    Gradcheck(GradcheckArgs),
    /// Train every method over several seeds and report test accuracies.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Output JSONL path.
    #[arg(long)]
    out: PathBuf,
    /// Number of samples.
    #[arg(long, default_value_t = 896)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated class proportions over (N, M0, M1, M2).
    #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
    props: String,
}

#[derive(Args)]
struct TrainArgs {
    /// Input dataset (JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoint, metrics, and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Optional flat key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// lacgan | acgan | extractor_only
    #[arg(long)]
    method: Option<Method>,
    /// Batch-normalize layer inputs (pre-activation placement).
    #[arg(long)]
    pa: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    embed_seed: Option<u64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    batch_e: Option<usize>,
    #[arg(long)]
    batch_gd: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// train | validation | test
    #[arg(long, default_value = "test")]
    split: String,
    /// Optional JSON report path (the report is always printed to stdout).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coordinates sampled per parameter tensor.
    #[arg(long, default_value_t = 5)]
    samples: usize,
    /// Number of seeds checked, starting at --seed.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated model seeds.
    #[arg(long, default_value = "0,1,2")]
    seeds: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    embed_seed: Option<u64>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Optional JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything needed to reproduce a run: the fully resolved configuration,
/// input digests, and where the artifacts were written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: TrainConfig,
    /// Input path -> SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Artifact name -> path.
    pub artifacts: BTreeMap<String, String>,
}

/// Exit code for an error per the contract in the module docs.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Validation(_) => 2,
        Error::Data { .. } | Error::Io(_) | Error::Checkpoint(_) => 3,
        Error::NonFinite { .. } => 4,
        Error::Dimension { .. } | Error::State(_) => 2,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => cmd_gen_data(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Gradcheck(args) => cmd_gradcheck(&args),
        Command::Compare(args) => cmd_compare(&args),
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn parse_props(s: &str) -> Result<[f64; NUM_CLASSES]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad proportion {p:?}")))
        })
        .collect::<Result<_>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| Error::Config(format!("need {NUM_CLASSES} proportions, got {}", v.len())))
}

fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad seed {p:?}")))
        })
        .collect()
}

/// Apply a flat key=value file to `config`. Blank lines and `#` comments are
/// ignored; unknown keys are configuration errors.
pub fn apply_config_file(config: &mut TrainConfig, text: &str) -> Result<()> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::Config(format!("line {}: bad {what} {value:?}", lineno + 1));
        match key {
            "epochs" => config.epochs = value.parse().map_err(|_| bad("integer"))?,
            "batch_e" => config.batch_e = value.parse().map_err(|_| bad("integer"))?,
            "batch_gd" => config.batch_gd = value.parse().map_err(|_| bad("integer"))?,
            "lr" => config.lr = value.parse().map_err(|_| bad("number"))?,
            "beta1" => config.beta1 = value.parse().map_err(|_| bad("number"))?,
            "beta2" => config.beta2 = value.parse().map_err(|_| bad("number"))?,
            "lambda" => config.lambda = value.parse().map_err(|_| bad("number"))?,
            "seed" => config.seed = value.parse().map_err(|_| bad("integer"))?,
            "embed_seed" => config.embed_seed = value.parse().map_err(|_| bad("integer"))?,
            "split_seed" => config.split_seed = value.parse().map_err(|_| bad("integer"))?,
            "method" => config.method = value.parse()?,
            "pa" => config.pa = value.parse().map_err(|_| bad("boolean"))?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
    }
    Ok(())
}

fn resolve_train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    if let Some(path) = &args.config {
        apply_config_file(&mut config, &fs::read_to_string(path)?)?;
    }
    if let Some(v) = args.method {
        config.method = v;
    }
    if let Some(v) = args.pa {
        config.pa = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.embed_seed {
        config.embed_seed = v;
    }
    if let Some(v) = args.split_seed {
        config.split_seed = v;
    }
    if let Some(v) = args.lr {
        config.lr = v;
    }
    if let Some(v) = args.lambda {
        config.lambda = v;
    }
    if let Some(v) = args.batch_e {
        config.batch_e = v;
    }
    if let Some(v) = args.batch_gd {
        config.batch_gd = v;
    }
    config.validate()?;
    Ok(config)
}

fn load_split(data: &Path, config: &TrainConfig) -> Result<EmbeddedSplit> {
    let raw = load_jsonl(data)?;
    let split = split_dataset(&raw, config.split_seed)?;
    EmbeddedSplit::from_raw(&split, config.embed_seed)
}

fn cmd_gen_data(args: &GenDataArgs) -> Result<()> {
    let config = SynthConfig {
        n: args.n,
        class_props: parse_props(&args.props)?,
        seed: args.seed,
    };
    let samples = generate_synthetic(&config)?;
    save_jsonl(&samples, &args.out)?;
    let (size, unique_words, avg_words) = dataset_stats(&samples);
    println!("data set size (all categories): {size}");
    println!("number of unique words: {unique_words}");
    println!("average number of words per situation: {avg_words:.2}");
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let config = resolve_train_config(args)?;
    let split = load_split(&args.data, &config)?;
    fs::create_dir_all(&args.out)?;

    let (state, metrics) = fit(&config, &split)?;

    let ckpt_path = args.out.join("model.ckpt");
    save_checkpoint(&Checkpoint::from_state(&config, &state), &ckpt_path)?;

    let metrics_path = args.out.join("metrics.jsonl");
    let mut out = fs::File::create(&metrics_path)?;
    for epoch in &metrics.epochs {
        serde_json::to_writer(&mut out, epoch)
            .map_err(|e| Error::State(format!("serialize metrics: {e}")))?;
        writeln!(out)?;
    }
    let summary = serde_json::json!({
        "summary": true,
        "best_epoch": metrics.best_epoch,
        "best_val_acc": metrics.best_val_acc,
        "test_acc": metrics.test_acc,
    });
    writeln!(out, "{summary}")?;

    let manifest_path = args.out.join("manifest.json");
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "train".to_string(),
        config: config.clone(),
        inputs: BTreeMap::from([(args.data.display().to_string(), sha256_file(&args.data)?)]),
        artifacts: BTreeMap::from([
            ("checkpoint".to_string(), ckpt_path.display().to_string()),
            ("metrics".to_string(), metrics_path.display().to_string()),
            ("manifest".to_string(), manifest_path.display().to_string()),
        ]),
    };
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::State(format!("serialize manifest: {e}")))?,
    )?;

    println!(
        "method {} trained {} epochs; best epoch {} (val acc {:.4}); test acc {:.4}",
        config.method.as_str(),
        config.epochs,
        metrics.best_epoch,
        metrics.best_val_acc,
        metrics.test_acc
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let split = load_split(&args.data, &ckpt.config)?;
    let samples = match args.split.as_str() {
        "train" => &split.train,
        "validation" => &split.validation,
        "test" => &split.test,
        other => return Err(Error::Config(format!("unknown split {other:?}"))),
    };
    let accuracy = evaluate(&ckpt.best_model, samples)?;
    println!(
        "{} accuracy of best model (epoch {}): {accuracy:.4}",
        args.split, ckpt.best.epoch
    );
    let report = serde_json::json!({
        "split": args.split,
        "n": samples.len(),
        "accuracy": accuracy,
        "best_epoch": ckpt.best.epoch,
        "method": ckpt.config.method.as_str(),
    });
    println!("{report}");
    if let Some(path) = &args.report {
        fs::write(path, report.to_string())?;
    }
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<()> {
    // Hidden detector-sanity hook: a nonzero offset is added to the analytic
    // gradients, which must make the check fail.
    let perturb: f64 = match std::env::var("LACGAN_GRADCHECK_PERTURB") {
        Ok(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("bad LACGAN_GRADCHECK_PERTURB {v:?}")))?,
        Err(_) => 0.0,
    };
    let mut worst = 0.0f64;
    for offset in 0..args.seeds {
        let seed = args.seed + offset as u64;
        for pa in [true, false] {
            for nr in network_reports(pa, seed, args.samples, perturb)? {
                let tensor = nr.report.worst_tensor().expect("nonempty report");
                println!(
                    "seed {seed} pa {pa} net {}: max rel err {:.3e} ({} coords; worst layer {} {})",
                    nr.name, nr.report.max_rel_err, nr.report.checked, tensor.layer, tensor.tensor
                );
                worst = worst.max(nr.report.max_rel_err);
            }
        }
    }
    if worst < DEFAULT_TOLERANCE {
        println!("gradcheck PASS: max rel err {worst:.3e} < {DEFAULT_TOLERANCE:.0e}");
        Ok(())
    } else {
        println!("gradcheck FAIL: max rel err {worst:.3e} >= {DEFAULT_TOLERANCE:.0e}");
        Err(Error::NonFinite {
            term: "gradient check".into(),
        })
    }
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let seeds = parse_seed_list(&args.seeds)?;
    let mut base = TrainConfig::default();
    if let Some(v) = args.epochs {
        base.epochs = v;
    }
    if let Some(v) = args.embed_seed {
        base.embed_seed = v;
    }
    if let Some(v) = args.split_seed {
        base.split_seed = v;
    }
    base.validate()?;
    let split = load_split(&args.data, &base)?;
    let report = compare_methods(&base, &split, &seeds)?;
    print!("{}", format_comparison(&report));
    if let Some(path) = &args.out {
        fs::write(
            path,
            serde_json::to_string_pretty(&report)
                .map_err(|e| Error::State(format!("serialize report: {e}")))?,
        )?;
    }
    Ok(())
}
