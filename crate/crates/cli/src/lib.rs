//! `spotmask` command-line front end.
//!
//! Every command prints one JSON object to stdout. On success it carries
//! `"status": "ok"` and a `timings` object in seconds; on a runtime failure it
//! carries `"status": "error"` and an `error` object with `kind` and `message`.
//! Exit status is 0 on success, 1 on a runtime error and 2 on a usage error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

mod commands;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "spotmask",
    version,
    about = "Mask single-crystal spots in powder diffraction images"
)]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores)
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark suite with ground-truth masks
    Synth(SynthArgs),
    /// Mask spots with the thin-shell statistical baseline
    Asm(AsmArgs),
    /// Train a gradient-boosted tree model on dataset images
    Train(TrainArgs),
    /// Mask spots in one image with a trained model
    Predict(PredictArgs),
    /// Compare a predicted mask with a truth mask
    Eval(EvalArgs),
    /// Score a model on every image of a dataset, with per-image timings
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Benchmark profile: nickel-like or battery-like-1..4
    #[arg(long)]
    pub profile: String,
    #[arg(long)]
    pub seed: u64,
    /// Output directory (created if missing)
    #[arg(long)]
    pub out: PathBuf,
    /// Frame edge length in pixels
    #[arg(long, default_value_t = spotmask_core::synth::DEFAULT_SUITE_SIZE)]
    pub size: usize,
}

#[derive(Debug, Args)]
pub struct AsmArgs {
    /// Clip multiplier, between 1 and 10
    #[arg(long, value_parser = parse_epsilon)]
    pub eps: f64,
    /// Radial shell thickness in mm (default: one pixel pitch)
    #[arg(long)]
    pub shell_width: Option<f64>,
    /// Upper 2θ bound in degrees (default: largest full circle on the detector)
    #[arg(long)]
    pub max_two_theta: Option<f64>,
    /// Input image (.xig) with a geometry sidecar
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output mask (.xmk)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory containing manifest.json
    #[arg(long)]
    pub dataset: PathBuf,
    /// Number of images drawn at random for training
    #[arg(long)]
    pub train_images: usize,
    /// Seeds the image draw and the quantile sample
    #[arg(long)]
    pub seed: u64,
    /// Add row and column indices as features
    #[arg(long)]
    pub pixel_loc: bool,
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    #[arg(long, default_value_t = 35)]
    pub rounds: usize,
    #[arg(long, default_value_t = 10_000)]
    pub max_bin: usize,
    #[arg(long, default_value_t = 0.3)]
    pub learning_rate: f64,
    /// Output model JSON
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Input image (.xig) with a geometry sidecar
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output mask (.xmk)
    #[arg(long)]
    pub out: PathBuf,
    /// Probability above which a pixel is masked
    #[arg(long, default_value_t = spotmask_core::pipeline::DEFAULT_THRESHOLD, value_parser = parse_probability)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Probability above which a pixel is masked
    #[arg(long, default_value_t = spotmask_core::pipeline::DEFAULT_THRESHOLD, value_parser = parse_probability)]
    pub threshold: f64,
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    let (lo, hi) = spotmask_core::asm::EPSILON_RANGE;
    if (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [{lo}, {hi}]"))
    }
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err("must lie in [0, 1]".into())
    }
}

/// Result of one invocation: exit status plus the text destined for each stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    /// Parsed stdout JSON.
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or(Value::Null)
    }
}

/// Parses `argv` (program name first) and runs the command without touching
/// the process streams.
pub fn execute<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Outcome {
                    code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                },
                _ => Outcome {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: text,
                },
            };
        }
    };
    let name = cli.command.name();
    match run(&cli) {
        Ok(mut body) => {
            body["command"] = json!(name);
            body["status"] = json!("ok");
            Outcome {
                code: EXIT_OK,
                stdout: pretty(&body),
                stderr: String::new(),
            }
        }
        Err(e) => {
            let kind = e
                .downcast_ref::<spotmask_core::Error>()
                .map_or("Runtime", |ce| ce.kind());
            let message = format!("{e:#}");
            let body = json!({
                "command": name,
                "status": "error",
                "error": { "kind": kind, "message": message },
            });
            Outcome {
                code: EXIT_RUNTIME,
                stdout: pretty(&body),
                stderr: format!("error: {message}\n"),
            }
        }
    }
}

/// Runs `argv` and writes its output to the process streams; returns the exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let out = execute(argv);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    out.code
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

fn run(cli: &Cli) -> anyhow::Result<Value> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n.into());
    }
    let pool = builder.build()?;
    let threads = pool.current_num_threads();
    let mut body = pool.install(|| match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Asm(a) => commands::asm(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
    })?;
    body["threads"] = json!(threads);
    Ok(body)
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Asm(_) => "asm",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Eval(_) => "eval",
            Command::Bench(_) => "bench",
        }
    }
}
