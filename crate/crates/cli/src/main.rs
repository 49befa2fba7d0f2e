mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Synthetic-occlusion dataset toolchain.
///
/// Exit status: 0 on success, 1 on systemic failure, 2 on configuration or
/// usage errors. Log verbosity comes from OCCKIT_LOG (e.g. `debug`,
/// `occkit_core=trace`).
#[derive(Parser)]
#[command(name = "occkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Screen one candidate clip (frames/, masks/, optional depth/) and print a verdict.
    Check(CheckArgs),
    /// Overlay occluders on candidate clips and write occluded/ground-truth pairs.
    Synth(SynthArgs),
    /// Turn a still image plus object mask into a short clip.
    Img2vid(Img2vidArgs),
    /// Complete a long clip window by window with an external completer.
    Stitch(StitchArgs),
    /// Score predicted object clips against ground truth.
    Eval(EvalArgs),
    /// Run the full batch pipeline from a TOML config.
    Pipeline(PipelineArgs),
    /// Summarize a dataset manifest.
    Stats(StatsArgs),
    /// Split a dataset manifest into per-shard manifests.
    Shard(ShardArgs),
    /// Serve the review API (and optionally the review UI).
    Serve(ServeArgs),
    /// Write procedurally generated clips, occluder banks and a pipeline config.
    Demo(DemoArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Candidate directory.
    #[arg(long)]
    candidate: PathBuf,
    /// TOML with thresholds (top-level keys or a [check] table).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    boundary_margin: Option<u32>,
    #[arg(long)]
    min_area_fraction: Option<f64>,
    #[arg(long)]
    max_hole_count: Option<u32>,
    #[arg(long)]
    max_hole_area_fraction: Option<f64>,
    #[arg(long)]
    depth_band: Option<u32>,
    #[arg(long)]
    depth_threshold: Option<f64>,
    /// Write the verdict JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Easy,
    Hard,
}

#[derive(Clone, Copy, ValueEnum)]
enum BankArg {
    Generic,
    Driving,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    occluder_bank: PathBuf,
    #[arg(long, value_enum, default_value_t = BankArg::Generic)]
    bank_kind: BankArg,
    /// A candidate directory, or a directory of candidate directories.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the strategy's feather radius.
    #[arg(long)]
    feather: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Zoom,
    Move,
    Warp,
}

#[derive(Args)]
struct Img2vidArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 14)]
    frames: usize,
    #[arg(long)]
    image: PathBuf,
    /// Object mask (foreground for `move`).
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Final crop side fraction for `zoom`.
    #[arg(long)]
    zoom_end: Option<f64>,
    /// Final foreground displacement for `move`, as `dx,dy`.
    #[arg(long, value_parser = parse_pair)]
    displacement: Option<(f64, f64)>,
    /// Final homography for `warp`, 9 comma-separated row-major values.
    #[arg(long, value_parser = parse_mat3)]
    homography: Option<[[f64; 3]; 3]>,
    /// Draw unspecified parameters from moderate ranges.
    #[arg(long)]
    randomize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StitchArgs {
    /// Clip directory with frames/ and masks/.
    #[arg(long)]
    clip: PathBuf,
    #[arg(long, default_value_t = 14)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    m: usize,
    /// `cmd://<executable>`
    #[arg(long)]
    completer: String,
    #[arg(long, default_value_t = 250)]
    mask_threshold: u8,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted object-on-white frames (or one subdirectory per clip).
    #[arg(long)]
    pred: PathBuf,
    /// Pipeline clip output with gt/ and gt_masks/ (or a directory of them).
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 7)]
    dilation: u32,
    /// Resize to 256x256 before scoring.
    #[arg(long)]
    resize_256: bool,
    #[arg(long, default_value_t = 250)]
    mask_threshold: u8,
    /// Write reports as JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append one CSV summary row per clip here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    root_seed: Option<u64>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    shard_size: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Args)]
struct ShardArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    shard_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Decision log (created if missing).
    #[arg(long)]
    log: PathBuf,
    /// Review UI bundle to serve at `/`.
    #[arg(long)]
    ui: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    snapshot_every: u64,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    clips: usize,
    #[arg(long, default_value_t = 14)]
    frames: usize,
    #[arg(long, default_value_t = 384)]
    size: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_mat3(s: &str) -> Result<[[f64; 3]; 3], String> {
    let v = parse_floats(s, 9)?;
    Ok([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<occkit_core::Error>() {
            if e.is_config() {
                return 2;
            }
        }
        if let Some(occkit_review::ReviewError::Core(e)) = cause.downcast_ref::<occkit_review::ReviewError>() {
            if e.is_config() {
                return 2;
            }
        }
        if cause.downcast_ref::<commands::UsageError>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OCCKIT_LOG", "info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(a) => commands::check(a),
        Command::Synth(a) => commands::synth(a),
        Command::Img2vid(a) => commands::img2vid(a),
        Command::Stitch(a) => commands::stitch(a),
        Command::Eval(a) => commands::eval(a),
        Command::Pipeline(a) => commands::pipeline(a),
        Command::Stats(a) => commands::stats(a),
        Command::Shard(a) => commands::shard(a),
        Command::Serve(a) => commands::serve(a),
        Command::Demo(a) => commands::demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
