//! Command-line front end. Every stage reads and writes the library's file
//! formats and leaves a `key = value` manifest next to its output.
//!
//! Exit status is 0 on success, 1 for bad input or usage, 2 for internal
//! failures.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use manifest::Manifest;

#[derive(Parser, Debug)]
#[command(name = "vgmt", version, about = "Video-guided subtitle translation: corpus pipeline, training and evaluation")]
pub struct Cli {
    /// Seed for every random choice; the same seed gives the same bytes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Corpus construction stages.
    #[command(subcommand)]
    Pipeline(Pipeline),
    /// Write the synthetic disambiguation task (corpus splits and features).
    Synth(SynthArgs),
    /// Train a model and write a checkpoint with its sidecar files.
    Train(TrainArgs),
    /// Translate a corpus with a trained checkpoint.
    Decode(DecodeArgs),
    /// Corpus BLEU of a hypothesis file against a reference file.
    Bleu(BleuArgs),
    /// Train and score the ablation variants from one initialization.
    Ablate(AblateArgs),
    /// Export per-token frame attention for a corpus.
    AttnDump(AttnDumpArgs),
    /// Compare analytic and numeric gradients of the full loss.
    GradCheck(GradCheckArgs),
}

#[derive(Subcommand, Debug)]
pub enum Pipeline {
    /// Compute the 10 s clip window of each record.
    Windows(WindowsArgs),
    /// Group records by normalized source text.
    Transets(InOut),
    /// Pick two clearly different targets per translation set.
    Ambiguous(AmbiguousArgs),
    /// Aggregate crowd votes into helpful / not-helpful decisions.
    Votes(InOut),
    /// Print Krippendorff's alpha of a vote file.
    Alpha(InOnly),
    /// Split records into train / validation / test.
    Splits(SplitsArgs),
    /// Build a vocabulary for one side of the corpus.
    Vocab(VocabArgs),
    /// Flag records whose source has more than one distinct target.
    Flags(InOut),
    /// Replace sources with their two-before / two-after context.
    Context(InOut),
}

#[derive(Args, Debug)]
pub struct InOut {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InOnly {
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct WindowsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// CSV with header `video_id,duration_ms`.
    #[arg(long)]
    pub durations: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Drop records whose video is shorter than 10 s instead of failing.
    #[arg(long)]
    pub skip_unusable: bool,
}

#[derive(Args, Debug)]
pub struct AmbiguousArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// `SIM v1 n` matrix; its diagonal holds source/target similarity.
    #[arg(long, requires = "target_sim")]
    pub cross_sim: Option<PathBuf>,
    /// `SIM v1 n` matrix of target/target similarity.
    #[arg(long, requires = "cross_sim")]
    pub target_sim: Option<PathBuf>,
    /// Built-in scorer used when no matrices are given.
    #[arg(long, default_value = "baseline", value_parser = ["baseline"])]
    pub scorer: String,
    #[arg(long, default_value_t = 0.3)]
    pub target_threshold: f64,
    /// Comma-separated, strictly descending.
    #[arg(long, default_value = "0.8,0.7,0.6,0.5,0.4,0.3", value_delimiter = ',')]
    pub schedule: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SplitsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Decision CSV from `pipeline votes`.
    #[arg(long)]
    pub decisions: PathBuf,
    /// Receives train.jsonl, valid.jsonl and test.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Maximum size of the evaluation pool.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VocabArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = ["source", "target"])]
    pub side: String,
    #[arg(long, default_value_t = 3)]
    pub min_count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2400)]
    pub n: usize,
    #[arg(long, default_value_t = 12)]
    pub frames: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value = "central", value_parser = ["central", "edge"])]
    pub placement: String,
    /// Train, validation and test sizes.
    #[arg(long, default_value = "2000,200,200", value_delimiter = ',')]
    pub splits: Vec<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Model and training configuration shared by `train` and `ablate`.
#[derive(Args, Debug)]
pub struct ModelOpts {
    /// `key = value` file with model and training keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key; may repeat. Wins over the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Vocabulary frequency threshold.
    #[arg(long, default_value_t = 3)]
    pub min_count: usize,
    /// JSONL `{id, ambiguous}` lines; computed from translation sets when absent.
    #[arg(long)]
    pub flags: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: PathBuf,
    /// Directory of `<record id>.evaf` files.
    #[arg(long)]
    pub features: PathBuf,
    /// Checkpoint path; sidecars get this path plus a suffix.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelOpts,
}

#[derive(Args, Debug)]
pub struct DecodeOpts {
    #[arg(long, default_value_t = 5)]
    pub beam: usize,
    #[arg(long, default_value_t = 64)]
    pub max_length: usize,
    #[arg(long, default_value_t = 1.0)]
    pub length_penalty: f64,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// One hypothesis per line.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub decode: DecodeOpts,
}

#[derive(Args, Debug)]
pub struct BleuArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Results CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated variant names; all five by default.
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
    #[command(flatten)]
    pub model: ModelOpts,
    #[command(flatten)]
    pub decode: DecodeOpts,
}

#[derive(Args, Debug)]
pub struct AttnDumpArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradCheckArgs {
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 8)]
    pub d_model: usize,
    #[arg(long, default_value_t = 4)]
    pub frames: usize,
}

/// Parse `args` (program name first) and run the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // Fails only if the pool already exists, e.g. a second call in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let line = std::iter::once("vgmt".to_string())
        .chain(args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()))
        .collect::<Vec<_>>()
        .join(" ");
    match commands::dispatch(&cli, &line) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                1
            } else {
                2
            }
        }
    }
}
