//! `cskit`: code-switching check sets, augmentations, attention bleed and BLEU.
//!
//! Exit status: 0 on success, 2 on usage, I/O or validation errors, 1 otherwise.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cskit", version, about = "Code-switching robustness tooling for multilingual MT corpora")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment and token counts of a corpus or generated set.
    Stats(StatsArgs),
    /// Build an evaluation check set from a multi-parallel directory.
    Checks(ChecksArgs),
    /// Build a training augmentation set.
    Augment(AugmentArgs),
    /// Attention bleed of exported cross-attention tensors.
    Bleed(BleedArgs),
    /// Corpus BLEU of a hypothesis file against a reference file.
    Score(ScoreArgs),
    /// Re-run a generating command from its manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// TSV of `src<TAB>tgt[<TAB>lang]` rows.
    #[arg(long, conflicts_with_all = ["src", "dir"])]
    pub tsv: Option<PathBuf>,
    /// Source side of a paired-file corpus.
    #[arg(long, requires = "tgt", conflicts_with = "dir")]
    pub src: Option<PathBuf>,
    /// Target side of a paired-file corpus.
    #[arg(long, requires = "src")]
    pub tgt: Option<PathBuf>,
    /// Directory of line-aligned `<lang>.txt` files.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Source language for TSV rows without a language column and for paired files.
    #[arg(long, env = "CSKIT_LANG", default_value = "und")]
    pub lang: String,
    #[arg(long, env = "CSKIT_TARGET_LANG", default_value = "en")]
    pub target_lang: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatsFormat {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Generated segments (JSONL) instead of a corpus.
    #[arg(long, conflicts_with_all = ["tsv", "src", "dir"])]
    pub jsonl: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: StatsFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckArg {
    Ctl,
    Csl,
    Cxl,
    Rxl,
    Cksl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Fwd,
    Rev,
    Mixed,
}

#[derive(Debug, Args)]
pub struct ChecksArgs {
    #[arg(long, value_enum)]
    pub kind: CheckArg,
    /// Multi-parallel directory of `<lang>.txt` files.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, env = "CSKIT_SEED")]
    pub seed: u64,
    /// Segments to emit; defaults to the size of the original set (K x n).
    #[arg(long, conflicts_with = "all")]
    pub count: Option<usize>,
    /// Emit every candidate.
    #[arg(long)]
    pub all: bool,
    /// Longest run for `cksl`.
    #[arg(long, env = "CSKIT_MAX_JOIN", default_value_t = 4)]
    pub max_join: usize,
    #[arg(long, value_enum, default_value = "mixed")]
    pub ctl_direction: DirectionArg,
    /// Fixed ordered language pair for `cxl`, e.g. `bn,hi`.
    #[arg(long)]
    pub pair: Option<String>,
    /// Glue between joined sentences.
    #[arg(long, env = "CSKIT_JOIN", default_value = " ")]
    pub join: String,
    #[arg(long, env = "CSKIT_TARGET_LANG", default_value = "en")]
    pub target_lang: String,
    /// Declare that the corpus does not follow document order.
    #[arg(long)]
    pub shuffled: bool,
    /// Output prefix; writes `<out>.jsonl`, `<out>.src`, `<out>.tgt`, `<out>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AugmentArg {
    Catsl,
    Catxl,
    Catrepeat,
    Denoisetgt,
    Noisysrc,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long, value_enum)]
    pub kind: AugmentArg,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub budget: usize,
    #[arg(long, env = "CSKIT_SEED")]
    pub seed: u64,
    #[arg(long, env = "CSKIT_NOISE_R", default_value_t = cskit::augment::DEFAULT_NOISE_RATIO)]
    pub noise_r: f64,
    /// Replacement vocabulary, one type per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Concatenation kinds join 2..=max-join sentences.
    #[arg(long, env = "CSKIT_MAX_JOIN", default_value_t = 2)]
    pub max_join: usize,
    #[arg(long, env = "CSKIT_JOIN", default_value = " ")]
    pub join: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BleedArgs {
    /// JSONL or binary attention file.
    #[arg(long)]
    pub attn: PathBuf,
    /// Reject rows that do not sum to 1 within 1e-3.
    #[arg(long)]
    pub strict: bool,
    /// Report per-record and per-head values on the 0-100 scale.
    #[arg(long)]
    pub scale: bool,
    /// Allow records with differing layer/head counts.
    #[arg(long)]
    pub ragged: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmoothArg {
    None,
    AddK,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScoreFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long, value_enum, default_value = "none")]
    pub smooth: SmoothArg,
    #[arg(long, value_enum, default_value = "text")]
    pub format: ScoreFormat,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A `<prefix>.manifest.json` written by `checks` or `augment`.
    pub manifest: PathBuf,
    /// Write the reproduced outputs under this prefix instead of the original one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match commands::run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(clap_err) = err.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
                return ExitCode::from(clap_err.exit_code() as u8);
            }
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
