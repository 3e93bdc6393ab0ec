//! `seqctc`: generate synthetic data, train, evaluate and decode.
//!
//! Exit status is 0 on success, 1 when training or the numerics fail, and 2
//! for bad usage, bad input files or incompatible checkpoints.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "seqctc", version, about = "Digit-string recognition with CTC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecoderArg {
    Greedy,
    Beam,
}

#[derive(clap::Args, Debug, Default)]
pub struct DecodeFlags {
    /// Decoder to use; overrides the config's [decode] section.
    #[arg(long, value_enum)]
    pub decoder: Option<DecoderArg>,
    /// Beam width; implies --decoder beam when no decoder is given.
    #[arg(long)]
    pub beam_width: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render the train and test sets described by the [gen] section.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Train, writing a checkpoint and a log line per epoch.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Resume from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Recognition rate of a checkpoint on a manifest.
    Eval {
        /// Config to check the checkpoint against and to take defaults from.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the config's test manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Where to write the key=value report; defaults to
        /// `<checkpoint>.report.txt`.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        decode: DecodeFlags,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Decode one image and print `<label>\t<score>`.
    Decode {
        #[arg(long)]
        checkpoint: PathBuf,
        image: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the T×11 posterior matrix to this file.
        #[arg(long)]
        emit_posteriors: Option<PathBuf>,
        #[command(flatten)]
        decode: DecodeFlags,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SEQCTC_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { config, threads } => commands::gen(&config, threads),
        Command::Train {
            config,
            checkpoint,
            threads,
        } => commands::train(&config, checkpoint.as_deref(), threads),
        Command::Eval {
            config,
            checkpoint,
            manifest,
            report,
            decode,
            threads,
        } => commands::eval(
            config.as_deref(),
            &checkpoint,
            manifest.as_deref(),
            report.as_deref(),
            &decode,
            threads,
        ),
        Command::Decode {
            checkpoint,
            image,
            config,
            emit_posteriors,
            decode,
        } => commands::decode(&checkpoint, &image, config.as_deref(), emit_posteriors.as_deref(), &decode),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("seqctc: {e}");
            ExitCode::from(if e.is_internal() { 1 } else { 2 })
        }
    }
}
