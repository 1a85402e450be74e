use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hredlsh::eval::render_table;
use hredlsh_cli::commands::{self, EvalMode, Workspace};
use hredlsh_cli::config::PipelineConfig;

#[derive(Parser)]
#[command(name = "hredlsh", version, about = "HRED dialogue encoder with LSH Forest response retrieval")]
struct Cli {
    /// Directory holding the pipeline's intermediate files.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress (-v) or details (-vv) to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

macro_rules! overrides {
    ($($field:ident),* $(,)?) => {
        /// One `--key value` flag per configuration key, applied after the file.
        #[derive(Args, Default)]
        struct Overrides {
            $(
                #[arg(long, global = true, value_name = "VALUE", help_heading = "Config overrides")]
                $field: Option<String>,
            )*
        }

        impl Overrides {
            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $( if let Some(v) = &self.$field { out.push((stringify!($field), v.as_str())); } )*
                out
            }
        }
    };
}

overrides!(
    embed_dim,
    utterance_hidden,
    context_hidden,
    decoder_hidden,
    min_count,
    min_turns,
    lowercase,
    split_punctuation,
    anonymize,
    rules,
    embeddings,
    learning_rate,
    epochs,
    clip_norm,
    train_seed,
    trees,
    max_label_len,
    forest_seed,
    method,
    candidates,
    pool,
    ar_include_self,
    beams,
    max_len,
    eval_options,
    eval_ks,
    eval_seed,
    eval_speaker,
    exclude_same_dialogue,
);

#[derive(Subcommand)]
enum Command {
    /// Preprocess a raw corpus and build the vocabulary.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Train the HRED model on the ingested corpus.
    Train,
    /// Build the candidate store and LSH Forest from the trained model.
    Index,
    /// Rank stored responses for a context given in the corpus line format.
    Query {
        #[arg(long)]
        context: String,
        /// Responses to print.
        #[arg(long, default_value_t = 3)]
        top: usize,
    },
    /// Recall@k on a held-out corpus.
    Eval {
        #[arg(long)]
        heldout: PathBuf,
        /// Comma-separated modes among generative, cr, ar, car.
        #[arg(long, value_delimiter = ',', default_value = "generative,cr,ar,car")]
        mode: Vec<EvalMode>,
    },
    /// Print corpus statistics.
    Stats {
        /// Raw corpus to describe instead of the ingested one.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        cfg.apply_text(&text).with_context(|| format!("{}", path.display()))?;
    }
    for (key, value) in cli.overrides.pairs() {
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let ws = Workspace::new(&cli.workdir);
    let mut stdout = io::stdout().lock();
    match &cli.command {
        Command::Ingest { corpus } => commands::ingest(&ws, &cfg, corpus)?,
        Command::Train => {
            let losses = commands::train_model(&ws, &cfg)?;
            if let Some(last) = losses.last() {
                writeln!(stdout, "final mean loss {last:.6}")?;
            }
        }
        Command::Index => {
            let n = commands::index(&ws, &cfg)?;
            writeln!(stdout, "{n} records indexed")?;
        }
        Command::Query { context, top } => commands::query(&ws, &cfg, context, *top, &mut stdout)?,
        Command::Eval { heldout, mode } => {
            let reports = commands::eval(&ws, &cfg, heldout, mode)?;
            write!(stdout, "{}", render_table(&reports))?;
        }
        Command::Stats { corpus } => commands::stats(&ws, &cfg, corpus.as_deref(), &mut stdout)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let line = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("error: invalid arguments");
            eprintln!("{}", line.trim_end());
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(ToString::to_string).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::FAILURE
        }
    }
}
