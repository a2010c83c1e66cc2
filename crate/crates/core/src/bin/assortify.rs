use std::path::PathBuf;
use std::process::ExitCode;

use assortify::config::LoadedConfig;
use assortify::pipeline::{self, Command, Context};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    BuildDocs,
    Train,
    Infer,
    FitMetric,
    Seeds,
    Assort,
    Eval,
    Synth,
    Oracle,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::BuildDocs => Command::BuildDocs,
            Cmd::Train => Command::Train,
            Cmd::Infer => Command::Infer,
            Cmd::FitMetric => Command::FitMetric,
            Cmd::Seeds => Command::Seeds,
            Cmd::Assort => Command::Assort,
            Cmd::Eval => Command::Eval,
            Cmd::Synth => Command::Synth,
            Cmd::Oracle => Command::Oracle,
        }
    }
}

/// Assortment recommendation pipeline.
#[derive(Debug, Parser)]
#[command(name = "assortify", version)]
struct Args {
    /// Pipeline stage to run.
    #[arg(value_enum)]
    command: Cmd,
    /// JSON config; relative paths inside it resolve against its directory.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set topicmodel.num_topics=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for setting every rng seed (topic model, synthetic catalog
    /// and feedback).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        for key in ["topicmodel.seed", "synth.catalog.seed", "synth.feedback.seed"] {
            overrides.push(format!("{key}={seed}"));
        }
    }
    let command = Command::from(args.command);
    let result = LoadedConfig::load(args.config.as_deref(), &overrides)
        .and_then(|loaded| pipeline::run(command, &Context::new(loaded)));
    match result {
        Ok(out) => {
            for p in out.written {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("assortify {}: error: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
