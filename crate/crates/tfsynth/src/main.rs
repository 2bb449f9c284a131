use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tfsynth::commands;
use tfsynth::config::Overrides;
use tfsynth::error::Result;

/// Synthesizes interpretable temporal-filter programs for frame-level
/// behavior classification.
#[derive(Parser)]
#[command(name = "tfsynth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Global seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Label column (annotator) to learn.
    #[arg(long)]
    label_column: Option<String>,
    /// morlet, disjunction:k, conv or tree:depth.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic videos generated from a planted program.
    GenSynthetic(Common),
    /// Search for a program.
    Synth(Common),
    /// Fit a conv or tree baseline.
    TrainBaseline(Common),
    /// Score a saved program or baseline on every split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// program.json or model.json.
        #[arg(long)]
        artifact: PathBuf,
    },
    /// Run the data-efficiency matrix.
    RunMatrix(Common),
    /// Export the filter curves of a program document.
    ExportFilter {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(c: &Common) -> Result<tfsynth::config::Resolved> {
    let o = Overrides {
        seed: c.seed,
        out: c.out.clone(),
        label_column: c.label_column.clone(),
        model: c.model.clone(),
    };
    commands::load_config(&c.config, &o)
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::GenSynthetic(c) => commands::gen_synthetic(&resolve(&c)?),
        Command::Synth(c) => commands::synth(&resolve(&c)?),
        Command::TrainBaseline(c) => commands::train_baseline(&resolve(&c)?),
        Command::Eval { common, artifact } => commands::eval(&resolve(&common)?, &artifact),
        Command::RunMatrix(c) => commands::run_matrix(&resolve(&c)?),
        Command::ExportFilter { program, out } => commands::export_filter(&program, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}
