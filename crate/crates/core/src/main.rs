use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dumpscrub::engine::config::{EngineConfig, Overrides, RunMode};
use dumpscrub::engine::{run, ProcessingChoice, RunSummary};

#[derive(Parser)]
#[command(name = "dumpscrub", version, about = "Find and redact sensitive data in memory dumps and logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify and redact an input file, writing reports and stats.
    Analyze(Args),
    /// Fold reviewer-marked reports into the knowledge base.
    Feedback(Args),
    /// Ingest an external term list as a dictionary identifier.
    Augment(Args),
    /// Generate a synthetic dump and ground-truth manifest.
    Generate(Args),
    /// Run factor sweeps and write a timing CSV.
    Bench(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// concise, boolean or dynamic.
    #[arg(long)]
    mode: Option<ProcessingChoice>,
    /// Time budget in seconds.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest path for `generate`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Analyze(a) => (RunMode::Analyze, a),
        Command::Feedback(a) => (RunMode::Feedback, a),
        Command::Augment(a) => (RunMode::Augment, a),
        Command::Generate(a) => (RunMode::Generate, a),
        Command::Bench(a) => (RunMode::Bench, a),
    };
    let result = EngineConfig::load(&args.config).and_then(|mut cfg| {
        cfg.mode = mode;
        let cwd = std::env::current_dir().unwrap_or_default();
        cfg.apply(&Overrides {
            threads: args.threads,
            processing_mode: args.mode,
            time_budget: args.budget,
            seed: args.seed,
            output: args.out.map(|p| cwd.join(p)),
            manifest: args.manifest.map(|p| cwd.join(p)),
        });
        run(&cfg)
    });
    match result {
        Ok(summary) => {
            print_summary(&summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dumpscrub: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_summary(s: &RunSummary) {
    match s {
        RunSummary::Analyze { stats } => println!(
            "analyzed {} bytes in {:.3}s: {} sensitive findings, {} pages redacted whole",
            stats.input_bytes,
            stats.timings.total_s,
            stats.sensitive_findings(),
            stats.whole_unit_pages
        ),
        RunSummary::Feedback {
            suppressed,
            forced_sensitive,
        } => println!("feedback store: {suppressed} suppressed, {forced_sensitive} forced sensitive"),
        RunSummary::Augment { entity_type, terms } => println!("stored {terms} terms for {entity_type}"),
        RunSummary::Generate { pages, planted } => println!("generated {pages} pages with {planted} planted entities"),
        RunSummary::Bench { rows } => {
            for r in rows {
                println!("{},{},{},{:.6}", r.factor, r.value, r.mode, r.seconds);
            }
        }
    }
}
