use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use zsreg::experiment;
use zsreg::synth::{GenKind, GenSpec};

/// Zero-shot regression experiments with target side information.
#[derive(Parser)]
#[command(name = "zsreg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config-driven experiment and write score/rank/test reports.
    Run {
        /// Path to a TOML experiment config.
        config: PathBuf,
    },
    /// Generate a synthetic dataset as CSV files plus a ground-truth sidecar.
    Gen {
        /// Generator kind: S (similarity-based) or R (linear dependence).
        #[arg(long, value_parser = parse_kind)]
        kind: GenKind,
        /// Number of targets.
        #[arg(long)]
        targets: usize,
        /// Side-information size.
        #[arg(long)]
        side: usize,
        /// Number of instances.
        #[arg(long, default_value_t = 5000)]
        instances: usize,
        /// Number of instance features.
        #[arg(long, default_value_t = 50)]
        features: usize,
        /// Anchor count of the S generator.
        #[arg(long, default_value_t = 5)]
        anchors: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the two-target walkthrough dataset as CSV files.
    Toy {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate rank/test reports from an existing scores.csv.
    Report {
        scores: PathBuf,
        /// Output directory (defaults to the scores file's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kind(value: &str) -> Result<GenKind, String> {
    match value {
        "S" | "s" => Ok(GenKind::S),
        "R" | "r" => Ok(GenKind::R),
        other => Err(format!("unknown kind '{other}' (expected S or R)")),
    }
}

fn configure_thread_pool() {
    if let Ok(value) = std::env::var("ZSREG_THREADS") {
        match value.parse::<usize>() {
            Ok(threads) if threads > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
            _ => eprintln!("ZSREG_THREADS='{value}' ignored (expected a positive integer)"),
        }
    }
}

fn main() -> ExitCode {
    configure_thread_pool();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => match experiment::run(&config) {
            Ok(report) => {
                println!(
                    "completed {} cell(s), reused {}, {} failure(s); reports in {}",
                    report.completed,
                    report.skipped,
                    report.failures.len(),
                    report.output_dir.display()
                );
                for failure in &report.failures {
                    eprintln!("error: {failure}");
                }
                report.exit_code()
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::Gen {
            kind,
            targets,
            side,
            instances,
            features,
            anchors,
            seed,
            out,
        } => {
            let mut spec = GenSpec::new(kind, targets, side, seed)
                .with_instances(instances)
                .with_features(features);
            spec.anchors = anchors;
            match experiment::write_generated(&spec, &out) {
                Ok(()) => {
                    println!("wrote {} to {}", spec.name(), out.display());
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        Command::Toy { out } => match experiment::write_toy(&out) {
            Ok(()) => {
                println!("wrote toy dataset to {}", out.display());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::Report { scores, out } => {
            match experiment::report_from_scores(&scores, out.as_deref()) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
