//! Pipeline driver: generate -> filter -> export -> eval -> report.
//!
//! Exit codes: 0 success, 2 config error, 3 partial failure (some interview
//! slots or metrics failed; results for the rest were written), 4 hard
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use personaforge::dataset::SubsetName;
use personaforge::pipeline::{
    self, Metric, PipelineError, RunConfig, cmd_eval, cmd_export, cmd_filter, cmd_generate,
    cmd_report,
};

#[derive(Parser)]
#[command(
    name = "personaforge",
    about = "Interview role-playing agents with psychological scale questions, filter against \
             annotated personality ground truth, export fine-tuning datasets, and evaluate \
             role-play quality",
    version
)]
struct Cli {
    /// Path to the run config (JSON).
    #[arg(long, global = true, default_value = "personaforge.json")]
    config: PathBuf,

    /// Override the run seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory from the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Screen questions for character fit and run the interviews.
    Generate,
    /// Judge responses against ground truth and materialize the kept-set.
    Filter {
        /// Override the filter policy: per_dimension or strict.
        #[arg(long)]
        policy: Option<String>,
    },
    /// Build the requested subsets and write chat JSONL files.
    Export {
        /// Subset to export (repeatable): full_single, part_single, part_multi.
        #[arg(long = "subset")]
        subsets: Vec<String>,
    },
    /// Run evaluation metrics.
    Eval {
        /// Comma-separated metrics: pf,mr,rouge,winrate,dims,consistency.
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
    },
    /// Print the run summary and verify that the manifest reconciles.
    Report,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut config = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(out_dir) = cli.out_dir {
        config.out_dir = out_dir;
    }

    match run(&cli.command, &mut config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: &Command, config: &mut RunConfig) -> Result<ExitCode, PipelineError> {
    match command {
        Command::Generate => {
            let outcome = cmd_generate(config)?;
            println!(
                "planned {} | excluded {} | failed {} | emitted {}",
                outcome.generated, outcome.suitability_excluded, outcome.failed, outcome.emitted
            );
            for failure in outcome.failures.iter().take(10) {
                eprintln!("failure: {failure}");
            }
            if outcome.failed > 0 {
                eprintln!("{} slot(s) failed; manifest written", outcome.failed);
                return Ok(ExitCode::from(EXIT_PARTIAL));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Filter { policy } => {
            if let Some(p) = policy {
                config.filter_policy = match p.as_str() {
                    "per_dimension" => personaforge::FilterPolicy::PerDimension,
                    "strict" => personaforge::FilterPolicy::Strict,
                    other => {
                        eprintln!("error: unknown filter policy `{other}`");
                        return Ok(ExitCode::from(EXIT_CONFIG));
                    }
                };
            }
            let outcome = cmd_filter(config)?;
            println!(
                "assessed {} (character, scale) pair(s) | kept {} | discarded {}",
                outcome.assessed_pairs, outcome.kept, outcome.filtered_out
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Export { subsets } => {
            if !subsets.is_empty() {
                let mut parsed = Vec::new();
                for s in subsets {
                    match SubsetName::parse(s) {
                        Some(name) => parsed.push(name),
                        None => {
                            eprintln!("error: unknown subset `{s}`");
                            return Ok(ExitCode::from(EXIT_CONFIG));
                        }
                    }
                }
                config.subsets = parsed;
            }
            let outcome = cmd_export(config)?;
            for manifest in &outcome.manifests {
                println!(
                    "{}: {} samples, digest {}",
                    manifest.name.as_str(),
                    manifest.sample_count,
                    &manifest.content_digest[..12]
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { metrics } => {
            let mut parsed = Vec::new();
            for m in metrics {
                match Metric::parse(m) {
                    Some(metric) => parsed.push(metric),
                    None => {
                        eprintln!("error: unknown metric `{m}`");
                        return Ok(ExitCode::from(EXIT_CONFIG));
                    }
                }
            }
            let outcome = cmd_eval(config, &parsed)?;
            for metric in &outcome.succeeded {
                println!(
                    "{}: ok ({})",
                    metric.as_str(),
                    pipeline::report_path(&config.out_dir, *metric).display()
                );
            }
            for (metric, reason) in &outcome.failed {
                eprintln!("{}: failed: {reason}", metric.as_str());
            }
            if !outcome.failed.is_empty() {
                return Ok(ExitCode::from(EXIT_PARTIAL));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report => {
            let summary = cmd_report(config)?;
            print!("{summary}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
