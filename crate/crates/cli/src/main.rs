//! `evoforge`: batch experiments with simulated listeners, voice-file
//! utilities and the HTTP service.
//!
//! Failures exit nonzero and print one [`ApiError`] JSON object on stderr.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evoforge_core::session::DEFAULT_TEXT;
use evoforge_core::synth::DEFAULT_SAMPLE_RATE;
use evoforge_service::{
    ApiError, ENV_BIND, ENV_CORS_ORIGIN, ENV_DEFAULT_TEXT, ENV_PCA_MODEL, ENV_PRERENDER, ENV_STORE,
};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "evoforge", version, about = "Preference-driven voice search tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run seeded trials against a noisy distance judge; JSON lines out.
    RunTrials(TrialArgs),
    /// Compare restarts against none on the deceptive two-cluster landscape.
    CompareRestarts(CompareArgs),
    /// Summarise a JSON-lines trial file.
    ExportReport(ReportArgs),
    /// Voice-file utilities.
    #[command(subcommand)]
    Voicefile(VoicefileCommand),
    /// PCA model utilities.
    #[command(subcommand)]
    Pca(PcaCommand),
    /// Run the HTTP service until Ctrl-C.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct EvolutionArgs {
    /// Probability of a random restart per offspring.
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    /// Mutation stddev as a multiple of each axis stddev.
    #[arg(long, default_value_t = 0.3)]
    sigma_scale: f64,
    /// Restart stddev as a multiple of each axis stddev.
    #[arg(long, default_value_t = 1.0)]
    restart_scale: f64,
    #[arg(long, default_value_t = 50)]
    generations: u64,
    /// Trial `i` uses seed `base_seed + i`.
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
}

#[derive(Debug, Args)]
struct TrialArgs {
    /// Number of trials.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// Judge flip probability in [0, 0.5].
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[command(flatten)]
    evolution: EvolutionArgs,
    /// Write JSON lines here instead of stdout; the summary then goes to stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Number of paired seeds.
    #[arg(long, default_value_t = 200)]
    pairs: u64,
    #[command(flatten)]
    evolution: EvolutionArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// JSON-lines file from `run-trials`; `-` reads stdin.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
}

#[derive(Debug, Subcommand)]
enum VoicefileCommand {
    /// Print decoded fields as JSON.
    Inspect {
        path: PathBuf,
        /// PCA model JSON to check the file against; defaults to the reference model.
        #[arg(long, env = ENV_PCA_MODEL)]
        pca_model: Option<PathBuf>,
    },
    /// Render the voice to a WAV file.
    Synth {
        path: PathBuf,
        #[arg(long, default_value = DEFAULT_TEXT)]
        text: String,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        sample_rate: u32,
        /// Output path; `-` writes to stdout. Defaults to the input with a `.wav` extension.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum PcaCommand {
    /// Write the reference PCA model as JSON.
    Export {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = ENV_BIND, default_value = evoforge_service::DEFAULT_BIND)]
    bind: std::net::SocketAddr,
    #[arg(long, env = ENV_PCA_MODEL)]
    pca_model: Option<PathBuf>,
    /// Session directory; sessions are kept in memory when absent.
    #[arg(long, env = ENV_STORE)]
    store: Option<PathBuf>,
    #[arg(long, env = ENV_DEFAULT_TEXT, default_value = DEFAULT_TEXT)]
    default_text: String,
    #[arg(long, env = ENV_CORS_ORIGIN)]
    cors_origin: Option<String>,
    /// Render the next pair in the background after each step.
    #[arg(long, env = ENV_PRERENDER, default_value_t = false, action = clap::ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    prerender: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::RunTrials(a) => commands::run_trials(&a),
        Command::CompareRestarts(a) => commands::compare_restarts(&a),
        Command::ExportReport(a) => commands::export_report(&a),
        Command::Voicefile(VoicefileCommand::Inspect { path, pca_model }) => {
            commands::inspect(&path, pca_model.as_deref())
        }
        Command::Voicefile(VoicefileCommand::Synth {
            path,
            text,
            sample_rate,
            out,
        }) => commands::synth(&path, &text, sample_rate, out),
        Command::Pca(PcaCommand::Export { out }) => commands::export_pca(out.as_deref()),
        Command::Serve(a) => commands::serve(a),
    }
}

fn fail(e: &ApiError) -> ExitCode {
    eprintln!("{}", serde_json::to_string(e).expect("ApiError serializes"));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&ApiError::validation(e.render().to_string().trim_end())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e.to_api()),
    }
}
