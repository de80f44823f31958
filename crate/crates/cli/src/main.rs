use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geolex_cli::commands::{
    self, DecomposeArgs, ExportArgs, IngestArgs, MatrixArgs, ProjectArgs, SynthArgs, TopWordsArgs,
};
use geolex_cli::{CliError, Context, FileConfig};

/// Regional word usage from geotagged text: mesh binning, word-by-cell
/// matrices, and PCA / robust PCA.
#[derive(Debug, Parser)]
#[command(name = "geolex", version)]
struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base directory for relative paths.
    #[arg(long, global = true, env = "GEOLEX_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bin geotagged records into cells and count words.
    Ingest(IngestArgs),
    /// Filter a count matrix and normalize its columns.
    Matrix(MatrixArgs),
    /// Classic PCA or low-rank + sparse decomposition of a matrix.
    Decompose(DecomposeArgs),
    /// Strongest positive and negative words per component, as CSV.
    TopWords(TopWordsArgs),
    /// Score a new corpus in the component space of a model.
    Project(ProjectArgs),
    /// Write model cell scores as a GeoJSON polygon layer.
    ExportGeojson(ExportArgs),
    /// Generate the two-region synthetic corpus.
    Synth(SynthArgs),
}

fn run(cli: &Cli) -> Result<geolex_cli::Outcome, CliError> {
    let config = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ctx = Context::new(cli.data_dir.clone(), config);
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, a),
        Command::Matrix(a) => commands::matrix(&ctx, a),
        Command::Decompose(a) => commands::decompose(&ctx, a),
        Command::TopWords(a) => commands::top_words_cmd(&ctx, a),
        Command::Project(a) => commands::project_cmd(&ctx, a),
        Command::ExportGeojson(a) => commands::export_geojson(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
