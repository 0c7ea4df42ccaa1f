use std::fs;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use trove_core::asset::AssetStore;
use trove_core::clock::SystemClock;
use trove_core::model::ProjectId;
use trove_core::service::{http, Engine};
use trove_core::stats::{self, CorpusReport};
use trove_core::store::{ProjectState, Snapshot};

#[derive(Debug, Parser)]
#[command(name = "trove", version, about = "Local card store for web research")]
struct Cli {
    /// Directory holding projects and assets.
    #[arg(
        long,
        global = true,
        env = "TROVE_DATA_DIR",
        default_value = "trove-data"
    )]
    data_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Address to bind; loopback unless overridden.
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
    },
    /// Write a project's snapshot document.
    Export {
        project_id: String,
        /// Output file; standard output when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Import a snapshot document as a new project.
    Import {
        file: PathBuf,
        /// Another data directory to copy the snapshot's assets from.
        #[arg(long)]
        assets_from: Option<PathBuf>,
    },
    /// Compute the corpus report over snapshot files or data directories.
    Stats {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    /// The annotation length table, aligned for reading.
    Table,
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Serve { port, host } => serve(&cli.data_dir, SocketAddr::new(host, port)),
        Command::Export { project_id, output } => {
            let engine = Engine::open(&cli.data_dir, Arc::new(SystemClock))?;
            let bytes = engine.export(&ProjectId::from(project_id))?;
            match output {
                Some(path) => fs::write(path, bytes)?,
                None => std::io::stdout().write_all(&bytes)?,
            }
            Ok(())
        }
        Command::Import { file, assets_from } => {
            let engine = Engine::open(&cli.data_dir, Arc::new(SystemClock))?;
            let bytes = fs::read(&file)?;
            if let Some(other) = assets_from {
                copy_assets(&bytes, &AssetStore::open(other.join("assets"))?, &engine)?;
            }
            let info = engine.import(&bytes)?;
            println!("{}", info.project.id);
            Ok(())
        }
        Command::Stats { inputs, format } => {
            let report = corpus_from(&inputs)?;
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&report)? + "\n",
                Format::Csv => report.to_csv(),
                Format::Table => report.annotation_table_text(),
            };
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn serve(data_dir: &Path, addr: SocketAddr) -> CliResult {
    let engine = Arc::new(Engine::open(data_dir, Arc::new(SystemClock))?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(http::serve(engine, addr, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(())
}

fn copy_assets(snapshot: &[u8], from: &AssetStore, engine: &Engine) -> CliResult {
    let snapshot = Snapshot::parse(snapshot)?;
    for hash in snapshot.assets.keys() {
        if !engine.assets().contains(hash) {
            let asset = from.get(hash.as_str())?;
            engine.put_asset(&asset.bytes, &asset.media_type)?;
        }
    }
    Ok(())
}

/// Snapshot files are read directly (their assets need not be present);
/// data directories contribute every project they hold; other directories
/// contribute the `.json` files directly inside them.
fn corpus_from(inputs: &[PathBuf]) -> Result<CorpusReport, Box<dyn std::error::Error>> {
    let mut states: Vec<ProjectState> = Vec::new();
    for input in inputs {
        if input.join("projects").is_dir() {
            let engine = Engine::open(input, Arc::new(SystemClock))?;
            for info in engine.list_projects() {
                states.push((*engine.state(&info.project.id)?).clone());
            }
        } else if input.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            for file in files {
                states.push(load_snapshot(&file)?);
            }
        } else {
            states.push(load_snapshot(input)?);
        }
    }
    Ok(stats::corpus_report(states.iter()))
}

fn load_snapshot(path: &Path) -> Result<ProjectState, Box<dyn std::error::Error>> {
    let snapshot =
        Snapshot::parse(&fs::read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    snapshot
        .validate()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let id = snapshot.project.id.clone();
    Ok(snapshot.into_state(id))
}
