//! Command-line entry point. Exit status: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analytics::{self, Vocabulary};
use crate::api::{self, AppState};
use crate::artifacts::{self, ArtifactDir, ServedCorpus};
use crate::clock::build_time;
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "datanexus",
    version,
    about = "Integrated search, links and usage analytics over research information"
)]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the corpus snapshot from a sources config.
    Ingest {
        #[arg(long)]
        sources: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Import, extract or merge links.
    #[command(subcommand)]
    Links(LinksCommand),
    /// Build the search index from the snapshot and canonical links.
    BuildIndex {
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API over a built artifact directory.
    Serve(ServeArgs),
    /// Compute the usage report from event logs.
    Analyze(AnalyzeArgs),
    /// Print record counts per category and link counts per category pair.
    Stats {
        #[arg(long, alias = "out")]
        dir: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum LinksCommand {
    /// Resolve a links file into `links.import.<origin>.jsonl`.
    Import {
        #[arg(long, alias = "links")]
        file: PathBuf,
        #[arg(long)]
        origin: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract dataset mentions from `*.txt` full texts.
    Extract {
        #[arg(long)]
        fulltexts: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long, default_value = artifacts::EXTRACTOR_ORIGIN)]
        origin: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge every import into `links.jsonl` and report dangling links.
    Merge {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, alias = "out")]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 8080, value_parser = clap::value_parser!(u16).range(1..))]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Event log; defaults to `events.jsonl` in the artifact directory.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Extra action names, one per line.
    #[arg(long)]
    pub vocabulary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Log file path or glob pattern.
    #[arg(long)]
    pub logs: String,
    #[arg(long, default_value_t = analytics::DEFAULT_TIMEOUT_MINUTES, value_parser = clap::value_parser!(i64).range(1..))]
    pub timeout_min: i64,
    #[arg(long, default_value_t = analytics::DEFAULT_PATH_DEPTH, value_parser = parse_depth)]
    pub path_depth: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Write Sankey rows for all sessions as CSV.
    #[arg(long)]
    pub sankey_csv: Option<PathBuf>,
    /// Write the link-direction matrix as CSV.
    #[arg(long)]
    pub directions_csv: Option<PathBuf>,
    #[arg(long)]
    pub vocabulary: Option<PathBuf>,
}

fn parse_depth(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err("path depth must be an integer >= 1".into()),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn load_vocabulary(extra: Option<&Path>) -> Result<Vocabulary> {
    let mut vocab = Vocabulary::default();
    if let Some(path) = extra {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        vocab.extend_from_str(&text);
    }
    Ok(vocab)
}

fn expand_logs(pattern: &str) -> Result<Vec<PathBuf>> {
    let paths = glob::glob(pattern)
        .map_err(|e| Error::InvalidArgument(format!("bad glob `{pattern}`: {e}")))?;
    let mut files: Vec<PathBuf> = paths
        .filter_map(|p| p.ok())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::MissingArtifact(PathBuf::from(pattern)));
    }
    Ok(files)
}

#[derive(Serialize)]
struct IngestSummary {
    records: usize,
    digest: String,
    source_report: std::collections::BTreeMap<String, crate::ingest::SourceCounts>,
    rejects: usize,
}

#[derive(Serialize)]
struct IndexSummary {
    documents: usize,
    terms: usize,
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { sources, out } => {
            let snapshot = artifacts::run_ingest(&sources, &ArtifactDir::new(out), build_time())?;
            print_json(&IngestSummary {
                records: snapshot.records.len(),
                digest: snapshot.digest(),
                source_report: snapshot.source_report.clone(),
                rejects: snapshot.rejects.len(),
            })
        }
        Command::Links(LinksCommand::Import { file, origin, out }) => print_json(
            &artifacts::run_link_import(&ArtifactDir::new(out), &file, &origin, build_time())?,
        ),
        Command::Links(LinksCommand::Extract {
            fulltexts,
            registry,
            origin,
            out,
        }) => {
            let dir = ArtifactDir::new(out);
            print_json(&artifacts::run_link_extract(
                &dir,
                &fulltexts,
                &registry,
                &origin,
                build_time(),
            )?)
        }
        Command::Links(LinksCommand::Merge { out }) => {
            print_json(&artifacts::run_link_merge(&ArtifactDir::new(out))?)
        }
        Command::BuildIndex { out } => {
            let index = artifacts::run_build_index(&ArtifactDir::new(out))?;
            print_json(&IndexSummary {
                documents: index.len(),
                terms: index.fields.values().map(|f| f.postings.len()).sum(),
            })
        }
        Command::Serve(args) => serve(args),
        Command::Analyze(args) => analyze(args),
        Command::Stats { dir } => print_json(&ServedCorpus::load(&ArtifactDir::new(dir))?.stats()),
    }
}

fn serve(args: ServeArgs) -> Result<()> {
    let dir = ArtifactDir::new(&args.dir);
    let log_path = args
        .events
        .clone()
        .unwrap_or_else(|| api::default_log_path(&args.dir));
    let state = AppState::new(
        load_vocabulary(args.vocabulary.as_deref())?,
        Some(&log_path),
    )?
    .with_artifacts(dir);
    state.reload()?;
    let state = Arc::new(state);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
        log::info!("listening on {}", listener.local_addr()?);
        eprintln!("listening on http://{}", listener.local_addr()?);
        #[cfg(unix)]
        {
            let reload_state = state.clone();
            tokio::spawn(async move {
                use tokio::signal::unix::{signal, SignalKind};
                let Ok(mut hup) = signal(SignalKind::hangup()) else {
                    return;
                };
                while hup.recv().await.is_some() {
                    match reload_state.reload() {
                        Ok(()) => log::info!("corpus reloaded"),
                        Err(e) => log::error!("reload failed, keeping previous corpus: {e}"),
                    }
                }
            });
        }
        api::serve(state, listener).await
    })?;
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let vocab = load_vocabulary(args.vocabulary.as_deref())?;
    let files = expand_logs(&args.logs)?;
    let report = analytics::analyze_files(
        &files,
        &vocab,
        chrono::Duration::minutes(args.timeout_min),
        args.path_depth,
    )?;
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&args.out, bytes)?;
    if let Some(path) = &args.sankey_csv {
        analytics::write_sankey_csv(&report.paths.all_sessions, fs::File::create(path)?)?;
    }
    if let Some(path) = &args.directions_csv {
        analytics::write_direction_csv(&report, fs::File::create(path)?)?;
    }
    log::info!(
        "{} sessions, {} events, {} rejected",
        report.session_count,
        report.event_count,
        report.rejected_events
    );
    Ok(())
}

fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
