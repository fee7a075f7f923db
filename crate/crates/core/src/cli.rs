//! The `fdom` command line.
//!
//! Exit codes: 0 on success, 1 when the content was rejected (validation or
//! another domain rule), 2 for usage, I/O, and malformed input.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use axum::http::HeaderValue;
use clap::{Parser, Subcommand, ValueEnum};

use crate::api::{self, ApiConfig, CorsOrigin, DEFAULT_LISTEN};
use crate::catalog::{self, Bundle, CatalogDump, ExportMode, ImportError, ImportOptions};
use crate::clock::SystemClock;
use crate::pid::DEFAULT_PREFIX;
use crate::registry::{Registry, RegistryError};
use crate::store::{StoreError, JOURNAL_FILE, LOCK_FILE};

pub const EXIT_OK: u8 = 0;
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "fdom", version, about = "FAIR Digital Object manager")]
pub struct Cli {
    /// Data directory holding the journal, snapshots, and LOCK file.
    #[arg(long, global = true, env = "FDOM_DATA_DIR", default_value = "fdom-data")]
    pub data_dir: PathBuf,

    /// Prefix for newly minted PIDs.
    #[arg(long, global = true, env = "FDOM_PID_PREFIX", default_value = DEFAULT_PREFIX)]
    pub prefix: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "FDOM_LISTEN", default_value = DEFAULT_LISTEN)]
        listen: String,
        /// Allowed CORS origin: `*`, an exact origin, or `none`.
        #[arg(long, default_value = "*")]
        cors_origin: String,
        /// Directory of static files served under /playground/.
        #[arg(long)]
        playground_dir: Option<PathBuf>,
    },
    /// Load a catalog dump into the data directory.
    Import {
        file: PathBuf,
        /// Import into a data directory that already holds records.
        #[arg(long)]
        merge: bool,
        /// Skip metadata validation (disaster recovery only).
        #[arg(long)]
        raw: bool,
    },
    /// Write the data directory out as a catalog dump (`-` for stdout).
    Export {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Events)]
        mode: Mode,
    },
    /// Validate a bundle of metadata payloads without touching any store.
    Validate { file: PathBuf },
    /// Write a snapshot of the current state next to the journal.
    Snapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Events,
    Records,
}

impl From<Mode> for ExportMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Events => ExportMode::Events,
            Mode::Records => ExportMode::Records,
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DOMAIN,
            message: message.into(),
        }
    }
}

impl From<RegistryError> for Failure {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::Storage(_) | RegistryError::Pid(_) => Failure::usage(e.to_string()),
            other => Failure::domain(other.to_string()),
        }
    }
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(f) => {
            eprintln!("fdom: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Serve {
            listen,
            cors_origin,
            playground_dir,
        } => serve(&cli.data_dir, &cli.prefix, &listen, &cors_origin, playground_dir),
        Command::Import { file, merge, raw } => import(&cli.data_dir, &cli.prefix, &file, ImportOptions { merge, raw }),
        Command::Export { file, mode } => export(&cli.data_dir, &cli.prefix, &file, mode.into()),
        Command::Validate { file } => validate(&file),
        Command::Snapshot => {
            let registry = open(&cli.data_dir, &cli.prefix)?;
            if let Some(path) = registry.write_snapshot()? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn open(dir: &Path, prefix: &str) -> Result<Registry, Failure> {
    let (registry, recovery) = Registry::open(dir, prefix, Arc::new(SystemClock)).map_err(|e| match e {
        RegistryError::Storage(StoreError::Locked(_)) => {
            Failure::usage(format!("{e}; stop the running server first"))
        }
        other => Failure::usage(format!("cannot open {}: {other}", dir.display())),
    })?;
    if recovery.truncated_bytes > 0 {
        eprintln!(
            "fdom: discarded {} bytes of incomplete journal tail",
            recovery.truncated_bytes
        );
    }
    Ok(registry)
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        io::Read::read_to_end(&mut io::stdin(), &mut buf).map_err(|e| Failure::usage(format!("stdin: {e}")))?;
        Ok(buf)
    } else {
        fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    }
}

fn cors(origin: &str) -> Result<CorsOrigin, Failure> {
    match origin {
        "*" => Ok(CorsOrigin::Any),
        "none" | "" => Ok(CorsOrigin::Disabled),
        exact => HeaderValue::from_str(exact)
            .map(CorsOrigin::Exact)
            .map_err(|_| Failure::usage(format!("invalid CORS origin {exact:?}"))),
    }
}

fn serve(
    dir: &Path,
    prefix: &str,
    listen: &str,
    cors_origin: &str,
    playground_dir: Option<PathBuf>,
) -> Result<(), Failure> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .try_init();
    let config = ApiConfig {
        cors: cors(cors_origin)?,
        playground_dir,
    };
    let registry = Arc::new(open(dir, prefix)?);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::usage(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| Failure::usage(format!("cannot listen on {listen}: {e}")))?;
        let addr = listener
            .local_addr()
            .map_err(|e| Failure::usage(e.to_string()))?;
        // Scripts (and the integration tests) read the bound address from here.
        println!("listening on http://{addr}");
        let _ = io::stdout().flush();
        api::serve(registry, listener, config)
            .await
            .map_err(|e| Failure::usage(format!("server error: {e}")))
    })
}

/// Files `Store::open` creates in a fresh directory, so a failed import
/// can put the directory back the way it found it.
struct Footprint {
    dir_existed: bool,
    created: Vec<PathBuf>,
}

impl Footprint {
    fn take(dir: &Path) -> Self {
        let dir_existed = dir.exists();
        let created = [JOURNAL_FILE, LOCK_FILE]
            .iter()
            .map(|f| dir.join(f))
            .filter(|p| !p.exists())
            .collect();
        Self { dir_existed, created }
    }

    fn undo(&self, dir: &Path) {
        for path in &self.created {
            let _ = fs::remove_file(path);
        }
        if !self.dir_existed {
            let _ = fs::remove_dir(dir);
        }
    }
}

fn import(dir: &Path, prefix: &str, file: &Path, options: ImportOptions) -> Result<(), Failure> {
    let bytes = read_input(file)?;
    let dump: CatalogDump =
        serde_json::from_slice(&bytes).map_err(|e| Failure::usage(format!("{}: malformed dump: {e}", file.display())))?;

    let footprint = Footprint::take(dir);
    let result = open(dir, prefix).and_then(|registry| {
        let outcome = catalog::import(&registry, dump, options);
        drop(registry);
        outcome.map_err(import_failure)
    });
    match result {
        Ok(summary) => {
            println!(
                "imported {} records ({} events)",
                summary.records, summary.events_written
            );
            Ok(())
        }
        Err(f) => {
            footprint.undo(dir);
            Err(f)
        }
    }
}

fn import_failure(e: ImportError) -> Failure {
    match e {
        e if e.is_malformed() => Failure::usage(e.to_string()),
        ImportError::Registry(e) => e.into(),
        ImportError::Invalid { index, pid, report } => {
            let report = serde_json::to_string_pretty(&report).unwrap_or_default();
            Failure::domain(format!("entry {index} ({pid}): metadata failed validation\n{report}"))
        }
        other => Failure::domain(other.to_string()),
    }
}

fn export(dir: &Path, prefix: &str, file: &Path, mode: ExportMode) -> Result<(), Failure> {
    let registry = open(dir, prefix)?;
    let dump = catalog::export(&registry, mode)?;
    let mut text = serde_json::to_string_pretty(&dump).map_err(|e| Failure::usage(e.to_string()))?;
    text.push('\n');
    if file.as_os_str() == "-" {
        io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::usage(format!("stdout: {e}")))
    } else {
        fs::write(file, text).map_err(|e| Failure::usage(format!("{}: {e}", file.display())))
    }
}

fn validate(file: &Path) -> Result<(), Failure> {
    let bytes = read_input(file)?;
    let bundle: Bundle = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::usage(format!("{}: malformed bundle: {e}", file.display())))?;
    let reports = catalog::validate_bundle(&bundle.into_items());
    let failed = reports.iter().filter(|r| !r.report.ok).count();
    let text = serde_json::to_string_pretty(&reports).map_err(|e| Failure::usage(e.to_string()))?;
    println!("{text}");
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::domain(format!("{failed} of {} items failed validation", reports.len())))
    }
}
