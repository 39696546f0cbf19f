//! `bamboo`: operator entry points for the encrypted keyword index.
//!
//! Exit codes are stable: 1 usage, 2 state, 3 network, 4 protocol/epoch.

mod client_ops;
mod config;
mod daemon;

use std::path::PathBuf;

use bamboo_core::client::PaddingPolicy;
use bamboo_core::{CoreError, Op};
use bamboo_wire::WireError;
use clap::{Args, Parser, Subcommand};

use config::ConfigFile;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    State(String),
    Network(String),
    Protocol(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::State(_) => 2,
            CliError::Network(_) => 3,
            CliError::Protocol(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::State(m) | CliError::Network(m) | CliError::Protocol(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        match e {
            CoreError::UnknownKeyword => CliError::State("unknown keyword".into()),
            CoreError::CorruptState(_) | CoreError::Io(_) => CliError::State(e.to_string()),
            CoreError::InvalidParams(_) | CoreError::InvalidIdentifier(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Protocol(other.to_string()),
        }
    }
}

impl From<WireError> for CliError {
    fn from(e: WireError) -> CliError {
        match e {
            WireError::Io(_) | WireError::Truncated => CliError::Network(e.to_string()),
            other => CliError::Protocol(other.to_string()),
        }
    }
}

impl From<bamboo_bench::BenchError> for CliError {
    fn from(e: bamboo_bench::BenchError) -> CliError {
        match e {
            bamboo_bench::BenchError::Core(c) => c.into(),
            bamboo_bench::BenchError::Wire(w) => w.into(),
            bamboo_bench::BenchError::Io(io) => CliError::State(io.to_string()),
            other => CliError::Protocol(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bamboo",
    version,
    about = "Encrypted keyword index with dynamic updates, padded search, and whole-database key rotation"
)]
struct Cli {
    /// Optional key=value config file (also via BAMBOO_CONFIG).
    #[arg(long, global = true, env = "BAMBOO_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ClientFlags {
    /// Server address.
    #[arg(long, env = "BAMBOO_SERVER")]
    server: Option<String>,

    /// Client state file.
    #[arg(long, env = "BAMBOO_STATE")]
    state: Option<PathBuf>,

    /// Pinned server fingerprint (hex SHA-256 of its identity share).
    #[arg(long, env = "BAMBOO_FINGERPRINT")]
    fingerprint: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Create a fresh client state file and secret keys.
    Init {
        #[arg(long, env = "BAMBOO_STATE")]
        state: Option<PathBuf>,
        /// Maximum padding value (fixed search-response size under the max policy).
        #[arg(long, env = "BAMBOO_AMAX")]
        amax: Option<u64>,
        /// Bucket base for the adjustable padding policy (>= 2).
        #[arg(long, env = "BAMBOO_X")]
        x: Option<u64>,
    },
    /// Encrypt and upload an add entry for keyword and hex identifier.
    Add {
        keyword: String,
        id: String,
        #[command(flatten)]
        flags: ClientFlags,
    },
    /// Encrypt and upload a delete entry for keyword and hex identifier.
    Del {
        keyword: String,
        id: String,
        #[command(flatten)]
        flags: ClientFlags,
    },
    /// Search a keyword; prints one live identifier per line, sorted.
    Search {
        keyword: String,
        /// Padding policy: max or adjustable.
        #[arg(long, env = "BAMBOO_POLICY")]
        policy: Option<String>,
        #[command(flatten)]
        flags: ClientFlags,
    },
    /// Rotate the secret keys and re-key the whole server database.
    Rotate {
        /// Only rotate if the client has been idle at least this many seconds.
        #[arg(long, value_name = "SECS")]
        if_idle: Option<u64>,
        #[command(flatten)]
        flags: ClientFlags,
    },
    /// Bulk-load `keyword<TAB>hex-id` lines as add entries.
    Ingest {
        file: PathBuf,
        #[command(flatten)]
        flags: ClientFlags,
    },
    /// Run the server daemon.
    Serve {
        #[arg(long, env = "BAMBOO_LISTEN")]
        listen: Option<String>,
        #[arg(long, env = "BAMBOO_DATA_DIR")]
        data_dir: Option<PathBuf>,
        /// Rotation worker threads.
        #[arg(long, env = "BAMBOO_WORKERS")]
        workers: Option<usize>,
        /// Maximum frame body size in bytes.
        #[arg(long, env = "BAMBOO_MAX_FRAME")]
        max_frame: Option<u32>,
    },
    /// Run a benchmark suite (update, rotate, search, bandwidth, all) and
    /// print the metrics CSV.
    Bench {
        suite: String,
        /// Timed runs per configuration.
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("{}", e.message());
        std::process::exit(e.code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Init { state, amax, x } => {
            let state = state
                .or_else(|| file.get("state").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(config::DEFAULT_STATE));
            let amax = match amax {
                Some(v) => v,
                None => file.get_parsed::<u64>("amax")?.unwrap_or(config::DEFAULT_A_MAX),
            };
            let x = match x {
                Some(v) => v,
                None => file.get_parsed::<u64>("x")?.unwrap_or(config::DEFAULT_X),
            };
            client_ops::cmd_init(&state, amax, x)
        }
        Command::Add { keyword, id, flags } => {
            let settings = config::resolve_client(&file, flags.server, flags.state, flags.fingerprint)?;
            client_ops::cmd_update(&settings, Op::Add, &keyword, &id)
        }
        Command::Del { keyword, id, flags } => {
            let settings = config::resolve_client(&file, flags.server, flags.state, flags.fingerprint)?;
            client_ops::cmd_update(&settings, Op::Del, &keyword, &id)
        }
        Command::Search { keyword, policy, flags } => {
            let settings = config::resolve_client(&file, flags.server, flags.state, flags.fingerprint)?;
            let policy = policy
                .or_else(|| file.get("policy").map(str::to_string))
                .unwrap_or_else(|| "max".to_string());
            let policy: PaddingPolicy = policy
                .parse()
                .map_err(|e: CoreError| CliError::Usage(e.to_string()))?;
            client_ops::cmd_search(&settings, &keyword, policy)
        }
        Command::Rotate { if_idle, flags } => {
            let settings = config::resolve_client(&file, flags.server, flags.state, flags.fingerprint)?;
            let if_idle = match if_idle {
                Some(v) => Some(v),
                None => file.get_parsed::<u64>("if_idle")?,
            };
            client_ops::cmd_rotate(&settings, if_idle)
        }
        Command::Ingest { file: input, flags } => {
            let settings = config::resolve_client(&file, flags.server, flags.state, flags.fingerprint)?;
            client_ops::cmd_ingest(&settings, &input)
        }
        Command::Serve { listen, data_dir, workers, max_frame } => {
            let settings = config::resolve_server(&file, listen, data_dir, workers, max_frame)?;
            daemon::cmd_serve(&settings)
        }
        Command::Bench { suite, runs, out } => {
            let suite: bamboo_bench::Suite = suite.parse().map_err(CliError::Usage)?;
            let rows = bamboo_bench::run_scaling(client_ops::default_params(), suite, runs)?;
            let csv = bamboo_bench::to_csv(&rows);
            match out {
                Some(path) => std::fs::write(&path, csv)
                    .map_err(|e| CliError::State(format!("cannot write {}: {e}", path.display())))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}
