//! Configuration resolution. Precedence: command-line flag, then `BAMBOO_*`
//! environment variable (clap handles both), then the optional key=value
//! config file, then the built-in default.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const DEFAULT_SERVER: &str = "127.0.0.1:4545";
pub const DEFAULT_STATE: &str = "bamboo.state";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:4545";
pub const DEFAULT_DATA_DIR: &str = "bamboo-data";
pub const DEFAULT_A_MAX: u64 = 4096;
pub const DEFAULT_X: u64 = 2;
pub const DEFAULT_WORKERS: usize = 1;

/// Parsed key=value config file; unknown keys are rejected so typos fail
/// loudly.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "server", "state", "amax", "x", "policy", "workers", "data_dir", "listen", "max_frame",
    "fingerprint", "if_idle",
];

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile, CliError> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected key=value",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Usage(format!(
                    "{}:{}: unknown config key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key {key}={raw:?} is invalid"))),
        }
    }
}

/// Fully resolved client-side settings.
pub struct ClientSettings {
    pub server: String,
    pub state: PathBuf,
    pub fingerprint: Option<[u8; 32]>,
}

pub fn resolve_client(
    file: &ConfigFile,
    server: Option<String>,
    state: Option<PathBuf>,
    fingerprint: Option<String>,
) -> Result<ClientSettings, CliError> {
    let server = server
        .or_else(|| file.get("server").map(str::to_string))
        .unwrap_or_else(|| DEFAULT_SERVER.to_string());
    let state = state
        .or_else(|| file.get("state").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_STATE));
    let fingerprint = fingerprint
        .or_else(|| file.get("fingerprint").map(str::to_string))
        .map(|hex_str| parse_fingerprint(&hex_str))
        .transpose()?;
    Ok(ClientSettings { server, state, fingerprint })
}

fn parse_fingerprint(hex_str: &str) -> Result<[u8; 32], CliError> {
    let bytes = hex::decode(hex_str)
        .map_err(|_| CliError::Usage("fingerprint is not valid hex".into()))?;
    <[u8; 32]>::try_from(bytes.as_slice())
        .map_err(|_| CliError::Usage("fingerprint must be 32 hex bytes".into()))
}

/// Fully resolved server-side settings.
pub struct ServerSettings {
    pub listen: String,
    pub data_dir: PathBuf,
    pub workers: usize,
    pub max_frame: u32,
}

pub fn resolve_server(
    file: &ConfigFile,
    listen: Option<String>,
    data_dir: Option<PathBuf>,
    workers: Option<usize>,
    max_frame: Option<u32>,
) -> Result<ServerSettings, CliError> {
    let listen = listen
        .or_else(|| file.get("listen").map(str::to_string))
        .unwrap_or_else(|| DEFAULT_LISTEN.to_string());
    let data_dir = data_dir
        .or_else(|| file.get("data_dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
    let workers = match workers {
        Some(w) => w,
        None => file.get_parsed::<usize>("workers")?.unwrap_or(DEFAULT_WORKERS),
    };
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let max_frame = match max_frame {
        Some(m) => m,
        None => file
            .get_parsed::<u32>("max_frame")?
            .unwrap_or(bamboo_wire::DEFAULT_MAX_BODY),
    };
    Ok(ServerSettings { listen, data_dir, workers, max_frame })
}
