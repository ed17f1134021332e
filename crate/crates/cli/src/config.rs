//! Optional key=value config file. Every key mirrors a flag name with dashes
//! turned into underscores; a flag given on the command line wins.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

pub const ENV_VAR: &str = "REASONING_CIRCUITS_CONFIG";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub pool: Option<Vec<PathBuf>>,
    pub shots: Option<usize>,
    pub seed: Option<u64>,
    pub context: Option<String>,
    pub baseline: Option<bool>,
    pub out: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub backend: Option<String>,
    pub endpoint: Option<String>,
    pub annotations: Option<PathBuf>,
    pub replay: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub confused_policy: Option<String>,
    pub validator_mode: Option<String>,
    pub traces: Option<PathBuf>,
    pub workers: Option<usize>,
    pub max_new_tokens: Option<usize>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
    pub pred: Option<PathBuf>,
    pub n: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config {}: {e}", origin.display())))
    }

    /// Loads `explicit` if given, else the file named by the environment
    /// variable, else nothing.
    pub fn load(explicit: Option<&Path>) -> Result<Self, CliError> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => match std::env::var_os(ENV_VAR) {
                Some(p) if !p.is_empty() => PathBuf::from(p),
                _ => return Ok(Self::default()),
            },
        };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        Self::parse(&text, &path)
    }
}

/// Flag, then file value, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flag, then file value; missing in both is a usage error.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file).ok_or_else(|| {
        CliError::Usage(format!(
            "--{name} is required (flag or config key '{}')",
            name.replace('-', "_")
        ))
    })
}
