//! Library side of the `ecad` command: configuration, sub-commands and the
//! dataset generation pipeline.

use std::path::Path;

pub mod commands;
pub mod config;
pub mod dataset;

pub use config::Config;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable inputs, invalid configuration.
    Usage(String),
    /// The inputs were read but the operation failed on them.
    Domain { message: String, diagnostic: serde_json::Value },
}

impl CliError {
    pub fn domain(message: impl Into<String>, diagnostic: serde_json::Value) -> Self {
        CliError::Domain { message: message.into(), diagnostic }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain { .. } => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Domain { message, .. } => f.write_str(message),
        }
    }
}

impl std::error::Error for CliError {}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Runs `f` on a pool of `jobs` threads (0 means one per core).
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
