use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T, E = WorkbenchError> = std::result::Result<T, E>;

impl WorkbenchError {
    /// Process exit code: 2 config, 3 data, 4 run or output failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkbenchError::Config(_) => 2,
            WorkbenchError::Data(_) => 3,
            WorkbenchError::Run(_) | WorkbenchError::Io { .. } => 4,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        WorkbenchError::Io { path: path.to_path_buf(), source }
    }
}

impl From<lexcom_core::Error> for WorkbenchError {
    fn from(e: lexcom_core::Error) -> Self {
        WorkbenchError::Run(e.to_string())
    }
}

impl From<lexcom_core::error::ContextError> for WorkbenchError {
    fn from(e: lexcom_core::error::ContextError) -> Self {
        WorkbenchError::Data(e.to_string())
    }
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| WorkbenchError::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| WorkbenchError::io(path, e))
}

pub(crate) fn read_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| WorkbenchError::Data(format!("{}: {e}", path.display())))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| WorkbenchError::Run(e.to_string()))?;
    text.push('\n');
    write_file(path, text)
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_string(path)?).map_err(|e| WorkbenchError::Data(format!("{}: {e}", path.display())))
}
