use std::path::PathBuf;

use thiserror::Error;

/// Problems found while loading or validating a scenario, run or dataset config.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("duplicate agent id {0}")]
    DuplicateId(u32),
    #[error("agents {a} and {b} overlap at spawn")]
    Overlap { a: u32, b: u32 },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate box: length {length}, width {width}")]
    DegenerateBox { length: f64, width: f64 },
}

#[derive(Debug, Error)]
pub enum LidarError {
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("attenuation must be non-negative, got {0}")]
    NegativeAttenuation(f64),
    #[error("velodyne file {path} has {len} bytes, not a multiple of 16")]
    BadFrameLength { path: PathBuf, len: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A message that reached the decoder but could not be turned into a frame.
#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("payload is not valid UTF-8 JSON for a perception frame: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid frame content: {0}")]
    Invalid(String),
    #[error("declared payload length {0} exceeds the {max} byte limit", max = crate::protocol::MAX_PAYLOAD_LEN)]
    Oversized(usize),
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("could not connect to {addr} after {attempts} attempts: {source}")]
    Connect {
        addr: String,
        attempts: u32,
        #[source]
        source: std::io::Error,
    },
    #[error("transport i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("peer process failed: {0}")]
    Peer(String),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("output path {path} is not writable: {source}")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Format {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lidar(#[from] LidarError),
}

/// Top-level error for the orchestration layer and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Lidar(#[from] LidarError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("image output: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the `cmm` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dataset(DatasetError::Config(_)) => 2,
            Error::Dataset(DatasetError::Format { .. }) => 2,
            Error::Transport(_) => 3,
            _ => 1,
        }
    }
}
