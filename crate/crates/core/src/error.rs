use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Capability(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what} in {path}: {detail}")]
    Parse { what: &'static str, path: PathBuf, detail: String },
    #[error("cannot bind {addr}: {source} (is the port already in use? try --port 0)")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("handler failed: {0}")]
    Handler(String),
    #[error("target process {0} has exited")]
    TargetGone(u32),
    #[error("trial failed during {stage}: {cause}")]
    Trial { stage: String, cause: String },
    #[error(transparent)]
    Stats(#[from] apbench_stats::StatsError),
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    /// Process exit code: 2 usage, 3 missing capability, 1 everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Capability(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
