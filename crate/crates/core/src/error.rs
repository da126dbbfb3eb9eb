use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can surface.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("topology: {0}")]
    Topology(String),

    #[error("cannot place {nblocks} blocks on {nranks} ranks: at most one rank per block")]
    Capacity { nranks: usize, nblocks: usize },

    #[error("non-finite value in block {block} at (i={i}, j={j}, pde={pde}, plane={plane})")]
    Divergence { block: usize, i: usize, j: usize, pde: usize, plane: usize },

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("collective: {0}")]
    Collective(String),

    #[error("rank {rank} failed: {source}")]
    Rank {
        rank: usize,
        #[source]
        source: Box<Error>,
    },

    /// Another rank failed and the run was torn down.
    #[error("run aborted by a failing peer")]
    Aborted,

    #[error("plan: {0}")]
    Plan(String),

    #[error("i/o on {path} at offset {offset}: {source}")]
    Io {
        path: PathBuf,
        offset: u64,
        #[source]
        source: std::io::Error,
    },

    #[error("thread {thread} could not open {path}: {source}")]
    Open {
        thread: usize,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("domain: {0}")]
    Domain(String),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, offset: u64, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), offset, source }
    }

    /// Configuration-class errors map to exit status 2 in the command line tool.
    pub fn is_configuration(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Topology(_) | Error::Capacity { .. } | Error::Usage(_))
    }
}
