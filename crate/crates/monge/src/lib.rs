//! File formats, convergence tables and run plumbing on top of `monge-core`.

pub mod format;
pub mod run;
pub mod table;

use std::path::PathBuf;

pub use monge_core as core;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] monge_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: monge_core::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error comes from the nonlinear solve rather than the input.
    pub fn is_solver_failure(&self) -> bool {
        use monge_core::Error as E;
        matches!(
            self,
            Error::Core(E::Divergence { .. } | E::NotConverged { .. } | E::Singular { .. })
        )
    }
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
