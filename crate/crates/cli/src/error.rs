use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] tdcb_core::Error),
    #[error("{context}: {source}")]
    Cell {
        context: String,
        #[source]
        source: tdcb_core::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for configuration and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use tdcb_core::Error as E;
        let core = match self {
            Self::Core(e) | Self::Cell { source: e, .. } => e,
            _ => return 2,
        };
        match core {
            E::InvalidInput(_) | E::ResourceLimit(_) => 2,
            E::NumericalFailure(_) | E::DegenerateCodeword { .. } | E::RankDeficient | E::AbortTrial { .. } => 3,
        }
    }
}
