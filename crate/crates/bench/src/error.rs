use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// Malformed input: config, CSV or command line.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: jointprior_core::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, BenchError>;

impl BenchError {
    pub fn core(context: impl Into<String>, source: jointprior_core::Error) -> Self {
        BenchError::Core { context: context.into(), source }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for parse/config errors, 3 for numerical-domain
    /// errors, 4 for non-convergence.
    pub fn exit_code(&self) -> i32 {
        use jointprior_core::Error as E;
        match self {
            BenchError::Parse(_) | BenchError::Io { .. } => 2,
            BenchError::Core { source, .. } => match source {
                E::NonConvergence { .. } => 4,
                E::NumericalDomain(_) | E::RankDeficient { .. } | E::DegenerateData(_) => 3,
                _ => 2,
            },
        }
    }
}

impl From<jointprior_core::Error> for BenchError {
    fn from(e: jointprior_core::Error) -> Self {
        BenchError::core("computation failed", e)
    }
}
