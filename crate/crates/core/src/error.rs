use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("ray {index} left the finite range after step {step}")]
    Propagation { index: usize, step: usize },

    #[error("time marching became unstable at step {step}; try a smaller time step")]
    Instability { step: usize },

    #[error("assembly integrity: {0}")]
    Integrity(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Format(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Propagation { .. } | Error::Instability { .. } | Error::Integrity(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Io(_) | Error::Format(_) => 1,
        }
    }
}
