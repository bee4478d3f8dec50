//! Batch front end: run configs, sweeps, built-in verification recipes and
//! artifact emission.

pub mod config;
pub mod ode;
pub mod pipeline;
pub mod sweep;
pub mod verify;

/// Failure class of a command, mapped onto the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    /// A verification criterion failed.
    Check,
    /// Bad input: malformed config, inadmissible parameters, missing files.
    Validation,
    /// The numerics broke down after the input was accepted.
    Runtime,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Check => 1,
            FailureKind::Validation => 2,
            FailureKind::Runtime => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{error:#}")]
pub struct CliError {
    pub kind: FailureKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn validation(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: FailureKind::Validation,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: FailureKind::Runtime,
            error: error.into(),
        }
    }

    pub fn check(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: FailureKind::Check,
            error: error.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags an `anyhow` result with a failure class.
pub(crate) trait Classify<T> {
    fn invalid(self) -> CliResult<T>;
    fn failed(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> CliResult<T> {
        self.map_err(CliError::validation)
    }

    fn failed(self) -> CliResult<T> {
        self.map_err(CliError::runtime)
    }
}

/// Runs `f` on a pool of `workers` threads (the default size for `None`).
/// Without the `parallel` feature everything runs on the calling thread.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> CliResult<R> {
    if workers == Some(0) {
        return Err(CliError::validation(anyhow::anyhow!("--workers must be positive")));
    }
    #[cfg(feature = "parallel")]
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = workers {
            builder = builder.num_threads(n);
        }
        Ok(builder.build().failed()?.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(f())
    }
}
