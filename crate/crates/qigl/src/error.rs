use std::path::PathBuf;

use qigl_core::QiglError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{} file(s) could not be loaded:\n{}", .0.len(), render_failures(.0))]
    Load(Vec<(PathBuf, String)>),
    #[error("{path}:{}{message}", line.map(|l| format!("{l}: ")).unwrap_or_else(|| " ".into()))]
    Config { path: String, line: Option<usize>, message: String },
    #[error("checkpoint {}: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] QiglError),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Format { path: path.into(), message: message.into() }
    }
}

fn render_failures(failures: &[(PathBuf, String)]) -> String {
    failures
        .iter()
        .map(|(p, m)| format!("  {}: {m}", p.display()))
        .collect::<Vec<_>>()
        .join("\n")
}
