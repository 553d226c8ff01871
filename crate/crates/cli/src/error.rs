use std::io;
use std::path::{Path, PathBuf};

use evoforge_core::evolution::EvolutionError;
use evoforge_core::pca::PcaError;
use evoforge_core::synth::SynthError;
use evoforge_core::voicefile::VoiceFileError;
use evoforge_service::{ApiError, ConfigError, ErrorCode, ServeError};
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    VoiceFile { path: PathBuf, source: VoiceFileError },
    #[error("{}:{line}: {source}", path.display())]
    Report {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Serve(#[from] ServeError),
}

impl CliError {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> Self + '_ {
        move |source| Self::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub fn to_api(&self) -> ApiError {
        let code = match self {
            Self::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => ErrorCode::NotFound,
            Self::Io { .. } | Self::Serve(_) => ErrorCode::Internal,
            Self::Evolution(EvolutionError::Internal(_)) => ErrorCode::Internal,
            Self::Synth(SynthError::UnknownBackend(_)) => ErrorCode::NotFound,
            _ => ErrorCode::Validation,
        };
        let err = ApiError::new(code, self.to_string());
        match self {
            Self::Io { path, .. } | Self::VoiceFile { path, .. } => err.with_detail(json!({ "path": path })),
            Self::Report { path, line, .. } => err.with_detail(json!({ "path": path, "line": line })),
            _ => err,
        }
    }
}
