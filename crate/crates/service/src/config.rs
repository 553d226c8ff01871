use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use evoforge_core::corpus::{SpeakerCorpus, VoiceSpace};
use evoforge_core::pca::PcaModel;
use evoforge_core::session::{FileStore, MemoryStore, SessionStore, Studio, StudioSettings, SystemClock, DEFAULT_TEXT};
use evoforge_core::synth::BackendRegistry;
use thiserror::Error;

pub const ENV_BIND: &str = "EVOFORGE_BIND";
pub const ENV_PCA_MODEL: &str = "EVOFORGE_PCA_MODEL";
pub const ENV_STORE: &str = "EVOFORGE_STORE";
pub const ENV_DEFAULT_TEXT: &str = "EVOFORGE_DEFAULT_TEXT";
pub const ENV_CORS_ORIGIN: &str = "EVOFORGE_CORS_ORIGIN";
pub const ENV_PRERENDER: &str = "EVOFORGE_PRERENDER";

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid {name}: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error("cannot read PCA model {path}: {reason}")]
    Model { path: PathBuf, reason: String },
    #[error("cannot open session store {path}: {reason}")]
    Store { path: PathBuf, reason: String },
    #[error("{0}")]
    Studio(String),
}

/// Runtime settings. Every field has an `EVOFORGE_*` environment variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    /// PCA model JSON; the reference model is fitted at startup when unset.
    pub pca_model: Option<PathBuf>,
    /// Session directory; sessions are kept in memory only when unset.
    pub store: Option<PathBuf>,
    pub default_text: String,
    /// Origin allowed by CORS; cross-origin requests are refused when unset.
    pub cors_origin: Option<String>,
    /// Render both clips of every new pair in the background.
    pub prerender: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND.parse().expect("valid default address"),
            pca_model: None,
            store: None,
            default_text: DEFAULT_TEXT.to_owned(),
            cors_origin: None,
            prerender: false,
        }
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Reads settings through `lookup`; empty values count as unset.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        let mut c = Self::default();
        if let Some(b) = get(ENV_BIND) {
            c.bind = b.parse().map_err(|e| ConfigError::Invalid {
                name: ENV_BIND,
                reason: format!("{b:?}: {e}"),
            })?;
        }
        c.pca_model = get(ENV_PCA_MODEL).map(PathBuf::from);
        c.store = get(ENV_STORE).map(PathBuf::from);
        if let Some(t) = get(ENV_DEFAULT_TEXT) {
            c.default_text = t;
        }
        c.cors_origin = get(ENV_CORS_ORIGIN);
        if let Some(p) = get(ENV_PRERENDER) {
            c.prerender = match p.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => true,
                "0" | "false" | "no" | "off" => false,
                other => {
                    return Err(ConfigError::Invalid {
                        name: ENV_PRERENDER,
                        reason: format!("{other:?} is not a boolean"),
                    })
                }
            };
        }
        Ok(c)
    }

    pub fn voice_space(&self) -> Result<VoiceSpace, ConfigError> {
        match &self.pca_model {
            None => Ok(VoiceSpace::reference()),
            Some(path) => {
                let model_err = |reason: String| ConfigError::Model { path: path.clone(), reason };
                let text = std::fs::read_to_string(path).map_err(|e| model_err(e.to_string()))?;
                let pca = PcaModel::from_json(&text).map_err(|e| model_err(e.to_string()))?;
                VoiceSpace::with_model(pca, &SpeakerCorpus::reference()).map_err(|e| model_err(e.to_string()))
            }
        }
    }

    pub fn session_store(&self) -> Result<Arc<dyn SessionStore>, ConfigError> {
        Ok(match &self.store {
            None => Arc::new(MemoryStore::default()),
            Some(path) => Arc::new(FileStore::open(path).map_err(|e| ConfigError::Store {
                path: path.clone(),
                reason: e.to_string(),
            })?),
        })
    }

    pub fn studio(&self) -> Result<Studio, ConfigError> {
        Studio::new(
            Arc::new(self.voice_space()?),
            BackendRegistry::default(),
            self.session_store()?,
            Arc::new(SystemClock),
            StudioSettings {
                default_text: self.default_text.clone(),
                ..StudioSettings::default()
            },
        )
        .map_err(|e| ConfigError::Studio(e.to_string()))
    }
}
