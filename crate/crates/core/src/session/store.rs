//! Session persistence: one header document per session plus an append-only
//! lineage of accepted judgments. Populations are not stored; they are
//! rebuilt by replaying the lineage from the seeds.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::Judgment;

use super::{SessionConfig, SessionId, SessionStatus};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt session record: {0}")]
    Corrupt(String),
}

/// Everything about a session except its lineage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: SessionId,
    pub status: SessionStatus,
    pub config: SessionConfig,
    pub text: String,
    pub backend: String,
    pub sample_rate: u32,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    #[serde(default)]
    pub finished_at: Option<DateTime<Utc>>,
}

/// One accepted judgment. `generation` is the generation it was made in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageRecord {
    pub generation: u64,
    pub judgment: Judgment,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredSession {
    pub header: SessionHeader,
    pub lineage: Vec<LineageRecord>,
}

pub trait SessionStore: Send + Sync {
    fn put_header(&self, header: &SessionHeader) -> Result<(), StoreError>;
    fn append_lineage(&self, id: &SessionId, record: &LineageRecord) -> Result<(), StoreError>;
    fn load(&self, id: &SessionId) -> Result<Option<StoredSession>, StoreError>;
}

/// Volatile store.
#[derive(Debug, Default)]
pub struct MemoryStore {
    inner: Mutex<HashMap<SessionId, StoredSession>>,
}

impl SessionStore for MemoryStore {
    fn put_header(&self, header: &SessionHeader) -> Result<(), StoreError> {
        let mut map = self.inner.lock();
        match map.get_mut(&header.session_id) {
            Some(s) => s.header = header.clone(),
            None => {
                map.insert(
                    header.session_id.clone(),
                    StoredSession {
                        header: header.clone(),
                        lineage: Vec::new(),
                    },
                );
            }
        }
        Ok(())
    }

    fn append_lineage(&self, id: &SessionId, record: &LineageRecord) -> Result<(), StoreError> {
        self.inner
            .lock()
            .get_mut(id)
            .ok_or_else(|| StoreError::Corrupt(format!("lineage for unknown session {id}")))?
            .lineage
            .push(record.clone());
        Ok(())
    }

    fn load(&self, id: &SessionId) -> Result<Option<StoredSession>, StoreError> {
        Ok(self.inner.lock().get(id).cloned())
    }
}

/// Directory-backed store: `<root>/<session_id>/header.json` and
/// `<root>/<session_id>/lineage.jsonl`.
#[derive(Debug)]
pub struct FileStore {
    root: PathBuf,
}

impl FileStore {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        fs::create_dir_all(root.as_ref())?;
        Ok(Self {
            root: root.as_ref().to_path_buf(),
        })
    }

    fn dir(&self, id: &SessionId) -> PathBuf {
        self.root.join(id.as_str())
    }
}

impl SessionStore for FileStore {
    fn put_header(&self, header: &SessionHeader) -> Result<(), StoreError> {
        let dir = self.dir(&header.session_id);
        fs::create_dir_all(&dir)?;
        let tmp = dir.join("header.json.tmp");
        let body = serde_json::to_vec_pretty(header).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        fs::write(&tmp, body)?;
        fs::rename(&tmp, dir.join("header.json"))?;
        Ok(())
    }

    fn append_lineage(&self, id: &SessionId, record: &LineageRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(record).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir(id).join("lineage.jsonl"))?;
        f.write_all(&line)?;
        f.sync_data()?;
        Ok(())
    }

    fn load(&self, id: &SessionId) -> Result<Option<StoredSession>, StoreError> {
        let dir = self.dir(id);
        let header_path = dir.join("header.json");
        if !header_path.exists() {
            return Ok(None);
        }
        let header: SessionHeader = serde_json::from_slice(&fs::read(header_path)?)
            .map_err(|e| StoreError::Corrupt(format!("header: {e}")))?;
        let mut lineage = Vec::new();
        let lineage_path = dir.join("lineage.jsonl");
        if lineage_path.exists() {
            for (n, line) in BufReader::new(fs::File::open(lineage_path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                lineage.push(
                    serde_json::from_str(&line)
                        .map_err(|e| StoreError::Corrupt(format!("lineage line {}: {e}", n + 1)))?,
                );
            }
        }
        Ok(Some(StoredSession { header, lineage }))
    }
}
