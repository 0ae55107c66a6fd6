//! File-backed session store: one JSON file per session, replaced atomically.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex as StdMutex};

use mcdm_core::ahp::DEFAULT_CR_THRESHOLD;
use mcdm_core::io::{resolve, LoadedScenario, ScenarioDocument};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Mutex;

use crate::error::ApiError;

/// On-disk form of a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionFile {
    pub id: String,
    pub version: u64,
    pub document: ScenarioDocument,
}

/// In-memory session. All access goes through the per-session mutex, so
/// mutations are serialized and readers never see a half-applied change.
pub struct Session {
    pub id: String,
    pub version: u64,
    pub document: ScenarioDocument,
    pub loaded: LoadedScenario,
    /// Ranking body for `version`, computed on first request.
    pub ranking: Option<(u64, Arc<Value>)>,
}

pub type SessionHandle = Arc<Mutex<Session>>;

pub struct Store {
    dir: PathBuf,
    cr_threshold: f64,
    sessions: StdMutex<HashMap<String, SessionHandle>>,
}

/// Session ids are generated UUIDs; anything else is rejected before it can
/// reach the file system.
fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

impl Store {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self::with_threshold(dir, DEFAULT_CR_THRESHOLD)
    }

    pub fn with_threshold(dir: impl Into<PathBuf>, cr_threshold: f64) -> Self {
        Store { dir: dir.into(), cr_threshold, sessions: StdMutex::new(HashMap::new()) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn cr_threshold(&self) -> f64 {
        self.cr_threshold
    }

    fn file(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Writes the session file via a temporary sibling and a rename.
    pub async fn persist(&self, id: &str, version: u64, document: &ScenarioDocument) -> Result<(), ApiError> {
        let file = SessionFile { id: id.to_owned(), version, document: document.clone() };
        let mut bytes = serde_json::to_vec_pretty(&file).map_err(|e| ApiError::internal(e.to_string()))?;
        bytes.push(b'\n');
        tokio::fs::create_dir_all(&self.dir).await.map_err(|e| ApiError::internal(format!("data dir: {e}")))?;
        let tmp = self.dir.join(format!(".{id}.{version}.tmp"));
        tokio::fs::write(&tmp, &bytes).await.map_err(|e| ApiError::internal(format!("write session: {e}")))?;
        tokio::fs::rename(&tmp, self.file(id)).await.map_err(|e| ApiError::internal(format!("commit session: {e}")))?;
        Ok(())
    }

    pub async fn create(&self, document: ScenarioDocument, loaded: LoadedScenario) -> Result<(String, u64), ApiError> {
        let id = uuid::Uuid::new_v4().to_string();
        self.persist(&id, 1, &document).await?;
        let session = Session { id: id.clone(), version: 1, document, loaded, ranking: None };
        self.sessions.lock().expect("session map poisoned").insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok((id, 1))
    }

    /// Looks a session up in memory, falling back to its file.
    pub async fn get(&self, id: &str) -> Result<SessionHandle, ApiError> {
        if !valid_id(id) {
            return Err(ApiError::not_found(id));
        }
        if let Some(s) = self.sessions.lock().expect("session map poisoned").get(id) {
            return Ok(s.clone());
        }
        let text = match tokio::fs::read_to_string(self.file(id)).await {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(ApiError::not_found(id)),
            Err(e) => return Err(ApiError::internal(format!("read session: {e}"))),
        };
        let file: SessionFile =
            serde_json::from_str(&text).map_err(|e| ApiError::internal(format!("corrupt session file: {e}")))?;
        let loaded = resolve(file.document.clone(), self.cr_threshold)?;
        let session = Session { id: file.id, version: file.version, document: file.document, loaded, ranking: None };
        let mut map = self.sessions.lock().expect("session map poisoned");
        Ok(map.entry(id.to_owned()).or_insert_with(|| Arc::new(Mutex::new(session))).clone())
    }
}
