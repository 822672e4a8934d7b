//! Session persistence: one JSON document per session, replaced atomically.
//! Reads go through a cloned snapshot; writers for one id are serialized.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use bomuse_core::{Session, SessionConfig, SessionData};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("session '{0}' already exists")]
    Exists(String),
    #[error("no session '{0}'")]
    NotFound(String),
    #[error("invalid session id '{0}': use 1-64 letters, digits, '-' or '_'")]
    BadId(String),
    #[error("storage failure: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Waiting for the live human's point.
    AwaitingHuman,
    /// Ready to run the next batch.
    AwaitingAdvance,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub config: SessionConfig,
    pub data: SessionData,
    pub phase: Phase,
    /// Point posted by the live human for the next batch.
    pub pending_human: Option<Vec<f64>>,
    pub created_ms: u64,
    pub updated_ms: u64,
}

impl SessionState {
    pub fn new(id: String, session: &Session) -> Self {
        let now = now_ms();
        let mut state = Self {
            id,
            config: session.config().clone(),
            data: session.data().clone(),
            phase: Phase::AwaitingAdvance,
            pending_human: None,
            created_ms: now,
            updated_ms: now,
        };
        state.phase = state.phase_for(session);
        state
    }

    pub fn phase_for(&self, session: &Session) -> Phase {
        if session.is_finished() {
            Phase::Finished
        } else if session.awaits_live_human() && self.pending_human.is_none() {
            Phase::AwaitingHuman
        } else {
            Phase::AwaitingAdvance
        }
    }

    pub fn session(&self) -> bomuse_core::Result<Session> {
        Session::restore(self.config.clone(), self.data.clone())
    }

    pub fn touch(&mut self) {
        self.updated_ms = now_ms().max(self.updated_ms);
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

pub struct Slot {
    /// Held for the whole read-modify-write of one session.
    pub writer: Mutex<()>,
    snapshot: RwLock<Arc<SessionState>>,
}

impl Slot {
    pub fn snapshot(&self) -> Arc<SessionState> {
        self.snapshot.read().expect("snapshot lock").clone()
    }
}

pub struct Store {
    dir: Option<PathBuf>,
    slots: RwLock<HashMap<String, Arc<Slot>>>,
}

pub fn valid_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl Store {
    pub fn in_memory() -> Self {
        Self { dir: None, slots: RwLock::new(HashMap::new()) }
    }

    /// Opens (creating if needed) a directory store and loads every session in it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| StoreError::Io(format!("{}: {e}", dir.display())))?;
        let mut slots = HashMap::new();
        let entries = fs::read_dir(&dir).map_err(|e| StoreError::Io(e.to_string()))?;
        for entry in entries {
            let path = entry.map_err(|e| StoreError::Io(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))?;
            let state: SessionState = serde_json::from_slice(&bytes)
                .map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))?;
            tracing::info!(id = %state.id, "loaded session");
            slots.insert(state.id.clone(), Arc::new(Slot { writer: Mutex::new(()), snapshot: RwLock::new(Arc::new(state)) }));
        }
        Ok(Self { dir: Some(dir), slots: RwLock::new(slots) })
    }

    pub fn path_for(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    pub fn get(&self, id: &str) -> Result<Arc<Slot>, StoreError> {
        self.slots.read().expect("store lock").get(id).cloned().ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.slots.read().expect("store lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.slots.read().expect("store lock").contains_key(id)
    }

    /// Persists and registers a new session; fails if the id is taken.
    pub fn insert(&self, state: SessionState) -> Result<Arc<SessionState>, StoreError> {
        if !valid_id(&state.id) {
            return Err(StoreError::BadId(state.id));
        }
        let mut slots = self.slots.write().expect("store lock");
        if slots.contains_key(&state.id) {
            return Err(StoreError::Exists(state.id));
        }
        self.write_file(&state)?;
        let state = Arc::new(state);
        slots.insert(state.id.clone(), Arc::new(Slot { writer: Mutex::new(()), snapshot: RwLock::new(state.clone()) }));
        Ok(state)
    }

    /// Persists then publishes a new state. Callers hold `slot.writer`.
    pub fn commit(&self, slot: &Slot, state: SessionState) -> Result<Arc<SessionState>, StoreError> {
        self.write_file(&state)?;
        let state = Arc::new(state);
        *slot.snapshot.write().expect("snapshot lock") = state.clone();
        Ok(state)
    }

    fn write_file(&self, state: &SessionState) -> Result<(), StoreError> {
        let Some(path) = self.path_for(&state.id) else { return Ok(()) };
        let bytes = serde_json::to_vec_pretty(state).map_err(|e| StoreError::Io(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, &bytes)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bomuse_core::{Mode, SessionConfig};

    fn state(id: &str) -> SessionState {
        let config = SessionConfig::for_benchmark("matyas", Mode::HumanOnly, 2, 1, 0).unwrap();
        SessionState::new(id.into(), &Session::new(config).unwrap())
    }

    #[test]
    fn ids_are_path_safe() {
        assert!(valid_id("a-b_C9"));
        assert!(valid_id(&"x".repeat(64)));
        for bad in ["", "../x", "a/b", "a.json", "sp ace", &"x".repeat(65)] {
            assert!(!valid_id(bad), "{bad:?}");
        }
    }

    #[test]
    fn duplicate_and_missing_ids() {
        let store = Store::in_memory();
        store.insert(state("one")).unwrap();
        assert!(matches!(store.insert(state("one")), Err(StoreError::Exists(_))));
        assert!(matches!(store.get("two"), Err(StoreError::NotFound(_))));
        assert!(matches!(store.insert(state("a/b")), Err(StoreError::BadId(_))));
    }

    #[test]
    fn reopened_store_sees_committed_state() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let slot_state = store.insert(state("kept")).unwrap();
        let mut next = (*slot_state).clone();
        next.pending_human = Some(vec![1.0, 2.0]);
        store.commit(&store.get("kept").unwrap(), next.clone()).unwrap();
        assert!(!dir.path().join("kept.json.tmp").exists());

        let again = Store::open(dir.path()).unwrap();
        assert_eq!(again.ids(), vec!["kept".to_string()]);
        assert_eq!(again.get("kept").unwrap().snapshot().pending_human, next.pending_human);
    }
}
