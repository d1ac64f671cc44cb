//! Exploration sessions and their report jobs, cached in memory and
//! persisted as one JSON file each.
//!
//! Sessions idle longer than the configured expiry are dropped from memory
//! but stay on disk; the next request for them loads them again.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use graphy_core::exploration::Session;
use graphy_core::generation::ReportJob;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session {0:?} not found")]
    NotFound(String),
    #[error("session {id:?}: {message}")]
    Corrupt { id: String, message: String },
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

pub struct Entry {
    pub session: Session,
    pub job: Option<ReportJob>,
    last_access: Instant,
}

pub type Handle = Arc<tokio::sync::Mutex<Entry>>;

pub struct SessionStore {
    sessions_dir: PathBuf,
    jobs_dir: PathBuf,
    idle: Duration,
    live: Mutex<HashMap<String, Handle>>,
}

/// Ids are generated server-side; anything else is rejected before it can
/// reach the filesystem.
fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut file = std::fs::File::create(&tmp)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    std::fs::rename(&tmp, path)
}

impl SessionStore {
    pub fn open(sessions_dir: PathBuf, jobs_dir: PathBuf, idle: Duration) -> std::io::Result<Self> {
        std::fs::create_dir_all(&sessions_dir)?;
        std::fs::create_dir_all(&jobs_dir)?;
        Ok(SessionStore {
            sessions_dir,
            jobs_dir,
            idle,
            live: Mutex::new(HashMap::new()),
        })
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.sessions_dir.join(format!("{id}.json"))
    }

    fn job_path(&self, id: &str) -> PathBuf {
        self.jobs_dir.join(format!("{id}.json"))
    }

    pub fn create(&self) -> Result<Handle, SessionError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let entry = Entry {
            session: Session::new(id.clone()),
            job: None,
            last_access: Instant::now(),
        };
        self.persist(&entry)?;
        let handle = Arc::new(tokio::sync::Mutex::new(entry));
        self.live.lock().expect("session map poisoned").insert(id, handle.clone());
        Ok(handle)
    }

    pub fn get(&self, id: &str) -> Result<Handle, SessionError> {
        if !valid_id(id) {
            return Err(SessionError::NotFound(id.to_string()));
        }
        let mut live = self.live.lock().expect("session map poisoned");
        if let Some(handle) = live.get(id) {
            return Ok(handle.clone());
        }
        let entry = self.load(id)?;
        let handle = Arc::new(tokio::sync::Mutex::new(entry));
        live.insert(id.to_string(), handle.clone());
        Ok(handle)
    }

    fn load(&self, id: &str) -> Result<Entry, SessionError> {
        let corrupt = |e: serde_json::Error| SessionError::Corrupt {
            id: id.to_string(),
            message: e.to_string(),
        };
        let text = match std::fs::read(self.session_path(id)) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(SessionError::NotFound(id.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        let session: Session = serde_json::from_slice(&text).map_err(corrupt)?;
        let job = match std::fs::read(self.job_path(id)) {
            Ok(text) => Some(serde_json::from_slice(&text).map_err(corrupt)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        Ok(Entry {
            session,
            job,
            last_access: Instant::now(),
        })
    }

    pub fn persist(&self, entry: &Entry) -> Result<(), SessionError> {
        let id = &entry.session.id;
        let session = serde_json::to_vec_pretty(&entry.session).expect("session serializes");
        write_atomic(&self.session_path(id), &session)?;
        match &entry.job {
            Some(job) => {
                let job = serde_json::to_vec_pretty(job).expect("job serializes");
                write_atomic(&self.job_path(id), &job)?;
            }
            None => match std::fs::remove_file(self.job_path(id)) {
                Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e.into()),
                _ => {}
            },
        }
        Ok(())
    }

    /// Writes every in-memory session that is not currently in use.
    pub fn persist_all(&self) -> Result<usize, SessionError> {
        let handles: Vec<Handle> = self.live.lock().expect("session map poisoned").values().cloned().collect();
        let mut written = 0;
        for handle in handles {
            if let Ok(entry) = handle.try_lock() {
                self.persist(&entry)?;
                written += 1;
            }
        }
        Ok(written)
    }

    /// Drops idle sessions from memory; returns how many were dropped.
    pub fn evict_idle(&self) -> usize {
        let mut live = self.live.lock().expect("session map poisoned");
        let before = live.len();
        live.retain(|_, handle| match handle.try_lock() {
            Ok(entry) => entry.last_access.elapsed() < self.idle,
            Err(_) => true,
        });
        before - live.len()
    }

    pub fn live_count(&self) -> usize {
        self.live.lock().expect("session map poisoned").len()
    }
}

impl Entry {
    pub fn touch(&mut self) {
        self.last_access = Instant::now();
    }
}
