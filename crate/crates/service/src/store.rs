//! In-memory sessions with an optional JSONL write-ahead log.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use layoutforge_core::scene::TaskSpec;
use layoutforge_core::session::{HistoryEntry, LogEvent, Session};
use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::sync::{Mutex, RwLock};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("log {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("log {path}, line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

pub type SessionHandle = Arc<Mutex<Session>>;

pub struct Store {
    sessions: RwLock<HashMap<String, SessionHandle>>,
    log: Option<(PathBuf, Mutex<tokio::fs::File>)>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            sessions: RwLock::new(HashMap::new()),
            log: None,
        }
    }

    /// Replays `path` if it exists, then appends new events to it.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let io = |source| StoreError::Io { path: path.to_path_buf(), source };
        let sessions = if path.exists() { replay(path)? } else { HashMap::new() };
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok(Self {
            sessions: RwLock::new(sessions.into_iter().map(|(k, s)| (k, Arc::new(Mutex::new(s)))).collect()),
            log: Some((path.to_path_buf(), Mutex::new(tokio::fs::File::from_std(file)))),
        })
    }

    pub async fn len(&self) -> usize {
        self.sessions.read().await.len()
    }

    pub async fn create(&self, session_id: String, task: TaskSpec) -> Result<(), StoreError> {
        self.write(&LogEvent::Create {
            session_id: session_id.clone(),
            task: task.clone(),
        })
        .await?;
        let session = Session::new(session_id.clone(), task);
        self.sessions.write().await.insert(session_id, Arc::new(Mutex::new(session)));
        Ok(())
    }

    pub async fn get(&self, session_id: &str) -> Option<SessionHandle> {
        self.sessions.read().await.get(session_id).cloned()
    }

    /// Logs, then applies. The caller holds the session lock.
    pub async fn append(&self, session: &mut Session, entry: HistoryEntry) -> Result<(), StoreError> {
        self.write(&LogEvent::Append {
            session_id: session.session_id.clone(),
            entry: entry.clone(),
        })
        .await?;
        session.history.push(entry);
        Ok(())
    }

    async fn write(&self, event: &LogEvent) -> Result<(), StoreError> {
        let Some((path, file)) = &self.log else { return Ok(()) };
        let mut line = serde_json::to_string(event).expect("log events serialize");
        line.push('\n');
        let mut f = file.lock().await;
        let io = |source| StoreError::Io { path: path.clone(), source };
        f.write_all(line.as_bytes()).await.map_err(io)?;
        f.flush().await.map_err(io)?;
        f.sync_data().await.map_err(io)
    }
}

/// A torn final line (crash mid-write) is dropped; anything else malformed is an error.
fn replay(path: &Path) -> Result<HashMap<String, Session>, StoreError> {
    let io = |source| StoreError::Io { path: path.to_path_buf(), source };
    let lines: Vec<String> = BufReader::new(std::fs::File::open(path).map_err(io)?)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(io)?;
    let mut sessions = HashMap::new();
    let corrupt = |line: usize, message: String| StoreError::Corrupt { path: path.to_path_buf(), line, message };
    for (i, text) in lines.iter().enumerate() {
        if text.trim().is_empty() {
            continue;
        }
        let event: LogEvent = match serde_json::from_str(text) {
            Ok(e) => e,
            Err(e) if i + 1 == lines.len() => {
                tracing::warn!(line = i + 1, error = %e, "dropping torn final log line");
                break;
            }
            Err(e) => return Err(corrupt(i + 1, e.to_string())),
        };
        match event {
            LogEvent::Create { session_id, task } => {
                if sessions.contains_key(&session_id) {
                    return Err(corrupt(i + 1, format!("session {session_id} created twice")));
                }
                sessions.insert(session_id.clone(), Session::new(session_id, task));
            }
            LogEvent::Append { session_id, entry } => match sessions.get_mut(&session_id) {
                Some(s) => s.history.push(entry),
                None => return Err(corrupt(i + 1, format!("append to unknown session {session_id}"))),
            },
        }
    }
    Ok(sessions)
}
