use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, TimeDelta, Utc};
use fulfil_lm::{AnswerKind, TokenUsage};
use serde::{Deserialize, Serialize};
use tracing::warn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    InDomain,
    OutOfDomain,
}

/// One chat turn as it appears in a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionLogEntry {
    /// Position in the session, from 0.
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub query: String,
    pub route: Route,
    pub kind: AnswerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<String>,
    pub logs: Vec<String>,
    pub usage: TokenUsage,
    pub latency_ms: u64,
    pub plan_version_before: u64,
    pub plan_version_after: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub entries: Vec<InteractionLogEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("invalid session id {0:?}: use 1 to 64 letters, digits, '-' or '_'")]
    BadId(String),
    #[error("session log {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("session log {path}, line {line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

pub fn valid_session_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// In-memory sessions, optionally mirrored to one JSONL file per session.
#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Session>>,
    log_dir: Option<PathBuf>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Persists to `dir`, first reloading any session files already there.
    pub fn persistent(dir: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let dir = dir.into();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SessionError::Io { path, source }
        };
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        let mut sessions = HashMap::new();
        for item in std::fs::read_dir(&dir).map_err(io(&dir))? {
            let path = item.map_err(io(&dir))?.path();
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            if path.extension().is_none_or(|e| e != "jsonl") || !valid_session_id(id) {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(io(&path))?;
            let entries = text
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    serde_json::from_str(l).map_err(|source| SessionError::Parse {
                        path: path.clone(),
                        line: i + 1,
                        source,
                    })
                })
                .collect::<Result<Vec<InteractionLogEntry>, _>>()?;
            let Some(first) = entries.first() else { continue };
            sessions.insert(
                id.to_string(),
                Session {
                    session_id: id.to_string(),
                    created_at: first.timestamp,
                    entries,
                },
            );
        }
        Ok(SessionStore {
            sessions: Mutex::new(sessions),
            log_dir: Some(dir),
        })
    }

    pub fn new_id() -> String {
        uuid::Uuid::new_v4().simple().to_string()
    }

    /// Appends a turn, creating the session if needed. `seq` and `timestamp`
    /// are assigned here so entries stay strictly ordered within a session.
    pub fn append(&self, session_id: &str, mut entry: InteractionLogEntry) -> InteractionLogEntry {
        let mut sessions = self.sessions.lock().unwrap();
        let now = Utc::now();
        let session = sessions.entry(session_id.to_string()).or_insert_with(|| Session {
            session_id: session_id.to_string(),
            created_at: now,
            entries: Vec::new(),
        });
        entry.seq = session.entries.len() as u64;
        entry.timestamp = match session.entries.last() {
            Some(last) if last.timestamp >= now => last.timestamp + TimeDelta::microseconds(1),
            _ => now,
        };
        if let Some(dir) = &self.log_dir {
            let path = dir.join(format!("{session_id}.jsonl"));
            let line = serde_json::to_string(&entry).expect("log entry serializes");
            let written = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .and_then(|mut f| writeln!(f, "{line}"));
            if let Err(e) = written {
                warn!(path = %path.display(), error = %e, "could not persist log entry");
            }
        }
        session.entries.push(entry.clone());
        entry
    }

    pub fn entries(&self, session_id: &str) -> Option<Vec<InteractionLogEntry>> {
        self.sessions.lock().unwrap().get(session_id).map(|s| s.entries.clone())
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
