//! Session store and the operations behind the HTTP routes.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use belief_dialog::dialog::{AdvisorReply, DialogEngine, DialogError, DialogSession, SessionStatus};
use chrono::Utc;
use log::info;
use serde::Serialize;
use thiserror::Error;
use tokio::sync::Mutex;

use crate::journal::{Journal, JournalError, JournalRecord};

/// Longest accepted utterance, in characters.
pub const MAX_UTTERANCE_CHARS: usize = 2000;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Validation(String),
    #[error("session store unavailable: {0}")]
    Store(#[from] JournalError),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Validation(_) => "validation",
            ServiceError::Store(_) => "store",
            ServiceError::Internal(_) => "internal",
        }
    }
}

impl From<DialogError> for ServiceError {
    fn from(e: DialogError) -> Self {
        match e {
            DialogError::Completed(_) => ServiceError::Conflict(e.to_string()),
            DialogError::EmptyUtterance => ServiceError::Validation(e.to_string()),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub sessions: usize,
    pub labels: Vec<String>,
    pub journal: Option<PathBuf>,
}

type Slot = Arc<Mutex<DialogSession>>;

/// Sessions keyed by id. Turns on one session queue behind its mutex;
/// distinct sessions run concurrently.
#[derive(Debug)]
pub struct AdvisorService {
    engine: Arc<DialogEngine>,
    sessions: RwLock<HashMap<String, Slot>>,
    journal: Option<Journal>,
}

impl AdvisorService {
    /// A service whose sessions live only in memory.
    pub fn in_memory(engine: DialogEngine) -> Self {
        AdvisorService { engine: Arc::new(engine), sessions: RwLock::default(), journal: None }
    }

    /// A service backed by the journal at `path`, restoring every session
    /// recorded there.
    pub fn with_journal(engine: DialogEngine, path: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let (journal, replay) = Journal::open(path)?;
        info!("restored {} sessions from {} journal records", replay.sessions.len(), replay.records);
        let sessions = replay.sessions.into_iter().map(|(id, s)| (id, Arc::new(Mutex::new(s)))).collect();
        Ok(AdvisorService { engine: Arc::new(engine), sessions: RwLock::new(sessions), journal: Some(journal) })
    }

    pub fn engine(&self) -> &DialogEngine {
        &self.engine
    }

    fn record(&self, rec: JournalRecord) -> Result<(), ServiceError> {
        match &self.journal {
            Some(j) => Ok(j.append(&rec)?),
            None => Ok(()),
        }
    }

    fn slot(&self, id: &str) -> Result<Slot, ServiceError> {
        let map = self.sessions.read().unwrap_or_else(|p| p.into_inner());
        map.get(id).cloned().ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn create_session(&self) -> Result<DialogSession, ServiceError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = self.engine.new_session(&id);
        self.record(JournalRecord::Created { at: Utc::now(), session: session.clone() })?;
        let mut map = self.sessions.write().unwrap_or_else(|p| p.into_inner());
        map.insert(id, Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    /// Run one turn. The new state is journaled before it becomes visible,
    /// and a failed turn leaves the session untouched.
    pub async fn post_message(&self, id: &str, text: &str) -> Result<AdvisorReply, ServiceError> {
        let slot = self.slot(id)?;
        let mut current = slot.lock().await;
        if current.status == SessionStatus::Completed {
            return Err(ServiceError::Conflict(format!("session {id} is completed")));
        }
        if text.trim().is_empty() {
            return Err(ServiceError::Validation("text must not be empty".into()));
        }
        if text.chars().count() > MAX_UTTERANCE_CHARS {
            return Err(ServiceError::Validation(format!("text is longer than {MAX_UTTERANCE_CHARS} characters")));
        }
        let mut next = current.clone();
        let reply = self.engine.process_turn(&mut next, text)?;
        self.record(JournalRecord::Turn {
            at: Utc::now(),
            user: text.to_string(),
            reply: reply.reply.clone(),
            session: next.clone(),
        })?;
        *current = next;
        Ok(reply)
    }

    pub async fn get_session(&self, id: &str) -> Result<DialogSession, ServiceError> {
        let slot = self.slot(id)?;
        let s = slot.lock().await;
        Ok(s.clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let map = self.sessions.read().unwrap_or_else(|p| p.into_inner());
        let mut ids: Vec<String> = map.keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok",
            sessions: self.sessions.read().map(|m| m.len()).unwrap_or(0),
            labels: self.engine.classifier.labels().to_vec(),
            journal: self.journal.as_ref().map(|j| j.path().to_path_buf()),
        }
    }
}
