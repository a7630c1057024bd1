//! Append-only newline-delimited JSON journal. Every record carries a full
//! session snapshot, so replay keeps the last record per session id.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use belief_dialog::dialog::DialogSession;
use chrono::{DateTime, Utc};
use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("journal {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("journal {path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("journal record: {0}")]
    Encode(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JournalRecord {
    Created {
        at: DateTime<Utc>,
        session: DialogSession,
    },
    Turn {
        at: DateTime<Utc>,
        user: String,
        reply: String,
        session: DialogSession,
    },
}

impl JournalRecord {
    pub fn session(&self) -> &DialogSession {
        match self {
            JournalRecord::Created { session, .. } | JournalRecord::Turn { session, .. } => session,
        }
    }

    pub fn into_session(self) -> DialogSession {
        match self {
            JournalRecord::Created { session, .. } | JournalRecord::Turn { session, .. } => session,
        }
    }
}

#[derive(Debug, Default)]
pub struct Replay {
    pub sessions: BTreeMap<String, DialogSession>,
    pub records: usize,
    /// Byte length of the intact prefix. A crash mid-append can leave a
    /// partial final line, which replay drops.
    pub valid_len: u64,
    pub torn_tail: bool,
}

/// Read a journal. A missing file is an empty journal. An unparsable line
/// is an error unless it is an unterminated final line.
pub fn replay(path: &Path) -> Result<Replay, JournalError> {
    let io = |source| JournalError::Io { path: path.into(), source };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Replay::default()),
        Err(e) => return Err(io(e)),
    };
    let mut reader = BufReader::new(file);
    let mut out = Replay::default();
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(io)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let terminated = buf.ends_with('\n');
        let body = buf.trim();
        if body.is_empty() {
            if terminated {
                out.valid_len += n as u64;
            }
            continue;
        }
        match serde_json::from_str::<JournalRecord>(body) {
            Ok(rec) if terminated => {
                let s = rec.into_session();
                out.sessions.insert(s.id.clone(), s);
                out.records += 1;
                out.valid_len += n as u64;
            }
            Ok(_) => {
                out.torn_tail = true;
                break;
            }
            Err(e) => {
                if !terminated {
                    out.torn_tail = true;
                    break;
                }
                return Err(JournalError::Corrupt { path: path.into(), line: line_no, message: e.to_string() });
            }
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: Mutex<File>,
}

impl Journal {
    /// Replay `path`, drop any torn tail, and open it for appending.
    pub fn open(path: impl Into<PathBuf>) -> Result<(Journal, Replay), JournalError> {
        let path = path.into();
        let io = |source| JournalError::Io { path: path.clone(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let state = replay(&path)?;
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        if state.torn_tail {
            warn!("journal {}: dropping a partial final record", path.display());
            file.set_len(state.valid_len).map_err(io)?;
        }
        Ok((Journal { path, file: Mutex::new(file) }, state))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Write one record and flush it to disk before returning.
    pub fn append(&self, record: &JournalRecord) -> Result<(), JournalError> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let io = |source| JournalError::Io { path: self.path.clone(), source };
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(line.as_bytes()).map_err(io)?;
        file.sync_data().map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use belief_dialog::bundled;

    fn session(id: &str) -> DialogSession {
        DialogSession::new(id, &bundled::fsm().unwrap())
    }

    #[test]
    fn last_record_per_session_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.ndjson");
        let (j, r) = Journal::open(&path).unwrap();
        assert!(r.sessions.is_empty());
        j.append(&JournalRecord::Created { at: Utc::now(), session: session("a") }).unwrap();
        let mut later = session("a");
        later.turns = 3;
        j.append(&JournalRecord::Turn { at: Utc::now(), user: "u".into(), reply: "r".into(), session: later.clone() }).unwrap();
        j.append(&JournalRecord::Created { at: Utc::now(), session: session("b") }).unwrap();
        let r = replay(&path).unwrap();
        assert_eq!(r.records, 3);
        assert_eq!(r.sessions["a"], later);
        assert_eq!(r.sessions.len(), 2);
    }

    #[test]
    fn torn_tail_is_dropped_but_corruption_is_not() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.ndjson");
        let (j, _) = Journal::open(&path).unwrap();
        j.append(&JournalRecord::Created { at: Utc::now(), session: session("a") }).unwrap();
        drop(j);
        let good = std::fs::read(&path).unwrap();
        std::fs::write(&path, [good.as_slice(), b"{\"event\":\"turn\",\"at\""].concat()).unwrap();
        let (j, r) = Journal::open(&path).unwrap();
        assert!(r.torn_tail);
        assert_eq!(r.sessions.len(), 1);
        assert_eq!(std::fs::read(&path).unwrap(), good);
        j.append(&JournalRecord::Created { at: Utc::now(), session: session("b") }).unwrap();
        assert_eq!(replay(&path).unwrap().sessions.len(), 2);

        std::fs::write(&path, [b"garbage\n".as_slice(), &good].concat()).unwrap();
        assert!(matches!(replay(&path), Err(JournalError::Corrupt { line: 1, .. })));
    }
}
