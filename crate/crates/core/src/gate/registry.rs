use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::types::{UintDecimal, UnixSeconds};

/// Journal line: one consumed authorization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct JournalEntry {
    pub subject_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonce: Option<UintDecimal>,
    pub pdr_id: String,
    pub ts: UnixSeconds,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("registry journal line {line} is corrupt: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Default)]
struct State {
    pairs: HashSet<(String, String)>,
    pdr_ids: HashSet<String>,
    journal: Option<File>,
}

impl State {
    fn seen(&self, subject_key: &str, nonce: Option<&UintDecimal>, pdr_id: &str) -> bool {
        self.pdr_ids.contains(pdr_id)
            || nonce.is_some_and(|n| self.pairs.contains(&(subject_key.to_owned(), n.as_str().to_owned())))
    }

    fn insert(&mut self, e: &JournalEntry) {
        self.pdr_ids.insert(e.pdr_id.clone());
        if let Some(n) = &e.nonce {
            self.pairs.insert((e.subject_key.clone(), n.as_str().to_owned()));
        }
    }
}

/// Consumed `pdrId`s and `(subjectKey, nonce)` pairs.
///
/// All mutation goes through [`NonceRegistry::consume`], which is atomic
/// under a single lock. With a journal, an entry is durable before it is
/// visible, and the journal file stays exclusively locked for the lifetime of
/// the registry so separate processes serialize.
#[derive(Default)]
pub struct NonceRegistry {
    state: Mutex<State>,
}

impl std::fmt::Debug for NonceRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = self.lock();
        f.debug_struct("NonceRegistry")
            .field("pdr_ids", &s.pdr_ids.len())
            .field("pairs", &s.pairs.len())
            .field("journaled", &s.journal.is_some())
            .finish()
    }
}

impl NonceRegistry {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (creating if needed) a journal and replay it. A torn final line,
    /// left by a crash mid-append, is ignored.
    pub fn open(path: &Path) -> Result<Self, RegistryError> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        file.lock()?;
        let mut state = State::default();
        let mut text = String::new();
        io::Read::read_to_string(&mut file, &mut text)?;
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<JournalEntry>(line) {
                Ok(e) => state.insert(&e),
                Err(_) if i + 1 == lines.len() && !complete => {
                    // Cut the torn line so the next append starts cleanly.
                    let keep = text.rfind('\n').map_or(0, |n| n + 1);
                    file.set_len(keep as u64)?;
                }
                Err(e) => {
                    return Err(RegistryError::Corrupt {
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
        state.journal = Some(file);
        Ok(NonceRegistry {
            state: Mutex::new(state),
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        // A panic mid-consume cannot leave a half-applied entry, so the data
        // is still consistent after poisoning.
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn is_consumed(&self, subject_key: &str, nonce: Option<&UintDecimal>, pdr_id: &str) -> bool {
        self.lock().seen(subject_key, nonce, pdr_id)
    }

    pub fn contains_pdr(&self, pdr_id: &str) -> bool {
        self.lock().pdr_ids.contains(pdr_id)
    }

    pub fn contains_nonce(&self, subject_key: &str, nonce: &UintDecimal) -> bool {
        self.lock()
            .pairs
            .contains(&(subject_key.to_owned(), nonce.as_str().to_owned()))
    }

    /// Total consumed entries (pdrIds plus nonce pairs).
    pub fn len(&self) -> usize {
        let s = self.lock();
        s.pdr_ids.len() + s.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mark an authorization used. `Ok(true)` iff neither the `pdrId` nor the
    /// `(subjectKey, nonce)` pair was seen before; `Ok(false)` changes nothing.
    /// A journal write failure also changes nothing.
    pub fn consume(
        &self,
        subject_key: &str,
        nonce: Option<&UintDecimal>,
        pdr_id: &str,
        ts: UnixSeconds,
    ) -> io::Result<bool> {
        let mut s = self.lock();
        if s.seen(subject_key, nonce, pdr_id) {
            return Ok(false);
        }
        let entry = JournalEntry {
            subject_key: subject_key.to_owned(),
            nonce: nonce.cloned(),
            pdr_id: pdr_id.to_owned(),
            ts,
        };
        if let Some(f) = s.journal.as_mut() {
            let mut line = serde_json::to_vec(&entry).map_err(io::Error::other)?;
            line.push(b'\n');
            f.write_all(&line)?;
            f.sync_data()?;
        }
        s.insert(&entry);
        Ok(true)
    }
}
