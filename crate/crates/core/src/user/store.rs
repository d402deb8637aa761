use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::UserModel;

const RECORD_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("user {0} already has an active session")]
    SessionConflict(String),
    #[error("user store unavailable: {0}")]
    StorageUnavailable(String),
    #[error("invalid user id {0:?}")]
    InvalidUserId(String),
}

impl StoreError {
    fn io(context: &str, path: &Path, err: io::Error) -> Self {
        StoreError::StorageUnavailable(format!("{context} {}: {err}", path.display()))
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("malformed user record: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported user record format {0}")]
    UnsupportedFormat(u32),
}

#[derive(Serialize)]
struct RecordOut<'a> {
    format: u32,
    model: &'a UserModel,
}

#[derive(Deserialize)]
struct RecordIn {
    format: u32,
    model: serde_json::Value,
}

/// Serializes a model into the on-disk record format.
pub fn encode_record(model: &UserModel) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&RecordOut {
        format: RECORD_FORMAT,
        model,
    })
    .expect("user model serializes");
    bytes.push(b'\n');
    bytes
}

/// Parses an on-disk record.
pub fn decode_record(bytes: &[u8]) -> Result<UserModel, RecordError> {
    let record: RecordIn = serde_json::from_slice(bytes)?;
    if record.format != RECORD_FORMAT {
        return Err(RecordError::UnsupportedFormat(record.format));
    }
    Ok(serde_json::from_value(record.model)?)
}

/// Tracks which user ids currently have an open conversation.
#[derive(Debug, Default)]
struct LeaseTable {
    active: Mutex<HashSet<String>>,
}

impl LeaseTable {
    fn acquire(self: &Arc<Self>, user_id: &str) -> Result<UserLease, StoreError> {
        let mut active = self.active.lock().unwrap_or_else(|p| p.into_inner());
        if !active.insert(user_id.to_string()) {
            return Err(StoreError::SessionConflict(user_id.to_string()));
        }
        Ok(UserLease {
            table: Arc::clone(self),
            user_id: user_id.to_string(),
        })
    }
}

/// Exclusive claim on a user id; released on drop.
#[derive(Debug)]
pub struct UserLease {
    table: Arc<LeaseTable>,
    user_id: String,
}

impl UserLease {
    pub fn user_id(&self) -> &str {
        &self.user_id
    }
}

impl Drop for UserLease {
    fn drop(&mut self) {
        let mut active = self.table.active.lock().unwrap_or_else(|p| p.into_inner());
        active.remove(&self.user_id);
    }
}

/// Persistent key-value storage of user models.
///
/// A conversation holds a [`UserLease`] for its whole lifetime so that two
/// sessions can never read-modify-write the same record.
pub trait UserStore: Send + Sync {
    /// Loads a model; unknown ids yield a fresh model.
    fn load(&self, user_id: &str) -> Result<UserModel, StoreError>;
    fn save(&self, model: &UserModel) -> Result<(), StoreError>;
    fn acquire(&self, user_id: &str) -> Result<UserLease, StoreError>;
}

/// One JSON record file per user.
#[derive(Debug)]
pub struct FileUserStore {
    dir: PathBuf,
    leases: Arc<LeaseTable>,
}

impl FileUserStore {
    /// Opens (creating if needed) a store rooted at `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| StoreError::io("cannot create", &dir, e))?;
        Ok(Self {
            dir,
            leases: Arc::default(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path of the record for `user_id`.
    pub fn record_path(&self, user_id: &str) -> Result<PathBuf, StoreError> {
        Ok(self.dir.join(format!("{}.json", file_stem(user_id)?)))
    }

    fn quarantine(&self, path: &Path, user_id: &str, reason: &RecordError) {
        let target = path.with_extension(format!(
            "json.{}.corrupt",
            chrono::Utc::now().format("%Y%m%dT%H%M%S%.f")
        ));
        match fs::rename(path, &target) {
            Ok(()) => tracing::warn!(
                user_id,
                quarantined = %target.display(),
                "corrupt user record: {reason}"
            ),
            Err(err) => tracing::warn!(user_id, "corrupt user record: {reason}; quarantine failed: {err}"),
        }
    }
}

impl UserStore for FileUserStore {
    fn load(&self, user_id: &str) -> Result<UserModel, StoreError> {
        let path = self.record_path(user_id)?;
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(err) if err.kind() == io::ErrorKind::NotFound => {
                return Ok(UserModel::new(user_id))
            }
            Err(err) => return Err(StoreError::io("cannot read", &path, err)),
        };
        match decode_record(&bytes) {
            Ok(model) if model.user_id == user_id => Ok(model),
            Ok(model) => {
                let reason = RecordError::Malformed(serde::de::Error::custom(format!(
                    "record belongs to {:?}",
                    model.user_id
                )));
                self.quarantine(&path, user_id, &reason);
                Ok(UserModel::new(user_id))
            }
            Err(reason) => {
                self.quarantine(&path, user_id, &reason);
                Ok(UserModel::new(user_id))
            }
        }
    }

    fn save(&self, model: &UserModel) -> Result<(), StoreError> {
        let path = self.record_path(&model.user_id)?;
        let tmp = path.with_extension("json.tmp");
        let write = || -> io::Result<()> {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(&encode_record(model))?;
            file.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| StoreError::io("cannot write", &path, e))
    }

    fn acquire(&self, user_id: &str) -> Result<UserLease, StoreError> {
        file_stem(user_id)?;
        self.leases.acquire(user_id)
    }
}

/// Maps a user id onto a portable file stem. Ids made of ASCII letters,
/// digits, `-` and `_` are used as-is; any other byte becomes `~xx`.
fn file_stem(user_id: &str) -> Result<String, StoreError> {
    if user_id.is_empty() {
        return Err(StoreError::InvalidUserId(user_id.to_string()));
    }
    let mut out = String::with_capacity(user_id.len());
    for byte in user_id.bytes() {
        if byte.is_ascii_alphanumeric() || byte == b'-' || byte == b'_' {
            out.push(byte as char);
        } else {
            let _ = write!(out, "~{byte:02x}");
        }
    }
    Ok(out)
}

/// In-process store for tests and simulations.
#[derive(Debug)]
pub struct MemoryUserStore {
    records: Mutex<HashMap<String, UserModel>>,
    available: AtomicBool,
    leases: Arc<LeaseTable>,
}

impl Default for MemoryUserStore {
    fn default() -> Self {
        Self {
            records: Mutex::default(),
            available: AtomicBool::new(true),
            leases: Arc::default(),
        }
    }
}

impl MemoryUserStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Simulates an outage: while unavailable every operation fails.
    pub fn set_available(&self, available: bool) {
        self.available.store(available, Ordering::SeqCst);
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self) -> Result<(), StoreError> {
        if self.available.load(Ordering::SeqCst) {
            Ok(())
        } else {
            Err(StoreError::StorageUnavailable("memory store offline".into()))
        }
    }
}

impl UserStore for MemoryUserStore {
    fn load(&self, user_id: &str) -> Result<UserModel, StoreError> {
        self.check()?;
        let records = self.records.lock().unwrap_or_else(|p| p.into_inner());
        Ok(records
            .get(user_id)
            .cloned()
            .unwrap_or_else(|| UserModel::new(user_id)))
    }

    fn save(&self, model: &UserModel) -> Result<(), StoreError> {
        self.check()?;
        let mut records = self.records.lock().unwrap_or_else(|p| p.into_inner());
        records.insert(model.user_id.clone(), model.clone());
        Ok(())
    }

    fn acquire(&self, user_id: &str) -> Result<UserLease, StoreError> {
        self.check()?;
        if user_id.is_empty() {
            return Err(StoreError::InvalidUserId(user_id.to_string()));
        }
        self.leases.acquire(user_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_stems_are_safe() {
        assert_eq!(file_stem("u-1_a").unwrap(), "u-1_a");
        assert_eq!(file_stem("../x").unwrap(), "~2e~2e~2fx");
        assert!(file_stem("").is_err());
    }

    #[test]
    fn lease_is_exclusive_until_dropped() {
        let store = MemoryUserStore::new();
        let lease = store.acquire("u1").unwrap();
        assert!(matches!(
            store.acquire("u1"),
            Err(StoreError::SessionConflict(_))
        ));
        assert!(store.acquire("u2").is_ok());
        drop(lease);
        assert!(store.acquire("u1").is_ok());
    }

    #[test]
    fn record_format_is_checked() {
        let model = UserModel::new("u");
        let bytes = encode_record(&model);
        assert_eq!(decode_record(&bytes).unwrap(), model);
        let future = br#"{"format":9,"model":{}}"#;
        assert!(matches!(
            decode_record(future),
            Err(RecordError::UnsupportedFormat(9))
        ));
    }

    #[test]
    fn offline_memory_store_fails() {
        let store = MemoryUserStore::new();
        store.set_available(false);
        assert!(matches!(
            store.load("u"),
            Err(StoreError::StorageUnavailable(_))
        ));
        assert!(store.acquire("u").is_err());
    }
}
