//! Append-only journal and content-addressed blobs.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{sha256_hex, GridError, TaskState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum JournalEvent {
    Submit {
        id: String,
        document: String,
        device_profile: String,
        strategy: String,
        submitted: u64,
    },
    State {
        id: String,
        state: TaskState,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slot: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        build_seconds: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        run_seconds: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        failure: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        result: Option<String>,
    },
    Requeue {
        id: String,
    },
}

pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    pub fn open(path: &Path) -> Result<Self, GridError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Journal { path: path.to_path_buf(), file })
    }

    pub fn append(&mut self, event: &JournalEvent) -> Result<(), GridError> {
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }

    /// All events in write order. A torn final line from a crash is
    /// ignored; corruption elsewhere is an error.
    pub fn replay(&self) -> Result<Vec<JournalEvent>, GridError> {
        let text = fs::read_to_string(&self.path)?;
        let lines: Vec<&str> = text.lines().collect();
        let mut out = Vec::with_capacity(lines.len());
        for (i, l) in lines.iter().enumerate() {
            if l.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(l) {
                Ok(e) => out.push(e),
                Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => break,
                Err(e) => return Err(GridError::Journal { line: i + 1, message: e.to_string() }),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
}

impl BlobStore {
    pub fn open(root: &Path) -> Result<Self, GridError> {
        fs::create_dir_all(root)?;
        Ok(BlobStore { root: root.to_path_buf() })
    }

    pub fn path(&self, address: &str) -> PathBuf {
        self.root.join(address)
    }

    /// Stores `bytes` under their SHA-256 and returns the address.
    pub fn put(&self, bytes: &[u8]) -> Result<String, GridError> {
        let address = sha256_hex(bytes);
        let path = self.path(&address);
        if !path.exists() {
            let tmp = self.root.join(format!(".{address}.tmp"));
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, &path)?;
        }
        Ok(address)
    }

    pub fn get(&self, address: &str) -> Result<Vec<u8>, GridError> {
        Ok(fs::read(self.path(address))?)
    }
}
