//! On-disk session layout:
//!
//! ```text
//! <session-dir>/<id>/session.json      creation request
//! <session-dir>/<id>/audit.log         one line per acknowledged answer
//! <session-dir>/<id>/rounds/<r>.json   classifier installed at round r
//! ```
//!
//! Answers are appended and synced before they are applied, so replaying the
//! log over the saved classifiers reconstructs every acknowledged state.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use alpf_core::engine::{read_audit, write_audit, write_audit_line, AuditEntry};
use alpf_core::Classifier;
use serde::{Deserialize, Serialize};

use crate::api::CreateSession;

pub const SESSION_FILE: &str = "session.json";
pub const AUDIT_FILE: &str = "audit.log";
pub const ROUNDS_DIR: &str = "rounds";

#[derive(Serialize, Deserialize)]
struct SessionRecord {
    format_version: u32,
    id: String,
    request: CreateSession,
}

const FORMAT_VERSION: u32 = 1;

pub(crate) struct SessionDir {
    path: PathBuf,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        // Persist the rename itself.
        File::open(parent)?.sync_all()?;
    }
    Ok(())
}

impl SessionDir {
    pub fn create(root: &Path, id: &str, request: &CreateSession) -> std::io::Result<Self> {
        let path = root.join(id);
        fs::create_dir_all(path.join(ROUNDS_DIR))?;
        let dir = Self { path };
        let mut header = Vec::new();
        write_audit(&mut header, &[]).map_err(std::io::Error::other)?;
        write_atomic(&dir.path.join(AUDIT_FILE), &header)?;
        let record = SessionRecord {
            format_version: FORMAT_VERSION,
            id: id.to_string(),
            request: request.clone(),
        };
        let json = serde_json::to_vec_pretty(&record).map_err(std::io::Error::other)?;
        // Written last: a directory without it is an aborted creation.
        write_atomic(&dir.path.join(SESSION_FILE), &json)?;
        Ok(dir)
    }

    pub fn open(path: &Path) -> std::io::Result<(Self, String, CreateSession)> {
        let text = fs::read_to_string(path.join(SESSION_FILE))?;
        let record: SessionRecord = serde_json::from_str(&text).map_err(std::io::Error::other)?;
        if record.format_version != FORMAT_VERSION {
            return Err(std::io::Error::other(format!(
                "unsupported session format {}",
                record.format_version
            )));
        }
        Ok((
            Self {
                path: path.to_path_buf(),
            },
            record.id,
            record.request,
        ))
    }

    /// Reads the log, dropping a torn final line and rewriting the file
    /// without it so later appends start on a clean line.
    pub fn read_audit(&self) -> alpf_core::Result<Vec<AuditEntry>> {
        let path = self.path.join(AUDIT_FILE);
        let raw = fs::read(&path)?;
        let entries = read_audit(BufReader::new(raw.as_slice()))?;
        let mut clean = Vec::new();
        write_audit(&mut clean, &entries)?;
        if clean != raw {
            write_atomic(&path, &clean)?;
        }
        Ok(entries)
    }

    pub fn appender(&self) -> std::io::Result<AuditAppender> {
        let file = OpenOptions::new()
            .append(true)
            .open(self.path.join(AUDIT_FILE))?;
        Ok(AuditAppender { file })
    }

    fn round_path(&self, round: usize) -> PathBuf {
        self.path.join(ROUNDS_DIR).join(format!("{round}.json"))
    }

    pub fn save_round(&self, round: usize, classifier: &Classifier) -> std::io::Result<()> {
        write_atomic(
            &self.round_path(round),
            classifier.to_snapshot_json().as_bytes(),
        )
    }

    pub fn load_round(&self, round: usize) -> alpf_core::Result<Option<Classifier>> {
        match fs::read_to_string(self.round_path(round)) {
            Ok(text) => Classifier::from_snapshot_json(&text).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

pub(crate) struct AuditAppender {
    file: File,
}

impl AuditAppender {
    /// Appends one entry and waits for it to reach the disk.
    pub fn append(&mut self, entry: &AuditEntry) -> alpf_core::Result<()> {
        let mut line = Vec::new();
        write_audit_line(&mut line, entry)?;
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}

/// Session directories under `root` and the next free numeric id.
pub(crate) fn scan(root: &Path) -> std::io::Result<(Vec<PathBuf>, u64)> {
    let mut dirs = Vec::new();
    let mut next = 1;
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(n) = name.strip_prefix('s').and_then(|s| s.parse::<u64>().ok()) {
            next = next.max(n + 1);
            if entry.path().join(SESSION_FILE).is_file() {
                dirs.push(entry.path());
            }
        }
    }
    dirs.sort();
    Ok((dirs, next))
}

pub(crate) fn session_id(n: u64) -> String {
    format!("s{n:06}")
}
