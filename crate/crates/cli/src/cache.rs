//! Content-addressed result cache under `<out>/.cache`.
//!
//! Writers hold an exclusive advisory lock on `<out>/.cache/.lock`, readers a
//! shared one. Entries are written to a temporary file and renamed into place.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::output::Payload;

pub const VERSION_TAG: &str = concat!("jacobilab-", env!("CARGO_PKG_VERSION"), "/cache-1");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordKey {
    pub config_hash: String,
    pub operation: String,
    pub inputs_digest: String,
    pub version: String,
}

impl RecordKey {
    pub fn new(config_hash: &str, operation: &str, inputs: &serde_json::Value) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            operation: operation.to_string(),
            inputs_digest: sha256_hex(&serde_json::to_vec(inputs).expect("inputs serialize")),
            version: VERSION_TAG.to_string(),
        }
    }

    pub fn digest(&self) -> String {
        let joined = [self.version.as_str(), &self.config_hash, &self.operation, &self.inputs_digest].join("\0");
        sha256_hex(joined.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub key: RecordKey,
    pub payload: Payload,
    pub payload_sha256: String,
    pub wall_time_ms: u64,
}

impl ResultRecord {
    pub fn new(key: RecordKey, payload: Payload, wall_time_ms: u64) -> Self {
        let payload_sha256 = payload_digest(&payload);
        Self { key, payload, payload_sha256, wall_time_ms }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn payload_digest(p: &Payload) -> String {
    sha256_hex(&serde_json::to_vec(p).expect("payload serializes"))
}

#[derive(Debug, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    Miss,
    /// A corrupt or mismatched entry was found and removed.
    Evicted,
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn open(out: &Path) -> std::io::Result<Self> {
        let dir = out.join(".cache");
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn lock_file(&self) -> std::io::Result<File> {
        OpenOptions::new().create(true).truncate(false).write(true).open(self.dir.join(".lock"))
    }

    fn entry_path(&self, key: &RecordKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.digest()))
    }

    pub fn lookup(&self, key: &RecordKey) -> std::io::Result<(Lookup, Option<ResultRecord>)> {
        let path = self.entry_path(key);
        let lock = self.lock_file()?;
        lock.lock_shared()?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Lookup::Miss, None)),
            Err(e) => return Err(e),
        };
        lock.unlock()?;
        let valid = serde_json::from_slice::<ResultRecord>(&bytes)
            .ok()
            .filter(|r| &r.key == key && r.payload_sha256 == payload_digest(&r.payload));
        match valid {
            Some(r) => Ok((Lookup::Hit, Some(r))),
            None => {
                lock.lock()?;
                let _ = fs::remove_file(&path);
                lock.unlock()?;
                Ok((Lookup::Evicted, None))
            }
        }
    }

    pub fn store(&self, record: &ResultRecord) -> std::io::Result<()> {
        let path = self.entry_path(&record.key);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let bytes = serde_json::to_vec(record).expect("record serializes");
        let lock = self.lock_file()?;
        lock.lock()?;
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        lock.unlock()
    }

    #[cfg(test)]
    pub fn path_for(&self, key: &RecordKey) -> PathBuf {
        self.entry_path(key)
    }
}
