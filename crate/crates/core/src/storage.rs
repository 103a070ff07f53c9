//! Persistence backends.
//!
//! File layout under the data directory:
//!
//! ```text
//! audit.jsonl              the hash chain, one event per line
//! ledgers/<citizen>.jsonl  mirror of the events that name each citizen
//! snapshot.json            {seq, this_hash, state}, a cache only
//! blobs/<sha256>           record bodies above the inline threshold
//! exports/                 departure archives
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::canonical::Digest;
use crate::ids::CitizenId;

pub trait Storage: Send {
    /// Appends one encoded event line and returns only once it is durable.
    fn append(&mut self, line: &str, citizen: Option<&CitizenId>) -> io::Result<()>;
    fn read_log(&self) -> io::Result<Vec<u8>>;
    fn put_blob(&mut self, digest: &Digest, bytes: &[u8]) -> io::Result<()>;
    fn get_blob(&self, digest: &Digest) -> io::Result<Option<Vec<u8>>>;
    fn delete_blob(&mut self, digest: &Digest) -> io::Result<()>;
    fn write_snapshot(&mut self, bytes: &[u8]) -> io::Result<()>;
    fn read_snapshot(&self) -> io::Result<Option<Vec<u8>>>;
    /// Stores an export archive and returns its file name.
    fn write_export(&mut self, name: &str, bytes: &[u8]) -> io::Result<String>;
    fn read_export(&self, name: &str) -> io::Result<Option<Vec<u8>>>;
}

#[derive(Debug, Default, Clone)]
pub struct MemoryStorage {
    log: Vec<u8>,
    blobs: BTreeMap<String, Vec<u8>>,
    snapshot: Option<Vec<u8>>,
    exports: BTreeMap<String, Vec<u8>>,
}

impl MemoryStorage {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from existing log bytes, for tests that tamper with them.
    pub fn with_log(log: Vec<u8>) -> Self {
        Self { log, ..Self::default() }
    }

    pub fn log_mut(&mut self) -> &mut Vec<u8> {
        &mut self.log
    }
}

impl Storage for MemoryStorage {
    fn append(&mut self, line: &str, _citizen: Option<&CitizenId>) -> io::Result<()> {
        self.log.extend_from_slice(line.as_bytes());
        self.log.push(b'\n');
        Ok(())
    }

    fn read_log(&self) -> io::Result<Vec<u8>> {
        Ok(self.log.clone())
    }

    fn put_blob(&mut self, digest: &Digest, bytes: &[u8]) -> io::Result<()> {
        self.blobs.insert(digest.to_string(), bytes.to_vec());
        Ok(())
    }

    fn get_blob(&self, digest: &Digest) -> io::Result<Option<Vec<u8>>> {
        Ok(self.blobs.get(digest.as_str()).cloned())
    }

    fn delete_blob(&mut self, digest: &Digest) -> io::Result<()> {
        self.blobs.remove(digest.as_str());
        Ok(())
    }

    fn write_snapshot(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.snapshot = Some(bytes.to_vec());
        Ok(())
    }

    fn read_snapshot(&self) -> io::Result<Option<Vec<u8>>> {
        Ok(self.snapshot.clone())
    }

    fn write_export(&mut self, name: &str, bytes: &[u8]) -> io::Result<String> {
        self.exports.insert(name.to_string(), bytes.to_vec());
        Ok(name.to_string())
    }

    fn read_export(&self, name: &str) -> io::Result<Option<Vec<u8>>> {
        Ok(self.exports.get(name).cloned())
    }
}

#[derive(Debug)]
pub struct FileStorage {
    root: PathBuf,
    log: File,
}

impl FileStorage {
    pub fn open(root: impl AsRef<Path>) -> io::Result<Self> {
        let root = root.as_ref().to_path_buf();
        for sub in ["ledgers", "blobs", "exports"] {
            fs::create_dir_all(root.join(sub))?;
        }
        let log = OpenOptions::new().create(true).append(true).open(root.join("audit.jsonl"))?;
        Ok(Self { root, log })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self) -> PathBuf {
        self.root.join("audit.jsonl")
    }

    fn blob_path(&self, d: &Digest) -> io::Result<PathBuf> {
        if d.as_str().len() != 64 || !d.as_str().bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "bad blob digest"));
        }
        Ok(self.root.join("blobs").join(d.as_str()))
    }

    fn export_path(&self, name: &str) -> io::Result<PathBuf> {
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "bad export name"));
        }
        Ok(self.root.join("exports").join(name))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

fn read_optional(path: &Path) -> io::Result<Option<Vec<u8>>> {
    match fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

impl Storage for FileStorage {
    fn append(&mut self, line: &str, citizen: Option<&CitizenId>) -> io::Result<()> {
        let mut buf = Vec::with_capacity(line.len() + 1);
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
        self.log.write_all(&buf)?;
        self.log.sync_data()?;
        if let Some(c) = citizen {
            let safe: String = c
                .as_str()
                .chars()
                .map(|ch| if ch.is_ascii_alphanumeric() || ch == '-' || ch == '_' { ch } else { '_' })
                .collect();
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(self.root.join("ledgers").join(format!("{safe}.jsonl")))?;
            f.write_all(&buf)?;
        }
        Ok(())
    }

    fn read_log(&self) -> io::Result<Vec<u8>> {
        Ok(read_optional(&self.log_path())?.unwrap_or_default())
    }

    fn put_blob(&mut self, digest: &Digest, bytes: &[u8]) -> io::Result<()> {
        let p = self.blob_path(digest)?;
        if p.exists() {
            return Ok(());
        }
        write_atomic(&p, bytes)
    }

    fn get_blob(&self, digest: &Digest) -> io::Result<Option<Vec<u8>>> {
        read_optional(&self.blob_path(digest)?)
    }

    fn delete_blob(&mut self, digest: &Digest) -> io::Result<()> {
        match fs::remove_file(self.blob_path(digest)?) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }

    fn write_snapshot(&mut self, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.root.join("snapshot.json"), bytes)
    }

    fn read_snapshot(&self) -> io::Result<Option<Vec<u8>>> {
        read_optional(&self.root.join("snapshot.json"))
    }

    fn write_export(&mut self, name: &str, bytes: &[u8]) -> io::Result<String> {
        write_atomic(&self.export_path(name)?, bytes)?;
        Ok(name.to_string())
    }

    fn read_export(&self, name: &str) -> io::Result<Option<Vec<u8>>> {
        read_optional(&self.export_path(name)?)
    }
}
