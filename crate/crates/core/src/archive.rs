//! Content-addressed artifact cache with checksum verification and
//! reproducible provenance manifests.
//!
//! Transports are pluggable so every test can run offline; the default
//! transport speaks HTTP(S) and also accepts `file://` URLs.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error(
        "checksum mismatch for {url}: expected {expected}, got {actual}; \
         downloaded bytes kept at {quarantine}"
    )]
    ChecksumMismatch {
        url: String,
        expected: String,
        actual: String,
        quarantine: PathBuf,
    },
    #[error("network failure fetching {url}: {reason}")]
    NetworkFailure { url: String, reason: String },
    #[error("not found: {url}")]
    NotFound { url: String },
    #[error("manifest entry for {spec} is not verifiable: {reason}")]
    UnverifiedEntry { spec: String, reason: String },
    #[error("invalid sha256 {value:?} (need 64 hex characters)")]
    BadSha256 { value: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where an artifact comes from and how to recognize it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRef {
    pub url: String,
    pub sha256: String,
    pub kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    SourceArchive,
    BinaryArchive,
}

impl SourceRef {
    pub fn validate(&self) -> Result<(), ArchiveError> {
        if self.sha256.len() != 64 || !self.sha256.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(ArchiveError::BadSha256 {
                value: self.sha256.clone(),
            });
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, ArchiveError> {
    let mut file = fs::File::open(path).map_err(|source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|source| ArchiveError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Fetches raw bytes for a URL.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<Vec<u8>, ArchiveError>;
}

/// Production transport: HTTP(S) plus local `file://` URLs.
#[derive(Debug, Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<Vec<u8>, ArchiveError> {
        if let Some(path) = url.strip_prefix("file://") {
            return fs::read(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => ArchiveError::NotFound {
                    url: url.to_string(),
                },
                _ => ArchiveError::NetworkFailure {
                    url: url.to_string(),
                    reason: e.to_string(),
                },
            });
        }
        let response = ureq::get(url).call().map_err(|e| match e {
            ureq::Error::Status(404, _) => ArchiveError::NotFound {
                url: url.to_string(),
            },
            other => ArchiveError::NetworkFailure {
                url: url.to_string(),
                reason: other.to_string(),
            },
        })?;
        let mut bytes = Vec::new();
        response
            .into_reader()
            .read_to_end(&mut bytes)
            .map_err(|e| ArchiveError::NetworkFailure {
                url: url.to_string(),
                reason: e.to_string(),
            })?;
        Ok(bytes)
    }
}

/// In-memory transport for tests; counts every request so network
/// abstinence is checkable.
#[derive(Debug, Default)]
pub struct MemoryTransport {
    objects: Mutex<HashMap<String, Vec<u8>>>,
    requests: std::sync::atomic::AtomicUsize,
}

impl MemoryTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, url: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.objects
            .lock()
            .unwrap()
            .insert(url.into(), bytes.into());
    }

    pub fn requests(&self) -> usize {
        self.requests.load(std::sync::atomic::Ordering::SeqCst)
    }
}

impl Transport for MemoryTransport {
    fn get(&self, url: &str) -> Result<Vec<u8>, ArchiveError> {
        self.requests
            .fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        self.objects
            .lock()
            .unwrap()
            .get(url)
            .cloned()
            .ok_or_else(|| ArchiveError::NotFound {
                url: url.to_string(),
            })
    }
}

/// Content-addressed cache: each verified artifact is stored under its
/// sha256; the path is a pure function of the hash.
pub struct Cache {
    root: PathBuf,
    hash_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Cache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ArchiveError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| ArchiveError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(Cache {
            root,
            hash_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Cache location for a given content hash.
    pub fn path_for(&self, sha256: &str) -> PathBuf {
        self.root.join(sha256)
    }

    pub fn contains(&self, sha256: &str) -> bool {
        self.path_for(sha256).is_file()
    }

    fn lock_for(&self, sha256: &str) -> Arc<Mutex<()>> {
        let mut locks = self.hash_locks.lock().unwrap();
        locks
            .entry(sha256.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(())))
            .clone()
    }

    /// Fetches an artifact into the cache, verifying its checksum. A cache
    /// hit performs no transport request at all. On mismatch the bytes are
    /// kept under a quarantine name for inspection.
    pub fn fetch(
        &self,
        source: &SourceRef,
        transport: &dyn Transport,
    ) -> Result<PathBuf, ArchiveError> {
        source.validate()?;
        let sha = source.sha256.to_lowercase();
        let lock = self.lock_for(&sha);
        let _guard = lock.lock().unwrap();

        let target = self.path_for(&sha);
        if target.is_file() {
            return Ok(target);
        }

        let bytes = transport.get(&source.url)?;
        let actual = sha256_hex(&bytes);
        if actual != sha {
            let quarantine = self.root.join(format!("quarantine-{sha}"));
            fs::write(&quarantine, &bytes).map_err(|source| ArchiveError::Io {
                path: quarantine.clone(),
                source,
            })?;
            return Err(ArchiveError::ChecksumMismatch {
                url: source.url.clone(),
                expected: sha,
                actual,
                quarantine,
            });
        }

        let tmp = self.root.join(format!(".tmp-{sha}"));
        fs::write(&tmp, &bytes).map_err(|source| ArchiveError::Io {
            path: tmp.clone(),
            source,
        })?;
        fs::rename(&tmp, &target).map_err(|source| ArchiveError::Io {
            path: target.clone(),
            source,
        })?;
        Ok(target)
    }

    /// Recomputes the hash of every cached object; returns the paths whose
    /// content no longer matches their name.
    pub fn audit(&self) -> Result<Vec<PathBuf>, ArchiveError> {
        let mut bad = Vec::new();
        let entries = fs::read_dir(&self.root).map_err(|source| ArchiveError::Io {
            path: self.root.clone(),
            source,
        })?;
        for entry in entries {
            let entry = entry.map_err(|source| ArchiveError::Io {
                path: self.root.clone(),
                source,
            })?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.len() != 64 || !name.chars().all(|c| c.is_ascii_hexdigit()) {
                continue;
            }
            if sha256_file(&entry.path())? != name {
                bad.push(entry.path());
            }
        }
        Ok(bad)
    }
}

/// One archived artifact in a provenance manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub spec: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    pub sha256: String,
    pub fetched_at_epoch: u64,
    pub cache_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs_digest: Option<String>,
}

impl ManifestEntry {
    pub fn new(spec: impl Into<String>, source: &SourceRef, cache_path: &Path) -> Self {
        ManifestEntry {
            spec: spec.into(),
            url: source.url.clone(),
            doi: source.doi.clone(),
            sha256: source.sha256.to_lowercase(),
            fetched_at_epoch: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            cache_path: cache_path.display().to_string(),
            inputs_digest: None,
        }
    }

    pub fn with_inputs_digest(mut self, digest: impl Into<String>) -> Self {
        self.inputs_digest = Some(digest.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceManifest {
    pub manifest_version: u32,
    pub artifacts: Vec<ManifestEntry>,
}

/// Renders a manifest canonically: entries sorted, fixed key order, LF
/// endings, trailing newline. The same entry set produces the same bytes
/// regardless of insertion order.
pub fn render_manifest(entries: &[ManifestEntry]) -> String {
    let mut artifacts = entries.to_vec();
    artifacts.sort_by(|a, b| (&a.spec, &a.url, &a.sha256).cmp(&(&b.spec, &b.url, &b.sha256)));
    let manifest = ProvenanceManifest {
        manifest_version: 1,
        artifacts,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    text
}

/// Writes a manifest after re-verifying that every entry's cached file
/// still hashes to the recorded checksum.
pub fn write_manifest(entries: &[ManifestEntry], out: &Path) -> Result<(), ArchiveError> {
    for entry in entries {
        let path = Path::new(&entry.cache_path);
        let actual = sha256_file(path).map_err(|e| ArchiveError::UnverifiedEntry {
            spec: entry.spec.clone(),
            reason: e.to_string(),
        })?;
        if actual != entry.sha256 {
            return Err(ArchiveError::UnverifiedEntry {
                spec: entry.spec.clone(),
                reason: format!(
                    "cached file {} hashes to {actual}, manifest says {}",
                    entry.cache_path, entry.sha256
                ),
            });
        }
    }
    let text = render_manifest(entries);
    fs::write(out, text).map_err(|source| ArchiveError::Io {
        path: out.to_path_buf(),
        source,
    })
}
