//! Content-addressed, write-once blob store.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::AssetHash;

/// Image formats accepted by image capture.
pub const IMAGE_MEDIA_TYPES: [&str; 5] = [
    "image/png",
    "image/jpeg",
    "image/gif",
    "image/webp",
    "image/svg+xml",
];

/// Everything else the store will hold: favicons and opaque page archives.
pub const OTHER_MEDIA_TYPES: [&str; 4] = [
    "image/x-icon",
    "text/html",
    "multipart/related",
    "application/octet-stream",
];

/// Media type recorded for client-supplied page archives.
pub const PAGE_ARCHIVE_MEDIA_TYPE: &str = "application/octet-stream";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssetError {
    #[error("asset payload is empty")]
    EmptyPayload,
    #[error("unsupported media type `{0}`")]
    UnsupportedMediaType(String),
    #[error("malformed asset hash `{0}`")]
    MalformedHash(String),
    #[error("asset {0} not found")]
    NotFound(String),
    #[error("asset storage failed: {0}")]
    Io(String),
}

impl From<io::Error> for AssetError {
    fn from(err: io::Error) -> Self {
        AssetError::Io(err.to_string())
    }
}

/// Normalizes an image media type. Short names (`png`, `jpg`, `svg`) are
/// accepted alongside full `image/*` types.
pub fn normalize_image_type(media_type: &str) -> Option<&'static str> {
    let lowered = media_type.trim().to_ascii_lowercase();
    let short = lowered.strip_prefix("image/").unwrap_or(&lowered);
    let canonical = match short {
        "png" => "image/png",
        "jpeg" | "jpg" => "image/jpeg",
        "gif" => "image/gif",
        "webp" => "image/webp",
        "svg" | "svg+xml" => "image/svg+xml",
        _ => return None,
    };
    Some(canonical)
}

/// Normalizes any media type the store accepts.
pub fn normalize_media_type(media_type: &str) -> Option<&'static str> {
    normalize_image_type(media_type).or_else(|| {
        let lowered = media_type.trim().to_ascii_lowercase();
        let essence = lowered.split(';').next().unwrap_or("").trim();
        OTHER_MEDIA_TYPES.iter().copied().find(|t| *t == essence)
    })
}

/// Guesses the media type of image bytes from their magic number.
pub fn sniff_image_type(bytes: &[u8]) -> Option<&'static str> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        Some("image/png")
    } else if bytes.starts_with(&[0xff, 0xd8, 0xff]) {
        Some("image/jpeg")
    } else if bytes.starts_with(b"GIF87a") || bytes.starts_with(b"GIF89a") {
        Some("image/gif")
    } else if bytes.len() >= 12 && &bytes[..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        Some("image/webp")
    } else if bytes.starts_with(&[0, 0, 1, 0]) {
        Some("image/x-icon")
    } else {
        let head = String::from_utf8_lossy(&bytes[..bytes.len().min(256)]);
        let head = head.trim_start();
        (head.starts_with("<svg") || (head.starts_with("<?xml") && head.contains("<svg")))
            .then_some("image/svg+xml")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetMeta {
    pub media_type: String,
    pub byte_length: u64,
}

/// Read access to asset metadata, used by snapshot export and import.
pub trait AssetCatalog {
    fn meta(&self, hash: &AssetHash) -> Option<AssetMeta>;
}

impl AssetCatalog for BTreeMap<AssetHash, AssetMeta> {
    fn meta(&self, hash: &AssetHash) -> Option<AssetMeta> {
        self.get(hash).cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Asset {
    pub hash: AssetHash,
    pub media_type: String,
    pub bytes: Arc<[u8]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PutOutcome {
    Stored,
    AlreadyPresent,
}

#[derive(Debug)]
enum Backend {
    Memory(RwLock<BTreeMap<AssetHash, Arc<[u8]>>>),
    Disk(PathBuf),
}

/// Thread-safe asset store, either in memory or under a directory.
///
/// On disk each blob lives at `<root>/<hh>/<hash>` next to a
/// `<hash>.type` file holding its media type, where `hh` is the first two
/// hex digits of the hash.
#[derive(Debug)]
pub struct AssetStore {
    index: RwLock<BTreeMap<AssetHash, AssetMeta>>,
    backend: Backend,
}

impl Default for AssetStore {
    fn default() -> Self {
        AssetStore::in_memory()
    }
}

impl AssetStore {
    pub fn in_memory() -> Self {
        AssetStore {
            index: RwLock::new(BTreeMap::new()),
            backend: Backend::Memory(RwLock::new(BTreeMap::new())),
        }
    }

    /// Opens (creating if needed) a directory-backed store and indexes the
    /// blobs already present.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, AssetError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut index = BTreeMap::new();
        for shard in fs::read_dir(&root)? {
            let shard = shard?;
            if !shard.file_type()?.is_dir() {
                continue;
            }
            for entry in fs::read_dir(shard.path())? {
                let path = entry?.path();
                let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                    continue;
                };
                let Some(hash) = AssetHash::parse(name) else {
                    continue;
                };
                let media_type = fs::read_to_string(path.with_extension("type"))?;
                let byte_length = fs::metadata(&path)?.len();
                index.insert(
                    hash,
                    AssetMeta {
                        media_type: media_type.trim().to_owned(),
                        byte_length,
                    },
                );
            }
        }
        Ok(AssetStore {
            index: RwLock::new(index),
            backend: Backend::Disk(root),
        })
    }

    fn blob_path(root: &Path, hash: &AssetHash) -> PathBuf {
        root.join(&hash.as_str()[..2]).join(hash.as_str())
    }

    /// Stores `bytes` under their hash. Storing identical bytes again is a
    /// no-op that returns the same hash.
    pub fn put(
        &self,
        bytes: &[u8],
        media_type: &str,
    ) -> Result<(AssetHash, PutOutcome), AssetError> {
        if bytes.is_empty() {
            return Err(AssetError::EmptyPayload);
        }
        let media_type = normalize_media_type(media_type)
            .ok_or_else(|| AssetError::UnsupportedMediaType(media_type.to_owned()))?;
        let hash = AssetHash::of(bytes);

        let mut index = self.index.write();
        if index.contains_key(&hash) {
            return Ok((hash, PutOutcome::AlreadyPresent));
        }
        match &self.backend {
            Backend::Memory(blobs) => {
                blobs.write().insert(hash.clone(), Arc::from(bytes));
            }
            Backend::Disk(root) => {
                let path = Self::blob_path(root, &hash);
                fs::create_dir_all(path.parent().expect("blob path has a shard dir"))?;
                write_atomically(&path.with_extension("type"), media_type.as_bytes())?;
                write_atomically(&path, bytes)?;
            }
        }
        index.insert(
            hash.clone(),
            AssetMeta {
                media_type: media_type.to_owned(),
                byte_length: bytes.len() as u64,
            },
        );
        Ok((hash, PutOutcome::Stored))
    }

    pub fn get(&self, hash: &str) -> Result<Asset, AssetError> {
        let parsed =
            AssetHash::parse(hash).ok_or_else(|| AssetError::MalformedHash(hash.to_owned()))?;
        let meta = self
            .index
            .read()
            .get(&parsed)
            .cloned()
            .ok_or_else(|| AssetError::NotFound(hash.to_owned()))?;
        let bytes: Arc<[u8]> = match &self.backend {
            Backend::Memory(blobs) => blobs
                .read()
                .get(&parsed)
                .cloned()
                .ok_or_else(|| AssetError::NotFound(hash.to_owned()))?,
            Backend::Disk(root) => {
                let bytes = fs::read(Self::blob_path(root, &parsed))?;
                if AssetHash::of(&bytes) != parsed {
                    return Err(AssetError::Io(format!("blob {hash} is corrupt")));
                }
                Arc::from(bytes)
            }
        };
        Ok(Asset {
            hash: parsed,
            media_type: meta.media_type,
            bytes,
        })
    }

    pub fn contains(&self, hash: &AssetHash) -> bool {
        self.index.read().contains_key(hash)
    }

    pub fn len(&self) -> usize {
        self.index.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl AssetCatalog for AssetStore {
    fn meta(&self, hash: &AssetHash) -> Option<AssetMeta> {
        self.index.read().get(hash).cloned()
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("partial");
    let mut file = fs::File::create(&tmp)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    fs::rename(tmp, path)
}
