//! Content-addressed storage for uploaded card images.
//!
//! Blobs live at `<media-dir>/<first two hex digits>/<sha256 hex>`; the descriptive
//! metadata for each upload is a document in the `media` collection.

use std::collections::HashMap;
use std::fs;
use std::io::Cursor;
use std::path::PathBuf;
use std::sync::Arc;

use image::{ImageFormat, ImageReader};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Document, StoreBackend, StoreError};
use crate::fsutil::write_atomic;
use crate::Values;

pub const MEDIA_COLLECTION: &str = "media";
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 10 * 1024 * 1024;

const ALLOWED: [(&str, ImageFormat); 2] = [
    ("image/jpeg", ImageFormat::Jpeg),
    ("image/png", ImageFormat::Png),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MediaAsset {
    pub id: String,
    pub original_filename: String,
    pub mime_type: String,
    pub size_bytes: u64,
    pub sha256_hex: String,
    pub width: u32,
    pub height: u32,
    pub url: String,
}

impl MediaAsset {
    fn from_document(doc: &Document) -> Option<Self> {
        let mut values = doc.values.clone();
        values.insert("id".into(), Value::String(doc.id.clone()));
        serde_json::from_value(Value::Object(values)).ok()
    }

    /// The GraphQL `UploadFile` shape.
    pub fn to_json(&self) -> Values {
        let mut out = Values::new();
        out.insert("id".into(), json!(self.id));
        out.insert("name".into(), json!(self.original_filename));
        out.insert("mime".into(), json!(self.mime_type));
        out.insert("size".into(), json!(self.size_bytes));
        out.insert("sha256".into(), json!(self.sha256_hex));
        out.insert("width".into(), json!(self.width));
        out.insert("height".into(), json!(self.height));
        out.insert("url".into(), json!(self.url));
        out
    }
}

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("unsupported media type {0:?}; expected image/jpeg or image/png")]
    UnsupportedMediaType(String),
    #[error("upload of {size} bytes exceeds the {max} byte limit")]
    TooLarge { size: usize, max: usize },
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("media {0:?} not found")]
    NotFound(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("media I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

enum BlobDir {
    Disk(PathBuf),
    Memory(Mutex<HashMap<String, Arc<Vec<u8>>>>),
}

pub struct MediaStore {
    blobs: BlobDir,
    docs: Arc<dyn StoreBackend>,
    max_bytes: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads width and height from the image header, insisting the bytes really are `format`.
pub fn image_dimensions(bytes: &[u8], format: ImageFormat) -> Result<(u32, u32), MediaError> {
    match image::guess_format(bytes) {
        Ok(found) if found == format => {}
        Ok(found) => {
            return Err(MediaError::CorruptImage(format!(
                "content is {found:?}, declared {format:?}"
            )))
        }
        Err(e) => return Err(MediaError::CorruptImage(e.to_string())),
    }
    let (width, height) = ImageReader::with_format(Cursor::new(bytes), format)
        .into_dimensions()
        .map_err(|e| MediaError::CorruptImage(e.to_string()))?;
    if width == 0 || height == 0 {
        return Err(MediaError::CorruptImage("zero-sized image".into()));
    }
    Ok((width, height))
}

impl MediaStore {
    pub fn on_disk(
        dir: impl Into<PathBuf>,
        docs: Arc<dyn StoreBackend>,
        max_bytes: usize,
    ) -> Result<Self, MediaError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            blobs: BlobDir::Disk(dir),
            docs,
            max_bytes,
        })
    }

    pub fn in_memory(docs: Arc<dyn StoreBackend>, max_bytes: usize) -> Self {
        Self {
            blobs: BlobDir::Memory(Mutex::new(HashMap::new())),
            docs,
            max_bytes,
        }
    }

    pub fn max_bytes(&self) -> usize {
        self.max_bytes
    }

    pub fn blob_path(&self, sha256_hex: &str) -> Option<PathBuf> {
        match &self.blobs {
            BlobDir::Disk(dir)
                if sha256_hex.len() == 64 && sha256_hex.bytes().all(|b| b.is_ascii_hexdigit()) =>
            {
                Some(dir.join(&sha256_hex[..2]).join(sha256_hex))
            }
            _ => None,
        }
    }

    pub fn store_media(
        &self,
        bytes: &[u8],
        original_filename: &str,
        mime_type: &str,
    ) -> Result<MediaAsset, MediaError> {
        let format = ALLOWED
            .iter()
            .find(|(mime, _)| mime.eq_ignore_ascii_case(mime_type))
            .map(|(_, f)| *f)
            .ok_or_else(|| MediaError::UnsupportedMediaType(mime_type.to_string()))?;
        if bytes.len() > self.max_bytes {
            return Err(MediaError::TooLarge {
                size: bytes.len(),
                max: self.max_bytes,
            });
        }
        if bytes.is_empty() {
            return Err(MediaError::CorruptImage("empty upload".into()));
        }
        let (width, height) = image_dimensions(bytes, format)?;
        let sha = sha256_hex(bytes);
        self.put_blob(&sha, bytes)?;

        let mime = ALLOWED
            .iter()
            .find(|(_, f)| *f == format)
            .map(|(m, _)| *m)
            .unwrap_or_default();
        let mut values = Values::new();
        values.insert("originalFilename".into(), json!(original_filename));
        values.insert("mimeType".into(), json!(mime));
        values.insert("sizeBytes".into(), json!(bytes.len()));
        values.insert("sha256Hex".into(), json!(sha));
        values.insert("width".into(), json!(width));
        values.insert("height".into(), json!(height));
        values.insert("url".into(), json!(format!("/media/{sha}")));
        let doc = self.docs.insert(MEDIA_COLLECTION, values)?;
        MediaAsset::from_document(&doc)
            .ok_or_else(|| MediaError::CorruptImage("metadata round-trip".into()))
    }

    fn put_blob(&self, sha: &str, bytes: &[u8]) -> Result<(), MediaError> {
        match &self.blobs {
            BlobDir::Memory(map) => {
                map.lock()
                    .entry(sha.to_string())
                    .or_insert_with(|| Arc::new(bytes.to_vec()));
            }
            BlobDir::Disk(_) => {
                let path = self
                    .blob_path(sha)
                    .expect("sha256 hex is a valid blob name");
                if !path.exists() {
                    fs::create_dir_all(path.parent().expect("blob has a parent dir"))?;
                    write_atomic(&path, bytes)?;
                }
            }
        }
        Ok(())
    }

    pub fn get_asset(&self, id: &str) -> Result<Option<MediaAsset>, MediaError> {
        Ok(self
            .docs
            .get(MEDIA_COLLECTION, id)?
            .as_ref()
            .and_then(MediaAsset::from_document))
    }

    pub fn load_blob(&self, sha: &str) -> Result<Vec<u8>, MediaError> {
        match &self.blobs {
            BlobDir::Memory(map) => map
                .lock()
                .get(sha)
                .map(|b| b.to_vec())
                .ok_or_else(|| MediaError::NotFound(sha.to_string())),
            BlobDir::Disk(_) => {
                let path = self
                    .blob_path(sha)
                    .ok_or_else(|| MediaError::NotFound(sha.to_string()))?;
                fs::read(&path).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => MediaError::NotFound(sha.to_string()),
                    _ => MediaError::Io(e),
                })
            }
        }
    }

    pub fn load_media(&self, id: &str) -> Result<Vec<u8>, MediaError> {
        let asset = self
            .get_asset(id)?
            .ok_or_else(|| MediaError::NotFound(id.to_string()))?;
        self.load_blob(&asset.sha256_hex)
    }

    /// Number of distinct blobs held.
    pub fn blob_count(&self) -> usize {
        match &self.blobs {
            BlobDir::Memory(map) => map.lock().len(),
            BlobDir::Disk(dir) => walk_files(dir),
        }
    }
}

fn walk_files(dir: &std::path::Path) -> usize {
    fs::read_dir(dir)
        .into_iter()
        .flatten()
        .filter_map(Result::ok)
        .map(|e| {
            let p = e.path();
            if p.is_dir() {
                walk_files(&p)
            } else {
                usize::from(p.extension().is_none())
            }
        })
        .sum()
}
