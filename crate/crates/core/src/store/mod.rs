//! Document persistence and the content-addressed media store.

mod engine;
mod ids;
mod journal;
mod media;

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::clock::{format_datetime, rfc3339_millis};
use crate::Values;

pub use engine::{JournalStore, StoreOptions};
pub use ids::IdGenerator;
pub use journal::{encode_frame, JournalRecord};
pub use media::{MediaAsset, MediaError, MediaStore, DEFAULT_MAX_UPLOAD_BYTES, MEDIA_COLLECTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Document {
    pub collection: String,
    pub id: String,
    pub values: Values,
    #[serde(with = "rfc3339_millis")]
    pub created_at: DateTime<Utc>,
    #[serde(with = "rfc3339_millis")]
    pub updated_at: DateTime<Utc>,
}

impl Document {
    /// Flattened form used by the API: system attributes followed by field values.
    pub fn to_json(&self) -> Values {
        let mut out = Values::new();
        out.insert("id".into(), Value::String(self.id.clone()));
        out.insert(
            "createdAt".into(),
            Value::String(format_datetime(&self.created_at)),
        );
        out.insert(
            "updatedAt".into(),
            Value::String(format_datetime(&self.updated_at)),
        );
        for (k, v) in &self.values {
            out.insert(k.clone(), v.clone());
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{collection} {id:?} not found")]
    NotFound { collection: String, id: String },
    #[error("{collection}.{field} must be unique; {value} is already taken")]
    UniqueViolation {
        collection: String,
        field: String,
        value: String,
    },
    #[error("{collection} {id:?} changed concurrently")]
    Conflict { collection: String, id: String },
    #[error("invalid collection name {0:?}")]
    InvalidCollection(String),
    #[error("corrupt store file {}: {reason}", path.display())]
    Corrupt { path: PathBuf, reason: String },
    #[error("store I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Collection-scoped document storage.
///
/// Implementations must make every acknowledged write durable and return scans in
/// ascending id order. Ids are sortable, so id order is creation order.
pub trait StoreBackend: Send + Sync {
    /// Declares a unique index. Values are compared case-insensitively when `fold_case`
    /// is set. Existing duplicates make this fail with `UniqueViolation`.
    fn ensure_unique_index(
        &self,
        collection: &str,
        field: &str,
        fold_case: bool,
    ) -> Result<(), StoreError>;

    fn insert(&self, collection: &str, values: Values) -> Result<Document, StoreError>;

    fn get(&self, collection: &str, id: &str) -> Result<Option<Document>, StoreError>;

    /// Merges `patch` into the stored values; a `null` in the patch removes that key.
    /// With `expected` set, the write only happens if the document's `updatedAt` still
    /// equals it, otherwise `Conflict`.
    fn update_if(
        &self,
        collection: &str,
        id: &str,
        patch: Values,
        expected: Option<DateTime<Utc>>,
    ) -> Result<Document, StoreError>;

    fn delete(&self, collection: &str, id: &str) -> Result<Document, StoreError>;

    /// Documents in id order, skipping `start`, at most `limit`, keeping only those whose
    /// top-level values equal every entry of `filter`.
    fn scan(
        &self,
        collection: &str,
        limit: usize,
        start: usize,
        filter: Option<&Values>,
    ) -> Result<Vec<Document>, StoreError>;

    fn count(&self, collection: &str) -> Result<usize, StoreError>;

    /// Looks a document up through a unique index declared on `field`.
    fn find_unique(
        &self,
        collection: &str,
        field: &str,
        value: &Value,
    ) -> Result<Option<Document>, StoreError>;

    fn update(&self, collection: &str, id: &str, patch: Values) -> Result<Document, StoreError> {
        self.update_if(collection, id, patch, None)
    }
}
