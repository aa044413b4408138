use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use parking_lot::RwLock;
use serde_json::Value;

use super::ids::IdGenerator;
use super::journal::{Journal, JournalRecord};
use super::{Document, StoreBackend, StoreError};
use crate::clock::SharedClock;
use crate::Values;

#[derive(Debug, Clone)]
pub struct StoreOptions {
    /// fsync every journal append before acknowledging it.
    pub sync_writes: bool,
    /// Compact a journal once it holds this many records and more than twice the live count.
    pub compact_threshold: usize,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            sync_writes: true,
            compact_threshold: 1024,
        }
    }
}

struct UniqueIndex {
    field: String,
    fold_case: bool,
    owners: HashMap<String, String>,
}

impl UniqueIndex {
    fn key(&self, value: &Value) -> Option<String> {
        match value {
            Value::Null => None,
            Value::String(s) if self.fold_case => Some(s.to_lowercase()),
            Value::String(s) => Some(s.clone()),
            other => Some(other.to_string()),
        }
    }

    fn key_of(&self, values: &Values) -> Option<String> {
        values.get(&self.field).and_then(|v| self.key(v))
    }
}

#[derive(Default)]
struct Collection {
    docs: BTreeMap<String, Document>,
    indexes: Vec<UniqueIndex>,
    journal: Option<Journal>,
}

impl Collection {
    fn check_unique(
        &self,
        name: &str,
        values: &Values,
        except: Option<&str>,
    ) -> Result<(), StoreError> {
        for index in &self.indexes {
            if let Some(key) = index.key_of(values) {
                if let Some(owner) = index.owners.get(&key) {
                    if Some(owner.as_str()) != except {
                        return Err(StoreError::UniqueViolation {
                            collection: name.to_string(),
                            field: index.field.clone(),
                            value: values[&index.field].to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn unindex(&mut self, doc: &Document) {
        for index in &mut self.indexes {
            if let Some(key) = index.key_of(&doc.values) {
                if index.owners.get(&key) == Some(&doc.id) {
                    index.owners.remove(&key);
                }
            }
        }
    }

    fn apply(&mut self, record: JournalRecord) {
        match record {
            JournalRecord::Put { doc } => {
                if let Some(old) = self.docs.remove(&doc.id) {
                    self.unindex(&old);
                }
                for index in &mut self.indexes {
                    if let Some(key) = index.key_of(&doc.values) {
                        index.owners.insert(key, doc.id.clone());
                    }
                }
                self.docs.insert(doc.id.clone(), doc);
            }
            JournalRecord::Del { id } => {
                if let Some(old) = self.docs.remove(&id) {
                    self.unindex(&old);
                }
            }
        }
    }

    /// Journals `record` (when file-backed), then applies it in memory.
    fn commit(&mut self, record: JournalRecord, options: &StoreOptions) -> Result<(), StoreError> {
        if let Some(journal) = &mut self.journal {
            journal.append(&record)?;
        }
        self.apply(record);
        if let Some(journal) = &mut self.journal {
            let records = journal.records();
            if records >= options.compact_threshold && records > 2 * self.docs.len() {
                // The record above is already durable; a failed compaction only costs space.
                if let Err(e) = journal.compact(self.docs.values()) {
                    log::warn!("journal compaction failed: {e}");
                }
            }
        }
        Ok(())
    }
}

/// The default [`StoreBackend`]: documents held in memory, each collection backed by an
/// append-only journal file under `<dir>/<collection>.journal` (or nothing, in memory mode).
pub struct JournalStore {
    dir: Option<PathBuf>,
    options: StoreOptions,
    clock: SharedClock,
    ids: IdGenerator,
    collections: RwLock<HashMap<String, Arc<RwLock<Collection>>>>,
}

fn valid_collection_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl JournalStore {
    pub fn in_memory(clock: SharedClock) -> Self {
        Self {
            dir: None,
            options: StoreOptions::default(),
            ids: IdGenerator::new(clock.clone()),
            clock,
            collections: RwLock::new(HashMap::new()),
        }
    }

    pub fn open(
        dir: impl Into<PathBuf>,
        clock: SharedClock,
        options: StoreOptions,
    ) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            options,
            ids: IdGenerator::new(clock.clone()),
            clock,
            collections: RwLock::new(HashMap::new()),
        })
    }

    pub fn is_persistent(&self) -> bool {
        self.dir.is_some()
    }

    fn collection(&self, name: &str) -> Result<Arc<RwLock<Collection>>, StoreError> {
        if let Some(c) = self.collections.read().get(name) {
            return Ok(c.clone());
        }
        if !valid_collection_name(name) {
            return Err(StoreError::InvalidCollection(name.to_string()));
        }
        let mut all = self.collections.write();
        if let Some(c) = all.get(name) {
            return Ok(c.clone());
        }
        let mut collection = Collection::default();
        if let Some(dir) = &self.dir {
            let (journal, records) = Journal::open(
                &dir.join(format!("{name}.journal")),
                self.options.sync_writes,
            )?;
            for record in records {
                collection.apply(record);
            }
            collection.journal = Some(journal);
        }
        let collection = Arc::new(RwLock::new(collection));
        all.insert(name.to_string(), collection.clone());
        Ok(collection)
    }

    /// Rewrites a collection's journal down to its live documents.
    pub fn compact(&self, collection: &str) -> Result<(), StoreError> {
        let c = self.collection(collection)?;
        let mut c = c.write();
        let Collection { docs, journal, .. } = &mut *c;
        if let Some(journal) = journal {
            journal.compact(docs.values())?;
        }
        Ok(())
    }

    fn not_found(collection: &str, id: &str) -> StoreError {
        StoreError::NotFound {
            collection: collection.to_string(),
            id: id.to_string(),
        }
    }
}

impl StoreBackend for JournalStore {
    fn ensure_unique_index(
        &self,
        collection: &str,
        field: &str,
        fold_case: bool,
    ) -> Result<(), StoreError> {
        let c = self.collection(collection)?;
        let mut c = c.write();
        if c.indexes.iter().any(|i| i.field == field) {
            return Ok(());
        }
        let mut index = UniqueIndex {
            field: field.to_string(),
            fold_case,
            owners: HashMap::new(),
        };
        for doc in c.docs.values() {
            if let Some(key) = index.key_of(&doc.values) {
                if index.owners.insert(key, doc.id.clone()).is_some() {
                    return Err(StoreError::UniqueViolation {
                        collection: collection.to_string(),
                        field: field.to_string(),
                        value: doc.values[field].to_string(),
                    });
                }
            }
        }
        c.indexes.push(index);
        Ok(())
    }

    fn insert(&self, collection: &str, values: Values) -> Result<Document, StoreError> {
        let c = self.collection(collection)?;
        let mut c = c.write();
        c.check_unique(collection, &values, None)?;
        let floor = c.docs.keys().next_back().cloned();
        let now = self.clock.now();
        let doc = Document {
            collection: collection.to_string(),
            id: self.ids.next_after(floor.as_deref()),
            values,
            created_at: now,
            updated_at: now,
        };
        c.commit(JournalRecord::Put { doc: doc.clone() }, &self.options)?;
        Ok(doc)
    }

    fn get(&self, collection: &str, id: &str) -> Result<Option<Document>, StoreError> {
        let c = self.collection(collection)?;
        let c = c.read();
        Ok(c.docs.get(id).cloned())
    }

    fn update_if(
        &self,
        collection: &str,
        id: &str,
        patch: Values,
        expected: Option<DateTime<Utc>>,
    ) -> Result<Document, StoreError> {
        let c = self.collection(collection)?;
        let mut c = c.write();
        let current = c
            .docs
            .get(id)
            .ok_or_else(|| Self::not_found(collection, id))?;
        if expected.is_some_and(|t| t != current.updated_at) {
            return Err(StoreError::Conflict {
                collection: collection.to_string(),
                id: id.to_string(),
            });
        }
        let mut doc = current.clone();
        for (key, value) in patch {
            if value.is_null() {
                doc.values.remove(&key);
            } else {
                doc.values.insert(key, value);
            }
        }
        c.check_unique(collection, &doc.values, Some(id))?;
        // updatedAt strictly advances so it can serve as a revision marker.
        doc.updated_at = self
            .clock
            .now()
            .max(current.updated_at + Duration::milliseconds(1));
        c.commit(JournalRecord::Put { doc: doc.clone() }, &self.options)?;
        Ok(doc)
    }

    fn delete(&self, collection: &str, id: &str) -> Result<Document, StoreError> {
        let c = self.collection(collection)?;
        let mut c = c.write();
        let doc = c
            .docs
            .get(id)
            .cloned()
            .ok_or_else(|| Self::not_found(collection, id))?;
        c.commit(JournalRecord::Del { id: id.to_string() }, &self.options)?;
        Ok(doc)
    }

    fn scan(
        &self,
        collection: &str,
        limit: usize,
        start: usize,
        filter: Option<&Values>,
    ) -> Result<Vec<Document>, StoreError> {
        let c = self.collection(collection)?;
        let c = c.read();
        let matches = |doc: &&Document| {
            filter.map_or(true, |f| {
                f.iter().all(|(k, v)| doc.values.get(k) == Some(v))
            })
        };
        Ok(c.docs
            .values()
            .filter(matches)
            .skip(start)
            .take(limit)
            .cloned()
            .collect())
    }

    fn count(&self, collection: &str) -> Result<usize, StoreError> {
        Ok(self.collection(collection)?.read().docs.len())
    }

    fn find_unique(
        &self,
        collection: &str,
        field: &str,
        value: &Value,
    ) -> Result<Option<Document>, StoreError> {
        let c = self.collection(collection)?;
        let c = c.read();
        let Some(index) = c.indexes.iter().find(|i| i.field == field) else {
            return Ok(c
                .docs
                .values()
                .find(|d| d.values.get(field) == Some(value))
                .cloned());
        };
        Ok(index
            .key(value)
            .and_then(|k| index.owners.get(&k))
            .and_then(|id| c.docs.get(id))
            .cloned())
    }
}
