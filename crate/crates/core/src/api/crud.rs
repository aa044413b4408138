//! Authorized, validated CRUD over registered content types.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use serde_json::Value;

use super::ApiError;
use crate::auth::{Action, Decision, Grant, PermissionTable, Principal};
use crate::clock::SharedClock;
use crate::schema::{
    validate_document, ContentTypeDefinition, SchemaRegistry, ValidationContext, Violation,
};
use crate::store::{Document, MediaStore, StoreBackend, StoreError};
use crate::Values;

/// Per-type behavior layered over plain CRUD.
pub trait ContentHooks: Send + Sync {
    /// Adjusts client-supplied values before a create is validated.
    fn before_create(
        &self,
        _principal: Option<&Principal>,
        _values: &mut Values,
        _now: DateTime<Utc>,
    ) -> Result<(), ApiError> {
        Ok(())
    }

    /// Adjusts a client-supplied patch before it is merged and validated.
    fn before_update(
        &self,
        _principal: Option<&Principal>,
        _current: &Document,
        _patch: &mut Values,
        _now: DateTime<Utc>,
    ) -> Result<(), ApiError> {
        Ok(())
    }

    /// Cross-field checks over the complete values about to be stored.
    fn check(&self, _values: &Values) -> Vec<Violation> {
        Vec::new()
    }
}

/// Validation lookups answered from the live store.
pub struct StoreContext<'a> {
    pub store: &'a dyn StoreBackend,
    pub media: &'a MediaStore,
}

impl ValidationContext for StoreContext<'_> {
    fn value_taken(
        &self,
        collection: &str,
        field: &str,
        value: &Value,
        except_id: Option<&str>,
    ) -> bool {
        match self.store.find_unique(collection, field, value) {
            Ok(Some(doc)) => Some(doc.id.as_str()) != except_id,
            Ok(None) => false,
            Err(_) => false,
        }
    }

    fn media_exists(&self, id: &str) -> bool {
        matches!(self.media.get_asset(id), Ok(Some(_)))
    }

    fn document_exists(&self, collection: &str, id: &str) -> bool {
        matches!(self.store.get(collection, id), Ok(Some(_)))
    }
}

pub struct ContentService {
    store: Arc<dyn StoreBackend>,
    registry: Arc<SchemaRegistry>,
    media: Arc<MediaStore>,
    clock: SharedClock,
    permissions: RwLock<PermissionTable>,
    hooks: RwLock<BTreeMap<String, Arc<dyn ContentHooks>>>,
}

impl ContentService {
    pub fn new(
        store: Arc<dyn StoreBackend>,
        registry: Arc<SchemaRegistry>,
        media: Arc<MediaStore>,
        clock: SharedClock,
        permissions: PermissionTable,
    ) -> Self {
        Self {
            store,
            registry,
            media,
            clock,
            permissions: RwLock::new(permissions),
            hooks: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn set_hooks(&self, content_type: &str, hooks: Arc<dyn ContentHooks>) {
        self.hooks.write().insert(content_type.to_string(), hooks);
    }

    pub fn permissions(&self) -> parking_lot::RwLockReadGuard<'_, PermissionTable> {
        self.permissions.read()
    }

    pub fn update_permissions(&self, f: impl FnOnce(&mut PermissionTable)) {
        f(&mut self.permissions.write());
    }

    fn hooks_for(&self, content_type: &str) -> Option<Arc<dyn ContentHooks>> {
        self.hooks.read().get(content_type).cloned()
    }

    fn definition(&self, content_type: &str) -> Result<Arc<ContentTypeDefinition>, ApiError> {
        self.registry
            .get(content_type)
            .ok_or_else(|| ApiError::UnknownContentType(content_type.to_string()))
    }

    pub fn authorize(
        &self,
        principal: Option<&Principal>,
        content_type: &str,
        action: Action,
    ) -> Result<Grant, ApiError> {
        match self
            .permissions
            .read()
            .authorize(principal, content_type, action)
        {
            Decision::Allow(grant) => Ok(grant),
            Decision::Deny(reason) => Err(ApiError::Denied { reason, action }),
        }
    }

    /// Authorizes `action` on an existing document, enforcing ownership grants.
    pub fn authorize_document(
        &self,
        principal: Option<&Principal>,
        doc: &Document,
        action: Action,
    ) -> Result<(), ApiError> {
        let owner = self.owner_field(principal, &doc.collection, action)?;
        let owner_value = owner
            .as_deref()
            .and_then(|f| doc.values.get(f))
            .and_then(Value::as_str);
        match self.permissions.read().authorize_record(
            principal,
            &doc.collection,
            action,
            owner_value,
        ) {
            Decision::Allow(_) => Ok(()),
            Decision::Deny(reason) => Err(ApiError::Denied { reason, action }),
        }
    }

    fn owner_field(
        &self,
        principal: Option<&Principal>,
        content_type: &str,
        action: Action,
    ) -> Result<Option<String>, ApiError> {
        Ok(match self.authorize(principal, content_type, action)? {
            Grant::All => None,
            Grant::Owned { field } => Some(field),
        })
    }

    fn load(&self, content_type: &str, id: &str) -> Result<Document, ApiError> {
        self.store
            .get(content_type, id)?
            .ok_or_else(|| ApiError::NotFound {
                content_type: content_type.to_string(),
                id: id.to_string(),
            })
    }

    pub fn find(
        &self,
        principal: Option<&Principal>,
        content_type: &str,
        limit: usize,
        start: usize,
    ) -> Result<Vec<Document>, ApiError> {
        self.definition(content_type)?;
        let filter = match self.owner_field(principal, content_type, Action::Find)? {
            None => None,
            Some(field) => {
                let mut f = Values::new();
                let me = principal.map(|p| p.user_id.clone()).unwrap_or_default();
                f.insert(field, Value::String(me));
                Some(f)
            }
        };
        Ok(self
            .store
            .scan(content_type, limit, start, filter.as_ref())?)
    }

    pub fn find_one(
        &self,
        principal: Option<&Principal>,
        content_type: &str,
        id: &str,
    ) -> Result<Document, ApiError> {
        self.definition(content_type)?;
        self.authorize(principal, content_type, Action::FindOne)?;
        let doc = self.load(content_type, id)?;
        self.authorize_document(principal, &doc, Action::FindOne)?;
        Ok(doc)
    }

    pub fn create(
        &self,
        principal: Option<&Principal>,
        content_type: &str,
        mut values: Values,
    ) -> Result<Document, ApiError> {
        let def = self.definition(content_type)?;
        if let Some(field) = self.owner_field(principal, content_type, Action::Create)? {
            let me = principal.map(|p| p.user_id.clone()).unwrap_or_default();
            match values.get(&field) {
                None | Some(Value::Null) => {}
                Some(Value::String(s)) if *s == me => {}
                Some(_) => {
                    return Err(ApiError::Forbidden(format!(
                        "{field} must be the caller's own id"
                    )))
                }
            }
            values.insert(field, Value::String(me));
        }
        values.retain(|_, v| !v.is_null());
        let hooks = self.hooks_for(content_type);
        if let Some(h) = &hooks {
            h.before_create(principal, &mut values, self.clock.now())?;
        }
        self.check(&def, &values, None, hooks.as_deref())?;
        self.store
            .insert(content_type, values)
            .map_err(unique_to_violation)
    }

    pub fn update(
        &self,
        principal: Option<&Principal>,
        content_type: &str,
        id: &str,
        mut patch: Values,
    ) -> Result<Document, ApiError> {
        let def = self.definition(content_type)?;
        let owner = self.owner_field(principal, content_type, Action::Update)?;
        let current = self.load(content_type, id)?;
        self.authorize_document(principal, &current, Action::Update)?;
        if let Some(field) = &owner {
            if patch
                .get(field)
                .is_some_and(|v| Some(v) != current.values.get(field))
            {
                return Err(ApiError::Forbidden(format!("{field} cannot be changed")));
            }
            patch.remove(field);
        }
        let hooks = self.hooks_for(content_type);
        if let Some(h) = &hooks {
            h.before_update(principal, &current, &mut patch, self.clock.now())?;
        }
        let mut merged = current.values.clone();
        for (k, v) in &patch {
            if v.is_null() {
                merged.remove(k);
            } else {
                merged.insert(k.clone(), v.clone());
            }
        }
        self.check(&def, &merged, Some(id), hooks.as_deref())?;
        match self
            .store
            .update_if(content_type, id, patch, Some(current.updated_at))
        {
            Err(StoreError::Conflict { .. }) => Err(ApiError::Conflict(format!(
                "{content_type} {id:?} changed concurrently"
            ))),
            other => other.map_err(unique_to_violation),
        }
    }

    pub fn delete(
        &self,
        principal: Option<&Principal>,
        content_type: &str,
        id: &str,
    ) -> Result<Document, ApiError> {
        self.definition(content_type)?;
        self.authorize(principal, content_type, Action::Delete)?;
        let current = self.load(content_type, id)?;
        self.authorize_document(principal, &current, Action::Delete)?;
        Ok(self.store.delete(content_type, id)?)
    }

    /// Reads a document for an internal caller, bypassing permissions.
    pub fn get_unchecked(
        &self,
        content_type: &str,
        id: &str,
    ) -> Result<Option<Document>, ApiError> {
        Ok(self.store.get(content_type, id)?)
    }

    fn check(
        &self,
        def: &ContentTypeDefinition,
        values: &Values,
        except_id: Option<&str>,
        hooks: Option<&dyn ContentHooks>,
    ) -> Result<(), ApiError> {
        let ctx = StoreContext {
            store: self.store.as_ref(),
            media: &self.media,
        };
        let mut violations = validate_document(def, values, &ctx, except_id)
            .err()
            .unwrap_or_default();
        if violations.is_empty() {
            if let Some(h) = hooks {
                violations = h.check(values);
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ApiError::ValidationFailed(violations))
        }
    }
}

fn unique_to_violation(e: StoreError) -> ApiError {
    match e {
        StoreError::UniqueViolation { field, .. } => {
            ApiError::ValidationFailed(vec![Violation::new(
                field,
                "value already used by another document",
            )])
        }
        other => other.into(),
    }
}
