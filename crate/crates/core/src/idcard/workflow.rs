use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde_json::Value;
use thiserror::Error;

use super::client::{
    ClientError, FaceBox, VerificationClient, VerificationDecision, VerificationRequest,
    VerificationResponse,
};
use super::definition::{FACE_BOX_FIELDS, IDCARD, MEDIA_FIELDS, WORKFLOW_FIELDS};
use super::VerificationStatus;
use crate::api::{ApiError, ContentHooks, ContentService, StoreContext};
use crate::auth::{Action, Principal};
use crate::clock::{format_datetime, parse_datetime, SharedClock};
use crate::schema::{validate_document, SchemaRegistry, Violation};
use crate::store::{Document, MediaError, MediaStore, StoreBackend, StoreError};
use crate::Values;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("idcard {0:?} not found")]
    NotFound(String),
    #[error("cannot move idcard from {from} to {to}")]
    IllegalTransition {
        from: VerificationStatus,
        to: VerificationStatus,
    },
    #[error("face box out of bounds: {0}")]
    FaceBoxOutOfBounds(String),
    #[error("media {0:?} not found")]
    MediaNotFound(String),
    #[error("extracted values are invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidExtraction(Vec<Violation>),
    #[error(transparent)]
    ClientUnavailable(#[from] ClientError),
    #[error("idcard {0:?} changed concurrently")]
    Conflict(String),
    #[error(transparent)]
    Api(#[from] ApiError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Media(#[from] MediaError),
}

impl From<WorkflowError> for ApiError {
    fn from(e: WorkflowError) -> Self {
        match e {
            WorkflowError::NotFound(id) => ApiError::NotFound {
                content_type: IDCARD.into(),
                id,
            },
            WorkflowError::IllegalTransition { .. } => ApiError::IllegalTransition(e.to_string()),
            WorkflowError::FaceBoxOutOfBounds(why) => {
                ApiError::ValidationFailed(vec![Violation::new("faceLeft", why)])
            }
            WorkflowError::MediaNotFound(id) => ApiError::Media(MediaError::NotFound(id)),
            WorkflowError::InvalidExtraction(v) => ApiError::ValidationFailed(v),
            WorkflowError::ClientUnavailable(c) => ApiError::Unavailable(c.to_string()),
            WorkflowError::Conflict(_) => ApiError::Conflict(e.to_string()),
            WorkflowError::Api(a) => a,
            WorkflowError::Store(s) => ApiError::Store(s),
            WorkflowError::Media(m) => ApiError::Media(m),
        }
    }
}

pub fn status_of(doc: &Document) -> VerificationStatus {
    doc.values
        .get("statusCode")
        .and_then(Value::as_str)
        .and_then(|s| s.parse().ok())
        .unwrap_or(VerificationStatus::Uploaded)
}

/// `now`, but never earlier than the timestamp stored under `floor`.
fn stamp(now: DateTime<Utc>, values: &Values, floor: &str) -> String {
    let floor = values
        .get(floor)
        .and_then(Value::as_str)
        .and_then(parse_datetime);
    format_datetime(&floor.map_or(now, |f| f.max(now)))
}

fn is_empty(v: Option<&Value>) -> bool {
    match v {
        None | Some(Value::Null) => true,
        Some(Value::String(s)) => s.is_empty(),
        _ => false,
    }
}

fn card_dimensions(media: &MediaStore, values: &Values) -> Result<(u32, u32), WorkflowError> {
    let id = values
        .get("cardImage")
        .and_then(Value::as_str)
        .unwrap_or_default();
    match media.get_asset(id)? {
        Some(asset) => Ok((asset.width, asset.height)),
        None => Err(WorkflowError::MediaNotFound(id.to_string())),
    }
}

/// Keeps workflow-owned fields out of client hands and enforces cross-field invariants.
pub struct IdcardHooks {
    media: Arc<MediaStore>,
}

impl IdcardHooks {
    pub fn new(media: Arc<MediaStore>) -> Self {
        Self { media }
    }
}

impl ContentHooks for IdcardHooks {
    fn before_create(
        &self,
        principal: Option<&Principal>,
        values: &mut Values,
        now: DateTime<Utc>,
    ) -> Result<(), ApiError> {
        for field in WORKFLOW_FIELDS.iter().filter(|f| **f != "uploaderId") {
            if values.contains_key(*field) {
                return Err(ApiError::BadInput(format!(
                    "{field} is managed by the verification workflow"
                )));
            }
        }
        if let Some(p) = principal {
            match values.get("uploaderId").and_then(Value::as_str) {
                Some(id) if id != p.user_id => {
                    return Err(ApiError::Forbidden(
                        "uploaderId must be the caller's own id".into(),
                    ))
                }
                _ => {
                    values.insert("uploaderId".into(), Value::String(p.user_id.clone()));
                }
            }
        }
        values.insert(
            "statusCode".into(),
            VerificationStatus::Uploaded.as_str().into(),
        );
        values.insert("uploadedAt".into(), format_datetime(&now).into());
        Ok(())
    }

    fn before_update(
        &self,
        _principal: Option<&Principal>,
        current: &Document,
        patch: &mut Values,
        _now: DateTime<Utc>,
    ) -> Result<(), ApiError> {
        let status = status_of(current);
        if status != VerificationStatus::Uploaded {
            return Err(ApiError::BadInput(format!(
                "idcard {} is {status} and can no longer be edited",
                current.id
            )));
        }
        for field in WORKFLOW_FIELDS {
            if let Some(v) = patch.remove(field) {
                let unchanged = match &v {
                    Value::Null => !current.values.contains_key(field),
                    v => current.values.get(field) == Some(v),
                };
                if !unchanged {
                    return Err(ApiError::BadInput(format!(
                        "{field} is managed by the verification workflow"
                    )));
                }
            }
        }
        Ok(())
    }

    fn check(&self, values: &Values) -> Vec<Violation> {
        let mut violations = Vec::new();
        let present = FACE_BOX_FIELDS
            .iter()
            .filter(|f| !is_empty(values.get(**f)))
            .count();
        if present != 0 && present != FACE_BOX_FIELDS.len() {
            let missing = FACE_BOX_FIELDS
                .iter()
                .find(|f| is_empty(values.get(**f)))
                .unwrap();
            violations.push(Violation::new(
                *missing,
                "face box fields must be set together",
            ));
        }
        if let Some(face) = FaceBox::from_values(values) {
            match card_dimensions(&self.media, values) {
                Ok((w, h)) => {
                    if let Some(why) = face.out_of_bounds(w, h) {
                        violations.push(Violation::new("faceLeft", why));
                    }
                }
                Err(_) => {
                    violations.push(Violation::new("cardImage", "a face box needs a card image"))
                }
            }
        }
        let times: Vec<(&str, DateTime<Utc>)> = ["uploadedAt", "extractedAt", "verifiedAt"]
            .into_iter()
            .filter_map(|k| {
                values
                    .get(k)
                    .and_then(Value::as_str)
                    .and_then(parse_datetime)
                    .map(|t| (k, t))
            })
            .collect();
        for pair in times.windows(2) {
            if pair[0].1 > pair[1].1 {
                violations.push(Violation::new(
                    pair[1].0,
                    format!("must not precede {}", pair[0].0),
                ));
            }
        }
        violations
    }
}

/// Moves idcards through UPLOADED → EXTRACTED → VERIFIED | REJECTED.
pub struct Workflow {
    content: Arc<ContentService>,
    store: Arc<dyn StoreBackend>,
    media: Arc<MediaStore>,
    registry: Arc<SchemaRegistry>,
    clock: SharedClock,
}

impl Workflow {
    pub fn new(
        content: Arc<ContentService>,
        store: Arc<dyn StoreBackend>,
        media: Arc<MediaStore>,
        registry: Arc<SchemaRegistry>,
        clock: SharedClock,
    ) -> Self {
        Self {
            content,
            store,
            media,
            registry,
            clock,
        }
    }

    fn load(&self, id: &str) -> Result<Document, WorkflowError> {
        self.store
            .get(IDCARD, id)?
            .ok_or_else(|| WorkflowError::NotFound(id.to_string()))
    }

    pub fn status(&self, id: &str) -> Result<VerificationStatus, WorkflowError> {
        Ok(status_of(&self.load(id)?))
    }

    /// Creates an UPLOADED record owned by the caller.
    pub fn create_card(
        &self,
        principal: Option<&Principal>,
        mut declared: Values,
        card_image: &str,
    ) -> Result<Document, WorkflowError> {
        self.content.authorize(principal, IDCARD, Action::Create)?;
        if self.media.get_asset(card_image)?.is_none() {
            return Err(WorkflowError::MediaNotFound(card_image.to_string()));
        }
        declared.insert("cardImage".into(), Value::String(card_image.to_string()));
        Ok(self.content.create(principal, IDCARD, declared)?)
    }

    fn write(&self, doc: &Document, patch: Values) -> Result<Document, WorkflowError> {
        match self
            .store
            .update_if(IDCARD, &doc.id, patch, Some(doc.updated_at))
        {
            Err(StoreError::Conflict { id, .. }) => Err(WorkflowError::Conflict(id)),
            other => Ok(other?),
        }
    }

    /// UPLOADED → EXTRACTED. Extracted values only fill fields the uploader left empty.
    pub fn record_extraction(
        &self,
        id: &str,
        extracted: &Values,
        face_box: Option<FaceBox>,
    ) -> Result<Document, WorkflowError> {
        let doc = self.load(id)?;
        let from = status_of(&doc);
        if !from.can_transition_to(VerificationStatus::Extracted) {
            return Err(WorkflowError::IllegalTransition {
                from,
                to: VerificationStatus::Extracted,
            });
        }
        let def = self
            .registry
            .get(IDCARD)
            .ok_or_else(|| ApiError::UnknownContentType(IDCARD.into()))?;
        let mut patch = Values::new();
        if let Some(face) = face_box {
            let (w, h) = card_dimensions(&self.media, &doc.values)?;
            if let Some(why) = face.out_of_bounds(w, h) {
                return Err(WorkflowError::FaceBoxOutOfBounds(why));
            }
            face.write_to(&mut patch);
        }
        for (key, value) in extracted {
            let managed =
                WORKFLOW_FIELDS.contains(&key.as_str()) || FACE_BOX_FIELDS.contains(&key.as_str());
            if !managed
                && def.field(key).is_some()
                && !value.is_null()
                && is_empty(doc.values.get(key))
            {
                patch.insert(key.clone(), value.clone());
            }
        }
        patch.insert(
            "statusCode".into(),
            VerificationStatus::Extracted.as_str().into(),
        );
        patch.insert(
            "extractedAt".into(),
            stamp(self.clock.now(), &doc.values, "uploadedAt").into(),
        );

        let mut merged = doc.values.clone();
        merged.extend(patch.clone());
        let ctx = StoreContext {
            store: self.store.as_ref(),
            media: &self.media,
        };
        validate_document(&def, &merged, &ctx, Some(id))
            .map_err(WorkflowError::InvalidExtraction)?;
        self.write(&doc, patch)
    }

    fn request_for(&self, doc: &Document) -> Result<VerificationRequest, WorkflowError> {
        let card_id = doc
            .values
            .get("cardImage")
            .and_then(Value::as_str)
            .unwrap_or_default();
        let asset = self
            .media
            .get_asset(card_id)?
            .ok_or_else(|| WorkflowError::MediaNotFound(card_id.to_string()))?;
        let card_image = self.media.load_blob(&asset.sha256_hex)?;
        let declared = doc
            .values
            .iter()
            .filter(|(k, _)| {
                !WORKFLOW_FIELDS.contains(&k.as_str()) && !MEDIA_FIELDS.contains(&k.as_str())
            })
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(VerificationRequest {
            card_image,
            mime_type: asset.mime_type,
            declared,
            requested_at: self.clock.now(),
        })
    }

    fn ask(
        &self,
        client: &dyn VerificationClient,
        doc: &Document,
    ) -> Result<VerificationResponse, WorkflowError> {
        let request = self.request_for(doc)?;
        Ok(client.verify(&request)?)
    }

    fn adjudicate(
        &self,
        doc: &Document,
        decision: VerificationDecision,
    ) -> Result<Document, WorkflowError> {
        let to = match decision {
            VerificationDecision::Verified => VerificationStatus::Verified,
            VerificationDecision::Rejected => VerificationStatus::Rejected,
        };
        let from = status_of(doc);
        if !from.can_transition_to(to) {
            return Err(WorkflowError::IllegalTransition { from, to });
        }
        let mut patch = Values::new();
        patch.insert("statusCode".into(), to.as_str().into());
        patch.insert(
            "verifiedAt".into(),
            stamp(self.clock.now(), &doc.values, "extractedAt").into(),
        );
        self.write(doc, patch)
    }

    /// EXTRACTED → VERIFIED | REJECTED per the client's decision. A client failure
    /// leaves the record untouched.
    pub fn run_verification(
        &self,
        id: &str,
        client: &dyn VerificationClient,
    ) -> Result<Document, WorkflowError> {
        let doc = self.load(id)?;
        let from = status_of(&doc);
        if from != VerificationStatus::Extracted {
            return Err(WorkflowError::IllegalTransition {
                from,
                to: VerificationStatus::Verified,
            });
        }
        let response = self.ask(client, &doc)?;
        self.adjudicate(&doc, response.decision)
    }

    /// Takes a record as far as one client call allows: an UPLOADED record is extracted
    /// and adjudicated from the same response, an EXTRACTED one is adjudicated.
    pub fn advance(
        &self,
        id: &str,
        client: &dyn VerificationClient,
    ) -> Result<Document, WorkflowError> {
        let doc = self.load(id)?;
        match status_of(&doc) {
            VerificationStatus::Uploaded => {
                let response = self.ask(client, &doc)?;
                let extracted = self.record_extraction(id, &response.fields, response.face_box)?;
                self.adjudicate(&extracted, response.decision)
            }
            VerificationStatus::Extracted => self.run_verification(id, client),
            from => Err(WorkflowError::IllegalTransition {
                from,
                to: VerificationStatus::Verified,
            }),
        }
    }

    /// [`advance`](Self::advance) on behalf of `principal`, who must own the record.
    pub fn advance_as(
        &self,
        principal: Option<&Principal>,
        id: &str,
        client: &dyn VerificationClient,
    ) -> Result<Document, WorkflowError> {
        self.content.authorize(principal, IDCARD, Action::Verify)?;
        let doc = self.load(id)?;
        self.content
            .authorize_document(principal, &doc, Action::Verify)?;
        self.advance(id, client)
    }
}
