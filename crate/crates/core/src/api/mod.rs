//! The generated GraphQL API: schema generation, request execution, and CRUD resolvers.

mod coerce;
mod crud;
mod exec;
mod schema;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::auth::{Action, AuthError, DenyReason, Principal, UserService};
use crate::query::Pos;
use crate::schema::Violation;
use crate::store::{Document, MediaError, MediaStore, StoreError};

pub use crate::schema::enum_type_name;
pub use coerce::{coerce_json, coerce_literal, Variables};
pub use crud::{ContentHooks, ContentService, StoreContext};
pub use exec::execute;
pub use schema::{
    generate_schema, plural_field, ArgumentDef, GeneratedSchema, InputField, OutputField, Resolver,
    RootField, TypeDef, TypeRef, DEFAULT_PAGE_LIMIT, VERIFIABLE_CONTENT_TYPE,
};

/// Services the executor resolves root fields against.
pub trait Backend: Send + Sync {
    fn content(&self) -> &ContentService;
    fn users(&self) -> &UserService;
    fn media(&self) -> &MediaStore;
    /// Advances an idcard through extraction and adjudication.
    fn verify_record(&self, principal: Option<&Principal>, id: &str) -> Result<Document, ApiError>;
}

#[derive(Debug, Clone, Default)]
pub struct ExecutionContext {
    pub principal: Option<Principal>,
    pub request_id: String,
}

impl ExecutionContext {
    pub fn anonymous() -> Self {
        Self::default()
    }

    pub fn as_user(principal: Principal) -> Self {
        Self {
            principal: Some(principal),
            request_id: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    ParseFailed,
    ValidationFailed,
    BadUserInput,
    Unauthenticated,
    Forbidden,
    NotFound,
    Conflict,
    ServiceUnavailable,
    UnsupportedDocument,
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::ParseFailed => "GRAPHQL_PARSE_FAILED",
            ErrorCode::ValidationFailed => "GRAPHQL_VALIDATION_FAILED",
            ErrorCode::BadUserInput => "BAD_USER_INPUT",
            ErrorCode::Unauthenticated => "UNAUTHENTICATED",
            ErrorCode::Forbidden => "FORBIDDEN",
            ErrorCode::NotFound => "NOT_FOUND",
            ErrorCode::Conflict => "CONFLICT",
            ErrorCode::ServiceUnavailable => "SERVICE_UNAVAILABLE",
            ErrorCode::UnsupportedDocument => "UNSUPPORTED_DOCUMENT",
            ErrorCode::Internal => "INTERNAL_SERVER_ERROR",
        }
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown content type {0:?}")]
    UnknownContentType(String),
    #[error("{}", match reason { DenyReason::Anonymous => format!("authentication required for {action}"), DenyReason::Forbidden => format!("{action} is not permitted") })]
    Denied { reason: DenyReason, action: Action },
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("{content_type} {id:?} not found")]
    NotFound { content_type: String, id: String },
    #[error("validation failed: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    ValidationFailed(Vec<Violation>),
    #[error("{0}")]
    BadInput(String),
    #[error("{0}")]
    Conflict(String),
    #[error("illegal transition: {0}")]
    IllegalTransition(String),
    #[error("verification service unavailable: {0}")]
    Unavailable(String),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ApiError {
    pub fn code(&self) -> ErrorCode {
        match self {
            ApiError::UnknownContentType(_) | ApiError::NotFound { .. } => ErrorCode::NotFound,
            ApiError::Denied {
                reason: DenyReason::Anonymous,
                ..
            } => ErrorCode::Unauthenticated,
            ApiError::Denied { .. } | ApiError::Forbidden(_) => ErrorCode::Forbidden,
            ApiError::ValidationFailed(_)
            | ApiError::BadInput(_)
            | ApiError::IllegalTransition(_) => ErrorCode::BadUserInput,
            ApiError::Conflict(_) => ErrorCode::Conflict,
            ApiError::Unavailable(_) => ErrorCode::ServiceUnavailable,
            ApiError::Auth(e) => match e {
                AuthError::Expired
                | AuthError::BadSignature
                | AuthError::Malformed(_)
                | AuthError::UnknownSubject => ErrorCode::Unauthenticated,
                AuthError::Store(_) | AuthError::MalformedEncoding(_) | AuthError::Config(_) => {
                    ErrorCode::Internal
                }
                _ => ErrorCode::BadUserInput,
            },
            ApiError::Media(e) => match e {
                MediaError::NotFound(_) => ErrorCode::NotFound,
                MediaError::Store(_) | MediaError::Io(_) => ErrorCode::Internal,
                _ => ErrorCode::BadUserInput,
            },
            ApiError::Store(StoreError::NotFound { .. }) => ErrorCode::NotFound,
            ApiError::Store(StoreError::Conflict { .. }) => ErrorCode::Conflict,
            ApiError::Store(_) => ErrorCode::Internal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphQLError {
    pub message: String,
    pub path: Vec<Value>,
    pub locations: Vec<Pos>,
    pub code: ErrorCode,
    pub violations: Vec<Violation>,
}

impl GraphQLError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            path: Vec::new(),
            locations: Vec::new(),
            code,
            violations: Vec::new(),
        }
    }

    pub fn at(mut self, pos: Pos) -> Self {
        self.locations.push(pos);
        self
    }

    pub fn with_path(mut self, path: &[Value]) -> Self {
        self.path = path.to_vec();
        self
    }

    pub fn from_api(e: &ApiError) -> Self {
        let mut err = Self::new(e.code(), e.to_string());
        if let ApiError::ValidationFailed(v) = e {
            err.violations = v.clone();
        }
        err
    }

    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        out.insert("message".into(), json!(self.message));
        if !self.locations.is_empty() {
            let locs: Vec<Value> = self
                .locations
                .iter()
                .map(|p| json!({"line": p.line, "column": p.column}))
                .collect();
            out.insert("locations".into(), Value::Array(locs));
        }
        if !self.path.is_empty() {
            out.insert("path".into(), Value::Array(self.path.clone()));
        }
        let mut ext = Map::new();
        ext.insert("code".into(), json!(self.code.as_str()));
        if !self.violations.is_empty() {
            ext.insert("violations".into(), json!(self.violations));
        }
        out.insert("extensions".into(), Value::Object(ext));
        Value::Object(out)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionResult {
    /// `None` when the request failed before execution began.
    pub data: Option<Value>,
    pub errors: Vec<GraphQLError>,
}

impl ExecutionResult {
    pub fn error(e: GraphQLError) -> Self {
        Self {
            data: None,
            errors: vec![e],
        }
    }

    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        if let Some(data) = &self.data {
            out.insert("data".into(), data.clone());
        }
        if !self.errors.is_empty() {
            out.insert(
                "errors".into(),
                Value::Array(self.errors.iter().map(GraphQLError::to_json).collect()),
            );
        }
        Value::Object(out)
    }
}
