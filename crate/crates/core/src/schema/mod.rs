//! Content-type definitions: the typed field system, the persistent registry, and
//! document validation against a definition.

mod field;
mod registry;
mod validate;

use std::path::PathBuf;

use thiserror::Error;

pub use field::{
    enum_type_name, type_name_of, ContentTypeDefinition, FieldDefinition, FieldKind,
    RESERVED_TYPE_NAMES, SYSTEM_FIELDS,
};
pub use registry::{RegistrySnapshot, SchemaRegistry, BUILTIN_ROOT_FIELDS, BUILTIN_TYPE_NAMES};
pub use validate::{
    check_value, validate_document, Detached, ValidationContext, Violation, SHORT_TEXT_MAX_CHARS,
};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("content type {0:?} is already registered")]
    DuplicateName(String),
    #[error("content type name {0:?} is reserved")]
    ReservedName(String),
    #[error("invalid content type name {name:?}: {reason}")]
    InvalidTypeName { name: String, reason: String },
    #[error("invalid field {field:?}: {reason}")]
    InvalidFieldDefinition { field: String, reason: String },
    #[error("unknown content type {0:?}")]
    UnknownContentType(String),
    #[error("incompatible change to field {field:?}: {reason}")]
    IncompatibleChange { field: String, reason: String },
    #[error("corrupt definition file {}: {reason}", path.display())]
    Corrupt { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
