//! Accounts, password hashing, bearer tokens, and the permission table.

mod password;
mod permissions;
mod token;
mod users;

use thiserror::Error;

use crate::store::StoreError;

pub use password::{
    hash_password, random_salt, verify_password, DEFAULT_ITERATIONS, MIN_SALT_BYTES,
};
pub use permissions::{
    Action, Decision, DenyReason, Grant, PermissionTable, Principal, Role, IDCARD_SCOPE,
    MEDIA_SCOPE, OWNER_FIELD, USER_SCOPE,
};
pub use token::{Claims, TokenSigner, DEFAULT_TTL_SECONDS};
pub use users::{
    AuthSettings, LoginResult, UserService, UserView, MIN_PASSWORD_CHARS, USER_COLLECTION,
};

#[derive(Debug, Error)]
pub enum AuthError {
    #[error("username is already taken")]
    DuplicateUsername,
    #[error("email is already registered")]
    DuplicateEmail,
    #[error("password must be at least {MIN_PASSWORD_CHARS} characters")]
    WeakPassword,
    #[error("invalid username: {0}")]
    InvalidUsername(String),
    #[error("invalid email address")]
    InvalidEmail,
    #[error("invalid identifier or password")]
    InvalidCredentials,
    #[error("token has expired")]
    Expired,
    #[error("token signature does not verify")]
    BadSignature,
    #[error("malformed token: {0}")]
    Malformed(&'static str),
    #[error("token subject no longer exists")]
    UnknownSubject,
    #[error("malformed password hash: {0}")]
    MalformedEncoding(String),
    #[error("auth configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}
