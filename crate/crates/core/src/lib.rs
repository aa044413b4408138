pub mod api;
pub mod auth;
pub mod clock;
mod fsutil;
pub mod gateway;
pub mod idcard;
pub mod query;
pub mod schema;
pub mod service;
pub mod store;

/// Field values of a stored document, keyed by field name.
pub type Values = serde_json::Map<String, serde_json::Value>;
