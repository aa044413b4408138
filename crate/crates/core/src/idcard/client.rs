//! The verification service contract, the bundled deterministic mock, and an HTTP client.

use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::clock::{format_datetime, parse_date};
use crate::Values;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceBox {
    pub top: i64,
    pub left: i64,
    pub width: i64,
    pub height: i64,
}

impl FaceBox {
    /// Reads `faceTop`/`faceLeft`/`faceWidth`/`faceHeight`; `None` unless all four are integers.
    pub fn from_values(values: &Values) -> Option<FaceBox> {
        let get = |k: &str| values.get(k).and_then(Value::as_i64);
        Some(FaceBox {
            top: get("faceTop")?,
            left: get("faceLeft")?,
            width: get("faceWidth")?,
            height: get("faceHeight")?,
        })
    }

    pub fn write_to(&self, values: &mut Values) {
        values.insert("faceTop".into(), self.top.into());
        values.insert("faceLeft".into(), self.left.into());
        values.insert("faceWidth".into(), self.width.into());
        values.insert("faceHeight".into(), self.height.into());
    }

    /// Describes why the box does not fit a `width`×`height` image, if it does not.
    pub fn out_of_bounds(&self, width: u32, height: u32) -> Option<String> {
        if self.top < 0 || self.left < 0 {
            return Some("faceTop and faceLeft must not be negative".into());
        }
        if self.width <= 0 || self.height <= 0 {
            return Some("faceWidth and faceHeight must be positive".into());
        }
        if self.left + self.width > i64::from(width) {
            return Some(format!(
                "faceLeft + faceWidth = {} exceeds image width {width}",
                self.left + self.width
            ));
        }
        if self.top + self.height > i64::from(height) {
            return Some(format!(
                "faceTop + faceHeight = {} exceeds image height {height}",
                self.top + self.height
            ));
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerificationDecision {
    Verified,
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRequest {
    pub card_image: Vec<u8>,
    pub mime_type: String,
    pub declared: Values,
    pub requested_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationResponse {
    pub decision: VerificationDecision,
    #[serde(default)]
    pub fields: Values,
    #[serde(default)]
    pub face_box: Option<FaceBox>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reasons: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("verification service transport failure: {0}")]
    Transport(String),
    #[error("verification service returned an unusable response: {0}")]
    BadResponse(String),
}

pub trait VerificationClient: Send + Sync {
    fn verify(&self, request: &VerificationRequest) -> Result<VerificationResponse, ClientError>;
}

/// In-process verifier with fixed rules: a card is rejected when it has expired, when a
/// national id is not 16 digits, or when no face box was declared.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockVerifier;

impl VerificationClient for MockVerifier {
    fn verify(&self, request: &VerificationRequest) -> Result<VerificationResponse, ClientError> {
        let declared = &request.declared;
        let text = |k: &str| declared.get(k).and_then(Value::as_str);
        let mut reasons = Vec::new();
        if let Some(expiry) = text("expiryDate").and_then(parse_date) {
            if expiry < request.requested_at.date_naive() {
                reasons.push(format!("card expired on {expiry}"));
            }
        }
        if text("kind") == Some("NATIONAL_ID") {
            let id = text("identifier").unwrap_or_default();
            if id.len() != 16 || !id.bytes().all(|b| b.is_ascii_digit()) {
                reasons.push("national id must be 16 digits".into());
            }
        }
        let face_box = FaceBox::from_values(declared);
        if face_box.is_none() {
            reasons.push("no face box".into());
        }
        Ok(VerificationResponse {
            decision: if reasons.is_empty() {
                VerificationDecision::Verified
            } else {
                VerificationDecision::Rejected
            },
            fields: declared.clone(),
            face_box,
            reasons,
        })
    }
}

/// Posts `multipart/form-data` with parts `cardImage` (the bytes), `fields` (declared
/// fields as JSON) and `requestedAt` (RFC 3339), and expects a [`VerificationResponse`] as JSON.
pub struct HttpVerificationClient {
    url: String,
    http: reqwest::blocking::Client,
}

impl HttpVerificationClient {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self {
            url: url.into(),
            http,
        })
    }
}

impl VerificationClient for HttpVerificationClient {
    fn verify(&self, request: &VerificationRequest) -> Result<VerificationResponse, ClientError> {
        let image = reqwest::blocking::multipart::Part::bytes(request.card_image.clone())
            .file_name("card")
            .mime_str(&request.mime_type)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let form = reqwest::blocking::multipart::Form::new()
            .part("cardImage", image)
            .text(
                "fields",
                Value::Object(request.declared.clone()).to_string(),
            )
            .text("requestedAt", format_datetime(&request.requested_at));
        let response = self
            .http
            .post(&self.url)
            .multipart(form)
            .send()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(ClientError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(ClientError::BadResponse(format!("HTTP {status}")));
        }
        response
            .json()
            .map_err(|e| ClientError::BadResponse(e.to_string()))
    }
}
