//! The idcard content type and its verification workflow.

mod client;
mod definition;
mod status;
mod workflow;

pub use client::{
    ClientError, FaceBox, HttpVerificationClient, MockVerifier, VerificationClient,
    VerificationDecision, VerificationRequest, VerificationResponse,
};
pub use definition::{
    idcard_definition, BLOOD_TYPE_VALUES, FACE_BOX_FIELDS, GENDER_VALUES, IDCARD, KIND_VALUES,
    MARRIAGE_STATUS_VALUES, MEDIA_FIELDS, WORKFLOW_FIELDS,
};
pub use status::VerificationStatus;
pub use workflow::{status_of, IdcardHooks, Workflow, WorkflowError};
