use crate::schema::{ContentTypeDefinition, FieldDefinition, FieldKind};

use super::VerificationStatus;

pub const IDCARD: &str = "idcard";

pub const KIND_VALUES: [&str; 3] = ["NATIONAL_ID", "PASSPORT", "DRIVER_LICENSE"];
pub const GENDER_VALUES: [&str; 2] = ["MALE", "FEMALE"];
pub const BLOOD_TYPE_VALUES: [&str; 5] = ["A", "B", "AB", "O", "UNKNOWN"];
pub const MARRIAGE_STATUS_VALUES: [&str; 4] = ["SINGLE", "MARRIED", "DIVORCED", "WIDOWED"];

/// Fields only the verification workflow may write.
pub const WORKFLOW_FIELDS: [&str; 5] = [
    "statusCode",
    "uploadedAt",
    "extractedAt",
    "verifiedAt",
    "uploaderId",
];
pub const FACE_BOX_FIELDS: [&str; 4] = ["faceTop", "faceLeft", "faceWidth", "faceHeight"];
pub const MEDIA_FIELDS: [&str; 3] = ["facePhoto", "cardImage", "personWithCardPhoto"];

/// The identity-card content type: 29 fields in their canonical order.
pub fn idcard_definition() -> ContentTypeDefinition {
    use FieldKind::*;
    let f = FieldDefinition::new;
    let statuses: Vec<&str> = VerificationStatus::ALL.iter().map(|s| s.as_str()).collect();
    ContentTypeDefinition::new(
        IDCARD,
        vec![
            FieldDefinition::enumeration("kind", KIND_VALUES).required(),
            f("identifier", ShortText).required(),
            f("name", ShortText).required(),
            f("birthPlace", ShortText),
            f("birthDate", Date),
            FieldDefinition::enumeration("gender", GENDER_VALUES),
            FieldDefinition::enumeration("bloodType", BLOOD_TYPE_VALUES),
            f("address", LongText),
            f("religion", ShortText),
            FieldDefinition::enumeration("marriageStatus", MARRIAGE_STATUS_VALUES),
            f("occupation", ShortText),
            f("nationalityCode", ShortText),
            f("expiryDate", Date),
            f("facePhoto", SingleMedia),
            f("cardImage", SingleMedia).required(),
            f("personWithCardPhoto", SingleMedia),
            f("issuerCountryCode", ShortText),
            f("issuedDate", Date),
            f("faceTop", Integer),
            f("faceLeft", Integer),
            f("faceWidth", Integer),
            f("faceHeight", Integer),
            FieldDefinition::enumeration("statusCode", statuses),
            f("uploadedAt", Datetime),
            f("extractedAt", Datetime),
            f("verifiedAt", Datetime),
            f("issuerProvince", ShortText),
            f("issuerCity", ShortText),
            f("uploaderId", ShortText),
        ],
    )
}
