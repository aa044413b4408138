use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;

use super::SchemaError;

static IDENTIFIER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_][A-Za-z0-9_]*$").unwrap());
static TYPE_NAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[a-z][a-z0-9_]*$").unwrap());

/// Names owned by the engine itself.
pub const RESERVED_TYPE_NAMES: [&str; 2] = ["user", "media"];

/// Attributes every stored document carries in addition to its declared fields.
pub const SYSTEM_FIELDS: [&str; 3] = ["id", "createdAt", "updatedAt"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FieldKind {
    ShortText,
    LongText,
    RichText,
    Integer,
    BigInteger,
    Decimal,
    Float,
    Date,
    Datetime,
    Time,
    Boolean,
    Relation,
    Email,
    Password,
    Enumeration,
    SingleMedia,
    MultipleMedia,
    Json,
    Uid,
}

impl FieldKind {
    pub const ALL: [FieldKind; 19] = [
        FieldKind::ShortText,
        FieldKind::LongText,
        FieldKind::RichText,
        FieldKind::Integer,
        FieldKind::BigInteger,
        FieldKind::Decimal,
        FieldKind::Float,
        FieldKind::Date,
        FieldKind::Datetime,
        FieldKind::Time,
        FieldKind::Boolean,
        FieldKind::Relation,
        FieldKind::Email,
        FieldKind::Password,
        FieldKind::Enumeration,
        FieldKind::SingleMedia,
        FieldKind::MultipleMedia,
        FieldKind::Json,
        FieldKind::Uid,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FieldKind::ShortText => "SHORT_TEXT",
            FieldKind::LongText => "LONG_TEXT",
            FieldKind::RichText => "RICH_TEXT",
            FieldKind::Integer => "INTEGER",
            FieldKind::BigInteger => "BIG_INTEGER",
            FieldKind::Decimal => "DECIMAL",
            FieldKind::Float => "FLOAT",
            FieldKind::Date => "DATE",
            FieldKind::Datetime => "DATETIME",
            FieldKind::Time => "TIME",
            FieldKind::Boolean => "BOOLEAN",
            FieldKind::Relation => "RELATION",
            FieldKind::Email => "EMAIL",
            FieldKind::Password => "PASSWORD",
            FieldKind::Enumeration => "ENUMERATION",
            FieldKind::SingleMedia => "SINGLE_MEDIA",
            FieldKind::MultipleMedia => "MULTIPLE_MEDIA",
            FieldKind::Json => "JSON",
            FieldKind::Uid => "UID",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FieldKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FieldKind::ALL
            .iter()
            .copied()
            .find(|k| k.tag() == s)
            .ok_or_else(|| format!("unknown field kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FieldDefinition {
    pub name: String,
    pub kind: FieldKind,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub unique: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enum_values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation_target: Option<String>,
}

impl FieldDefinition {
    pub fn new(name: impl Into<String>, kind: FieldKind) -> Self {
        Self {
            name: name.into(),
            kind,
            required: false,
            unique: kind == FieldKind::Uid,
            enum_values: None,
            relation_target: None,
        }
    }

    pub fn enumeration<I, S>(name: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut def = Self::new(name, FieldKind::Enumeration);
        def.enum_values = Some(values.into_iter().map(Into::into).collect());
        def
    }

    pub fn relation(name: impl Into<String>, target: impl Into<String>) -> Self {
        let mut def = Self::new(name, FieldKind::Relation);
        def.relation_target = Some(target.into());
        def
    }

    pub fn required(mut self) -> Self {
        self.required = true;
        self
    }

    pub fn unique(mut self) -> Self {
        self.unique = true;
        self
    }

    /// Checks the invariants that can be decided without looking at other types.
    pub(crate) fn check_shape(&self) -> Result<(), SchemaError> {
        let invalid = |reason: &str| SchemaError::InvalidFieldDefinition {
            field: self.name.clone(),
            reason: reason.to_string(),
        };
        if !IDENTIFIER.is_match(&self.name) {
            return Err(invalid("name must match [A-Za-z_][A-Za-z0-9_]*"));
        }
        if SYSTEM_FIELDS.contains(&self.name.as_str()) {
            return Err(invalid("name collides with a system attribute"));
        }
        match (&self.enum_values, self.kind) {
            (Some(values), FieldKind::Enumeration) => {
                if values.is_empty() {
                    return Err(invalid("enumValues must not be empty"));
                }
                let mut seen = HashSet::new();
                for value in values {
                    if !IDENTIFIER.is_match(value) {
                        return Err(invalid(&format!(
                            "enum value {value:?} is not a valid name"
                        )));
                    }
                    if matches!(value.as_str(), "true" | "false" | "null") {
                        return Err(invalid(&format!("enum value {value:?} is reserved")));
                    }
                    if !seen.insert(value) {
                        return Err(invalid(&format!("enum value {value:?} repeated")));
                    }
                }
            }
            (None, FieldKind::Enumeration) => {
                return Err(invalid("ENUMERATION requires enumValues"))
            }
            (Some(_), _) => return Err(invalid("enumValues only allowed on ENUMERATION")),
            (None, _) => {}
        }
        match (&self.relation_target, self.kind) {
            (None, FieldKind::Relation) => return Err(invalid("RELATION requires relationTarget")),
            (Some(_), kind) if kind != FieldKind::Relation => {
                return Err(invalid("relationTarget only allowed on RELATION"))
            }
            _ => {}
        }
        if self.kind == FieldKind::Uid && !self.unique {
            return Err(invalid("UID fields must be unique"));
        }
        if self.unique
            && matches!(
                self.kind,
                FieldKind::Password | FieldKind::Json | FieldKind::MultipleMedia
            )
        {
            return Err(invalid(&format!("{} fields cannot be unique", self.kind)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContentTypeDefinition {
    pub name: String,
    pub fields: Vec<FieldDefinition>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_ts")]
    pub created_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_ts")]
    pub updated_at: Option<DateTime<Utc>>,
}

impl ContentTypeDefinition {
    pub fn new(name: impl Into<String>, fields: Vec<FieldDefinition>) -> Self {
        Self {
            name: name.into(),
            fields,
            created_at: None,
            updated_at: None,
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldDefinition> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// GraphQL object type name: `idcard` becomes `Idcard`.
    pub fn type_name(&self) -> String {
        type_name_of(&self.name)
    }

    /// Same definition with timestamps stripped, for structural comparisons.
    pub fn shape(&self) -> (&str, &[FieldDefinition]) {
        (&self.name, &self.fields)
    }

    /// Invariants local to this definition (names, field shapes, duplicates).
    pub(crate) fn check_shape(&self) -> Result<(), SchemaError> {
        if !TYPE_NAME.is_match(&self.name) {
            return Err(SchemaError::InvalidTypeName {
                name: self.name.clone(),
                reason: "must be lowercase and match [a-z][a-z0-9_]*".into(),
            });
        }
        if RESERVED_TYPE_NAMES.contains(&self.name.as_str()) {
            return Err(SchemaError::ReservedName(self.name.clone()));
        }
        if self.fields.is_empty() {
            return Err(SchemaError::InvalidFieldDefinition {
                field: self.name.clone(),
                reason: "a content type needs at least one field".into(),
            });
        }
        let mut seen = HashSet::new();
        for field in &self.fields {
            field.check_shape()?;
            if !seen.insert(field.name.as_str()) {
                return Err(SchemaError::InvalidFieldDefinition {
                    field: field.name.clone(),
                    reason: "field name repeated".into(),
                });
            }
        }
        Ok(())
    }
}

/// GraphQL enum generated for an ENUMERATION field.
pub fn enum_type_name(content_type: &str, field: &str) -> String {
    format!(
        "ENUM_{}_{}",
        content_type.to_ascii_uppercase(),
        field.to_ascii_uppercase()
    )
}

pub fn type_name_of(content_type: &str) -> String {
    let mut chars = content_type.chars();
    match chars.next() {
        Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

mod opt_ts {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => crate::clock::rfc3339_millis::serialize(t, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        match Option::<String>::deserialize(d)? {
            None => Ok(None),
            Some(raw) => crate::clock::parse_datetime(&raw)
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp {raw:?}"))),
        }
    }
}
