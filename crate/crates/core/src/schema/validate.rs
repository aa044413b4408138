use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;
use serde_json::Value;

use super::{ContentTypeDefinition, FieldDefinition, FieldKind};
use crate::clock::{parse_date, parse_datetime, parse_time};
use crate::Values;

static MAILBOX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[^\s@]+@[^\s@.]+(\.[^\s@.]+)+$").unwrap());
static UID_CHARS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Za-z0-9_.~-]+$").unwrap());
static DECIMAL_INTEGER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^-?(0|[1-9][0-9]*)$").unwrap());

pub const SHORT_TEXT_MAX_CHARS: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

/// Lookups against stored state that document validation needs.
pub trait ValidationContext {
    /// Whether another document of `collection` (other than `except_id`) already holds `value` in `field`.
    fn value_taken(
        &self,
        collection: &str,
        field: &str,
        value: &Value,
        except_id: Option<&str>,
    ) -> bool;
    fn media_exists(&self, id: &str) -> bool;
    fn document_exists(&self, collection: &str, id: &str) -> bool;
}

/// Context with no stored state: nothing is taken and every reference resolves.
#[derive(Debug, Default, Clone, Copy)]
pub struct Detached;

impl ValidationContext for Detached {
    fn value_taken(&self, _: &str, _: &str, _: &Value, _: Option<&str>) -> bool {
        false
    }
    fn media_exists(&self, _: &str) -> bool {
        true
    }
    fn document_exists(&self, _: &str, _: &str) -> bool {
        true
    }
}

/// Checks a single non-null value against its field definition, ignoring stored state.
pub fn check_value(field: &FieldDefinition, value: &Value) -> Result<(), String> {
    let want = |what: &str| Err(format!("expected {what}"));
    match field.kind {
        FieldKind::ShortText => match value {
            Value::String(s) if s.chars().count() <= SHORT_TEXT_MAX_CHARS => Ok(()),
            Value::String(_) => Err(format!("longer than {SHORT_TEXT_MAX_CHARS} characters")),
            _ => want("a string"),
        },
        FieldKind::LongText | FieldKind::RichText => match value {
            Value::String(_) => Ok(()),
            _ => want("a string"),
        },
        FieldKind::Password => match value {
            Value::String(s) if !s.is_empty() => Ok(()),
            _ => want("a non-empty string"),
        },
        FieldKind::Integer => match value.as_i64() {
            Some(n) if i32::try_from(n).is_ok() => Ok(()),
            Some(_) => Err("outside the 32-bit integer range".into()),
            None => want("an integer"),
        },
        FieldKind::BigInteger => match value {
            Value::String(s) if DECIMAL_INTEGER.is_match(s) && s.parse::<i64>().is_ok() => Ok(()),
            Value::String(_) => want("a 64-bit integer as a decimal string"),
            _ => want("a decimal string"),
        },
        FieldKind::Decimal | FieldKind::Float => match value {
            Value::Number(_) => Ok(()),
            _ => want("a number"),
        },
        FieldKind::Date => match value.as_str() {
            Some(s) if parse_date(s).is_some() => Ok(()),
            Some(_) => Err("not a valid YYYY-MM-DD date".into()),
            None => want("a date string"),
        },
        FieldKind::Datetime => match value.as_str() {
            Some(s) if parse_datetime(s).is_some() => Ok(()),
            Some(_) => Err("not an RFC 3339 UTC timestamp ending in Z".into()),
            None => want("a timestamp string"),
        },
        FieldKind::Time => match value.as_str() {
            Some(s) if parse_time(s).is_some() => Ok(()),
            Some(_) => Err("not a valid HH:MM:SS[.mmm] time".into()),
            None => want("a time string"),
        },
        FieldKind::Boolean => match value {
            Value::Bool(_) => Ok(()),
            _ => want("a boolean"),
        },
        FieldKind::Email => match value.as_str() {
            Some(s) if s.len() <= 254 && MAILBOX.is_match(s) => Ok(()),
            Some(_) => Err("not a valid email address".into()),
            None => want("an email string"),
        },
        FieldKind::Enumeration => {
            let members = field.enum_values.as_deref().unwrap_or_default();
            match value.as_str() {
                Some(s) if members.iter().any(|m| m == s) => Ok(()),
                Some(s) => Err(format!("{s:?} is not one of {}", members.join(", "))),
                None => want("an enum member name"),
            }
        }
        FieldKind::Relation | FieldKind::SingleMedia => match value {
            Value::String(s) if !s.is_empty() => Ok(()),
            _ => want("an id string"),
        },
        FieldKind::MultipleMedia => match value {
            Value::Array(items)
                if items
                    .iter()
                    .all(|v| v.as_str().is_some_and(|s| !s.is_empty())) =>
            {
                Ok(())
            }
            _ => want("a list of id strings"),
        },
        FieldKind::Json => Ok(()),
        FieldKind::Uid => match value.as_str() {
            Some(s) if UID_CHARS.is_match(s) => Ok(()),
            Some(_) => Err("UID may only contain letters, digits, and _ . ~ -".into()),
            None => want("a UID string"),
        },
    }
}

/// Validates a complete set of field values for `def`.
///
/// `except_id` names the document being replaced, so its own unique values do not collide
/// with themselves. Violations are reported in definition order, unknown keys last.
pub fn validate_document(
    def: &ContentTypeDefinition,
    values: &Values,
    ctx: &dyn ValidationContext,
    except_id: Option<&str>,
) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    for field in &def.fields {
        let value = match values.get(&field.name) {
            None | Some(Value::Null) => {
                if field.required {
                    violations.push(Violation::new(&field.name, "required field is missing"));
                }
                continue;
            }
            Some(v) => v,
        };
        if let Err(reason) = check_value(field, value) {
            violations.push(Violation::new(&field.name, reason));
            continue;
        }
        match field.kind {
            FieldKind::SingleMedia => {
                let id = value.as_str().unwrap_or_default();
                if !ctx.media_exists(id) {
                    violations.push(Violation::new(
                        &field.name,
                        format!("media {id:?} does not exist"),
                    ));
                }
            }
            FieldKind::MultipleMedia => {
                for id in value
                    .as_array()
                    .into_iter()
                    .flatten()
                    .filter_map(Value::as_str)
                {
                    if !ctx.media_exists(id) {
                        violations.push(Violation::new(
                            &field.name,
                            format!("media {id:?} does not exist"),
                        ));
                    }
                }
            }
            FieldKind::Relation => {
                let id = value.as_str().unwrap_or_default();
                let target = field.relation_target.as_deref().unwrap_or_default();
                if !ctx.document_exists(target, id) {
                    violations.push(Violation::new(
                        &field.name,
                        format!("{target} {id:?} does not exist"),
                    ));
                }
            }
            _ => {}
        }
        if field.unique && ctx.value_taken(&def.name, &field.name, value, except_id) {
            violations.push(Violation::new(
                &field.name,
                "value already used by another document",
            ));
        }
    }
    for key in values.keys() {
        if def.field(key).is_none() {
            violations.push(Violation::new(key, "unknown field"));
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
