//! Input coercion: variable values and argument literals against schema input types.

use serde_json::{Map, Number, Value as Json};

use super::schema::{GeneratedSchema, TypeDef, TypeRef};
use crate::query::{Value, VariableDefinition};
use crate::Values;

/// Declared variables and their coerced values. Absent entries were not supplied.
pub struct Variables<'a> {
    pub defs: &'a [VariableDefinition],
    pub values: &'a Values,
}

impl Variables<'_> {
    fn def(&self, name: &str) -> Option<&VariableDefinition> {
        self.defs.iter().find(|d| d.name == name)
    }
}

fn int_from(n: &Number) -> Option<i64> {
    n.as_i64().or_else(|| {
        n.as_f64()
            .filter(|f| f.fract() == 0.0 && f.abs() < 9.0e15)
            .map(|f| f as i64)
    })
}

/// Coerces an already-decoded JSON value (a variable value) to `ty`.
pub fn coerce_json(schema: &GeneratedSchema, ty: &TypeRef, value: &Json) -> Result<Json, String> {
    match ty {
        TypeRef::NonNull(inner) => match value {
            Json::Null => Err(format!("expected non-null {ty}")),
            v => coerce_json(schema, inner, v),
        },
        _ if value.is_null() => Ok(Json::Null),
        TypeRef::List(inner) => match value {
            Json::Array(items) => items
                .iter()
                .enumerate()
                .map(|(i, v)| coerce_json(schema, inner, v).map_err(|e| format!("[{i}]: {e}")))
                .collect::<Result<Vec<_>, _>>()
                .map(Json::Array),
            single => Ok(Json::Array(vec![coerce_json(schema, inner, single)?])),
        },
        TypeRef::Named(name) => match schema.get(name) {
            Some(TypeDef::Scalar) => coerce_scalar(name, value),
            Some(TypeDef::Enum(members)) => match value {
                Json::String(s) if members.contains(s) => Ok(value.clone()),
                _ => Err(format!("expected one of {} for {name}", members.join(", "))),
            },
            Some(TypeDef::Input(fields)) => {
                let Json::Object(map) = value else {
                    return Err(format!("expected an object for {name}"));
                };
                for key in map.keys() {
                    if !fields.iter().any(|f| &f.name == key) {
                        return Err(format!("unknown field {key:?} in {name}"));
                    }
                }
                let mut out = Map::new();
                for field in fields {
                    match map.get(&field.name) {
                        Some(v) => {
                            let c = coerce_json(schema, &field.ty, v)
                                .map_err(|e| format!("{}: {e}", field.name))?;
                            out.insert(field.name.clone(), c);
                        }
                        None if field.ty.is_non_null() => {
                            return Err(format!(
                                "missing required field {:?} in {name}",
                                field.name
                            ))
                        }
                        None => {}
                    }
                }
                Ok(Json::Object(out))
            }
            _ => Err(format!("{name} is not an input type")),
        },
    }
}

fn coerce_scalar(name: &str, value: &Json) -> Result<Json, String> {
    let bad = || Err(format!("expected {name}, found {}", describe(value)));
    match name {
        "ID" => match value {
            Json::String(_) => Ok(value.clone()),
            Json::Number(n) if n.is_i64() || n.is_u64() => Ok(Json::String(n.to_string())),
            _ => bad(),
        },
        "String" | "Date" | "DateTime" | "Time" => match value {
            Json::String(_) => Ok(value.clone()),
            _ => bad(),
        },
        "Int" => match value {
            Json::Number(n) => match int_from(n).and_then(|i| i32::try_from(i).ok()) {
                Some(i) => Ok(Json::from(i)),
                None => bad(),
            },
            _ => bad(),
        },
        "Float" => match value {
            Json::Number(_) => Ok(value.clone()),
            _ => bad(),
        },
        "Boolean" => match value {
            Json::Bool(_) => Ok(value.clone()),
            _ => bad(),
        },
        "Long" => match value {
            Json::String(_) => Ok(value.clone()),
            Json::Number(n) if n.is_i64() => Ok(Json::String(n.to_string())),
            _ => bad(),
        },
        "JSON" => Ok(value.clone()),
        _ => bad(),
    }
}

fn describe(value: &Json) -> &'static str {
    match value {
        Json::Null => "null",
        Json::Bool(_) => "a boolean",
        Json::Number(_) => "a number",
        Json::String(_) => "a string",
        Json::Array(_) => "a list",
        Json::Object(_) => "an object",
    }
}

/// Outcome of coercing one argument: `None` when it was omitted (or bound to an
/// unsupplied nullable variable).
pub fn coerce_literal(
    schema: &GeneratedSchema,
    ty: &TypeRef,
    value: &Value,
    vars: &Variables<'_>,
) -> Result<Option<Json>, String> {
    if let Value::Variable(name) = value {
        let def = vars
            .def(name)
            .ok_or_else(|| format!("variable ${name} is not declared"))?;
        let declared = TypeRef::Named(def.type_ref.clone());
        let declared = if def.non_null {
            declared.non_null()
        } else {
            declared
        };
        if !compatible(&declared, ty) {
            return Err(format!(
                "variable ${name} of type {declared} cannot be used where {ty} is expected"
            ));
        }
        return match vars.values.get(name) {
            Some(v) => Ok(Some(v.clone())),
            None if ty.is_non_null() => Err(format!("variable ${name} was not supplied")),
            None => Ok(None),
        };
    }
    coerce_ast(schema, ty, value, vars).map(Some)
}

fn compatible(variable: &TypeRef, location: &TypeRef) -> bool {
    match (variable, location) {
        (TypeRef::NonNull(v), TypeRef::NonNull(l)) => compatible(v, l),
        (TypeRef::NonNull(v), l) => compatible(v, l),
        (_, TypeRef::NonNull(_)) => false,
        (TypeRef::List(v), TypeRef::List(l)) => compatible(v, l),
        (TypeRef::Named(v), TypeRef::Named(l)) => v == l,
        _ => false,
    }
}

fn coerce_ast(
    schema: &GeneratedSchema,
    ty: &TypeRef,
    value: &Value,
    vars: &Variables<'_>,
) -> Result<Json, String> {
    match ty {
        TypeRef::NonNull(inner) => match value {
            Value::Null => Err(format!("expected non-null {ty}")),
            v => coerce_ast(schema, inner, v, vars),
        },
        _ if matches!(value, Value::Null) => Ok(Json::Null),
        TypeRef::List(inner) => match value {
            Value::List(items) => items
                .iter()
                .enumerate()
                .map(|(i, v)| nested(schema, inner, v, vars).map_err(|e| format!("[{i}]: {e}")))
                .collect::<Result<Vec<_>, _>>()
                .map(Json::Array),
            single => Ok(Json::Array(vec![nested(schema, inner, single, vars)?])),
        },
        TypeRef::Named(name) => match schema.get(name) {
            Some(TypeDef::Enum(members)) => match value {
                Value::Enum(e) if members.contains(e) => Ok(Json::String(e.clone())),
                _ => Err(format!("expected one of {} for {name}", members.join(", "))),
            },
            Some(TypeDef::Scalar) => {
                let json = match value {
                    Value::Int(i) => Json::from(*i),
                    Value::Float(f) => Number::from_f64(*f)
                        .map(Json::Number)
                        .ok_or("non-finite float")?,
                    Value::String(s) => Json::String(s.clone()),
                    Value::Boolean(b) => Json::Bool(*b),
                    Value::Enum(e) => return Err(format!("expected {name}, found enum value {e}")),
                    Value::List(_) | Value::Object(_) if name == "JSON" => {
                        literal_to_json(value, vars)?
                    }
                    _ => return Err(format!("expected {name}")),
                };
                coerce_scalar(name, &json)
            }
            Some(TypeDef::Input(fields)) => {
                let Value::Object(entries) = value else {
                    return Err(format!("expected an object for {name}"));
                };
                for (key, _) in entries {
                    if !fields.iter().any(|f| &f.name == key) {
                        return Err(format!("unknown field {key:?} in {name}"));
                    }
                }
                let mut out = Map::new();
                for field in fields {
                    let supplied = entries
                        .iter()
                        .find(|(k, _)| k == &field.name)
                        .map(|(_, v)| v);
                    let coerced = match supplied {
                        Some(v) => coerce_literal(schema, &field.ty, v, vars)
                            .map_err(|e| format!("{}: {e}", field.name))?,
                        None => None,
                    };
                    match coerced {
                        Some(v) => {
                            out.insert(field.name.clone(), v);
                        }
                        None if field.ty.is_non_null() => {
                            return Err(format!(
                                "missing required field {:?} in {name}",
                                field.name
                            ))
                        }
                        None => {}
                    }
                }
                Ok(Json::Object(out))
            }
            _ => Err(format!("{name} is not an input type")),
        },
    }
}

/// A value nested in a list literal: variables inside lists must be supplied.
fn nested(
    schema: &GeneratedSchema,
    ty: &TypeRef,
    value: &Value,
    vars: &Variables<'_>,
) -> Result<Json, String> {
    Ok(coerce_literal(schema, ty, value, vars)?.unwrap_or(Json::Null))
}

/// Converts a literal to JSON without a target type (for the JSON scalar).
fn literal_to_json(value: &Value, vars: &Variables<'_>) -> Result<Json, String> {
    Ok(match value {
        Value::Int(i) => Json::from(*i),
        Value::Float(f) => Number::from_f64(*f)
            .map(Json::Number)
            .ok_or("non-finite float")?,
        Value::String(s) | Value::Enum(s) => Json::String(s.clone()),
        Value::Boolean(b) => Json::Bool(*b),
        Value::Null => Json::Null,
        Value::List(items) => Json::Array(
            items
                .iter()
                .map(|v| literal_to_json(v, vars))
                .collect::<Result<_, _>>()?,
        ),
        Value::Object(entries) => Json::Object(
            entries
                .iter()
                .map(|(k, v)| literal_to_json(v, vars).map(|j| (k.clone(), j)))
                .collect::<Result<_, _>>()?,
        ),
        Value::Variable(name) => vars.values.get(name).cloned().unwrap_or(Json::Null),
    })
}
