//! Request validation and execution.

use std::collections::HashMap;

use serde_json::{json, Map, Value as Json};

use super::coerce::{coerce_json, coerce_literal, Variables};
use super::schema::{
    GeneratedSchema, OutputField, Resolver, RootField, TypeDef, TypeRef, DEFAULT_PAGE_LIMIT,
};
use super::{ApiError, Backend, ErrorCode, ExecutionContext, ExecutionResult, GraphQLError};
use crate::auth::{Action, MEDIA_SCOPE, USER_SCOPE};
use crate::query::{OperationType, QueryDocument, Selection};
use crate::store::MediaError;
use crate::Values;

const TYPENAME: &str = "__typename";

/// Runs the single operation in `doc`. Nothing executes unless the whole operation
/// validates and every variable coerces.
pub fn execute(
    backend: &dyn Backend,
    schema: &GeneratedSchema,
    doc: &QueryDocument,
    variables: &Values,
    operation_name: Option<&str>,
    ctx: &ExecutionContext,
) -> ExecutionResult {
    let [op] = doc.operations.as_slice() else {
        return ExecutionResult::error(GraphQLError::new(
            ErrorCode::UnsupportedDocument,
            "documents must contain exactly one operation",
        ));
    };
    if let Some(wanted) = operation_name.filter(|n| !n.is_empty()) {
        if op.name.as_deref() != Some(wanted) {
            return ExecutionResult::error(GraphQLError::new(
                ErrorCode::ValidationFailed,
                format!("unknown operation named {wanted:?}"),
            ));
        }
    }
    let root_type = match op.op_type {
        OperationType::Query => "Query",
        OperationType::Mutation => "Mutation",
    };

    let mut errors = Vec::new();
    let mut coerced = Values::new();
    for def in &op.variable_defs {
        if !schema.get(&def.type_ref).is_some_and(TypeDef::is_input) {
            errors.push(
                GraphQLError::new(
                    ErrorCode::ValidationFailed,
                    format!(
                        "variable ${} has unknown input type {}",
                        def.name, def.type_ref
                    ),
                )
                .at(op.pos),
            );
            continue;
        }
        let ty = TypeRef::Named(def.type_ref.clone());
        let ty = if def.non_null { ty.non_null() } else { ty };
        match variables.get(&def.name) {
            None if def.non_null => errors.push(
                GraphQLError::new(
                    ErrorCode::BadUserInput,
                    format!(
                        "variable ${} of required type {ty} was not provided",
                        def.name
                    ),
                )
                .at(op.pos),
            ),
            None => {}
            Some(value) => match coerce_json(schema, &ty, value) {
                Ok(v) => {
                    coerced.insert(def.name.clone(), v);
                }
                Err(e) => errors.push(
                    GraphQLError::new(
                        ErrorCode::BadUserInput,
                        format!("variable ${} got an invalid value: {e}", def.name),
                    )
                    .at(op.pos),
                ),
            },
        }
    }
    if !errors.is_empty() {
        return ExecutionResult { data: None, errors };
    }

    let vars = Variables {
        defs: &op.variable_defs,
        values: &coerced,
    };
    let mut path = Vec::new();
    validate_selections(
        schema,
        root_type,
        &op.selection_set,
        &vars,
        &mut path,
        &mut errors,
    );
    if !errors.is_empty() {
        return ExecutionResult { data: None, errors };
    }

    let mut exec = Executor {
        backend,
        schema,
        vars,
        ctx,
        errors: Vec::new(),
    };
    let data = exec.selection_set(root_type, &Values::new(), &op.selection_set, &mut path);
    ExecutionResult {
        data: Some(data.map(Json::Object).unwrap_or(Json::Null)),
        errors: exec.errors,
    }
}

fn validate_selections(
    schema: &GeneratedSchema,
    parent: &str,
    selections: &[Selection],
    vars: &Variables<'_>,
    path: &mut Vec<Json>,
    errors: &mut Vec<GraphQLError>,
) {
    let mut seen: HashMap<&str, &Selection> = HashMap::new();
    for sel in selections {
        let key = sel.response_key();
        path.push(json!(key));
        let fail = |errors: &mut Vec<GraphQLError>, path: &[Json], msg: String| {
            errors.push(
                GraphQLError::new(ErrorCode::ValidationFailed, msg)
                    .at(sel.pos)
                    .with_path(path),
            );
        };
        if let Some(prev) = seen.insert(key, sel) {
            if prev != sel {
                fail(
                    errors,
                    path,
                    format!("fields with response key {key:?} conflict; use distinct aliases"),
                );
            }
            path.pop();
            continue;
        }
        if sel.field_name == TYPENAME {
            if !sel.arguments.is_empty() || sel.selection_set.is_some() {
                fail(
                    errors,
                    path,
                    format!("{TYPENAME} takes no arguments or subfields"),
                );
            }
            path.pop();
            continue;
        }
        let Some(field) = schema.field(parent, &sel.field_name) else {
            fail(
                errors,
                path,
                format!("Cannot query field {:?} on type {parent:?}", sel.field_name),
            );
            path.pop();
            continue;
        };
        for arg in &sel.arguments {
            match field.arg(&arg.name) {
                None => fail(
                    errors,
                    path,
                    format!(
                        "unknown argument {:?} on field {parent}.{}",
                        arg.name, field.name
                    ),
                ),
                Some(def) => {
                    if let Err(e) = coerce_literal(schema, &def.ty, &arg.value, vars) {
                        fail(errors, path, format!("argument {:?}: {e}", arg.name));
                    }
                }
            }
        }
        for def in field.args.iter().filter(|a| a.ty.is_non_null()) {
            if sel.argument(&def.name).is_none() {
                fail(
                    errors,
                    path,
                    format!(
                        "missing required argument {:?} of type {}",
                        def.name, def.ty
                    ),
                );
            }
        }
        let base = field.ty.base_name();
        match (schema.get(base), &sel.selection_set) {
            (Some(t), Some(_)) if t.is_leaf() => fail(
                errors,
                path,
                format!(
                    "field {:?} of type {} has no subfields",
                    sel.field_name, field.ty
                ),
            ),
            (Some(TypeDef::Object(_)), None) => fail(
                errors,
                path,
                format!(
                    "field {:?} of type {} must have a selection of subfields",
                    sel.field_name, field.ty
                ),
            ),
            (Some(TypeDef::Object(_)), Some(sub)) => {
                validate_selections(schema, base, sub, vars, path, errors)
            }
            _ => {}
        }
        path.pop();
    }
}

/// A position became null after its error was already reported.
struct Bubble;

struct Executor<'a> {
    backend: &'a dyn Backend,
    schema: &'a GeneratedSchema,
    vars: Variables<'a>,
    ctx: &'a ExecutionContext,
    errors: Vec<GraphQLError>,
}

impl Executor<'_> {
    fn selection_set(
        &mut self,
        type_name: &str,
        parent: &Values,
        selections: &[Selection],
        path: &mut Vec<Json>,
    ) -> Option<Values> {
        let mut out = Map::new();
        let mut bubbled = false;
        for sel in selections {
            let key = sel.response_key();
            if out.contains_key(key) {
                continue;
            }
            if sel.field_name == TYPENAME {
                out.insert(key.to_string(), json!(type_name));
                continue;
            }
            let field = self
                .schema
                .field(type_name, &sel.field_name)
                .expect("selections are validated before execution");
            path.push(json!(key));
            let value = match self.field(field, sel, parent, path) {
                Ok(v) => v,
                Err(Bubble) => {
                    bubbled |= field.ty.is_non_null();
                    Json::Null
                }
            };
            path.pop();
            out.insert(key.to_string(), value);
        }
        (!bubbled).then_some(out)
    }

    fn report(&mut self, err: GraphQLError, sel: &Selection, path: &[Json]) {
        self.errors.push(err.at(sel.pos).with_path(path));
    }

    fn field(
        &mut self,
        field: &OutputField,
        sel: &Selection,
        parent: &Values,
        path: &mut Vec<Json>,
    ) -> Result<Json, Bubble> {
        let mut args = Values::new();
        for arg in &sel.arguments {
            let def = field.arg(&arg.name).expect("arguments are validated");
            if let Ok(Some(v)) = coerce_literal(self.schema, &def.ty, &arg.value, &self.vars) {
                args.insert(arg.name.clone(), v);
            }
        }
        match self.resolve(&field.resolver, parent, &args) {
            Ok(value) => self.complete(&field.ty, value, sel, path),
            Err(e) => {
                self.report(GraphQLError::from_api(&e), sel, path);
                Err(Bubble)
            }
        }
    }

    fn complete(
        &mut self,
        ty: &TypeRef,
        value: Json,
        sel: &Selection,
        path: &mut Vec<Json>,
    ) -> Result<Json, Bubble> {
        match ty {
            TypeRef::NonNull(inner) => {
                let v = self.complete(inner, value, sel, path)?;
                if v.is_null() {
                    self.report(
                        GraphQLError::new(
                            ErrorCode::Internal,
                            format!("cannot return null for non-nullable {ty}"),
                        ),
                        sel,
                        path,
                    );
                    return Err(Bubble);
                }
                Ok(v)
            }
            _ if value.is_null() => Ok(Json::Null),
            TypeRef::List(inner) => {
                let Json::Array(items) = value else {
                    self.report(
                        GraphQLError::new(ErrorCode::Internal, format!("expected a list for {ty}")),
                        sel,
                        path,
                    );
                    return Err(Bubble);
                };
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.into_iter().enumerate() {
                    path.push(json!(i));
                    let r = self.complete(inner, item, sel, path);
                    path.pop();
                    match r {
                        Ok(v) => out.push(v),
                        Err(Bubble) if inner.is_non_null() => return Err(Bubble),
                        Err(Bubble) => out.push(Json::Null),
                    }
                }
                Ok(Json::Array(out))
            }
            TypeRef::Named(name) => match self.schema.get(name) {
                Some(TypeDef::Object(_)) => {
                    let Json::Object(map) = value else {
                        self.report(
                            GraphQLError::new(
                                ErrorCode::Internal,
                                format!("expected an object for {name}"),
                            ),
                            sel,
                            path,
                        );
                        return Err(Bubble);
                    };
                    let sub = sel.selection_set.as_deref().unwrap_or_default();
                    self.selection_set(name, &map, sub, path)
                        .map(Json::Object)
                        .ok_or(Bubble)
                }
                _ => Ok(value),
            },
        }
    }

    fn resolve(
        &self,
        resolver: &Resolver,
        parent: &Values,
        args: &Values,
    ) -> Result<Json, ApiError> {
        let principal = self.ctx.principal.as_ref();
        let content = self.backend.content();
        let text_arg = |name: &str| {
            args.get(name)
                .and_then(Json::as_str)
                .unwrap_or_default()
                .to_string()
        };
        let input = || match args.get("input") {
            Some(Json::Object(m)) => m.clone(),
            _ => Values::new(),
        };
        match resolver {
            Resolver::Key(k) => Ok(parent.get(k).cloned().unwrap_or(Json::Null)),
            Resolver::Media(k) => match parent.get(k).and_then(Json::as_str) {
                Some(id) => self.media_json(id),
                None => Ok(Json::Null),
            },
            Resolver::MediaList(k) => match parent.get(k).and_then(Json::as_array) {
                Some(ids) => ids
                    .iter()
                    .map(|id| self.media_json(id.as_str().unwrap_or_default()))
                    .collect::<Result<Vec<_>, _>>()
                    .map(Json::Array),
                None => Ok(Json::Null),
            },
            Resolver::Relation { key, target } => match parent.get(key).and_then(Json::as_str) {
                Some(id) => match content.find_one(principal, target, id) {
                    Ok(doc) => Ok(Json::Object(doc.to_json())),
                    Err(ApiError::NotFound { .. }) => Ok(Json::Null),
                    Err(e) => Err(e),
                },
                None => Ok(Json::Null),
            },
            Resolver::Root(root) => match root {
                RootField::FindOne(ct) => Ok(Json::Object(
                    content.find_one(principal, ct, &text_arg("id"))?.to_json(),
                )),
                RootField::Find(ct) => {
                    let page = |name: &str, default: i64| -> Result<usize, ApiError> {
                        let n = args.get(name).and_then(Json::as_i64).unwrap_or(default);
                        usize::try_from(n)
                            .map_err(|_| ApiError::BadInput(format!("{name} must not be negative")))
                    };
                    let docs = content.find(
                        principal,
                        ct,
                        page("limit", DEFAULT_PAGE_LIMIT)?,
                        page("start", 0)?,
                    )?;
                    Ok(Json::Array(
                        docs.iter().map(|d| Json::Object(d.to_json())).collect(),
                    ))
                }
                RootField::Create(ct) => {
                    let doc = content.create(principal, ct, input())?;
                    Ok(json!({ ct.as_str(): doc.to_json() }))
                }
                RootField::Update(ct) => {
                    let doc = content.update(principal, ct, &text_arg("id"), input())?;
                    Ok(json!({ ct.as_str(): doc.to_json() }))
                }
                RootField::Delete(ct) => {
                    let doc = content.delete(principal, ct, &text_arg("id"))?;
                    Ok(json!({ ct.as_str(): doc.to_json() }))
                }
                RootField::Me => {
                    content.authorize(principal, USER_SCOPE, Action::Me)?;
                    let id = principal.map(|p| p.user_id.as_str()).unwrap_or_default();
                    Ok(match self.backend.users().get(id)? {
                        Some(user) => Json::Object(user.to_json()),
                        None => Json::Null,
                    })
                }
                RootField::UploadFile => {
                    content.authorize(principal, MEDIA_SCOPE, Action::FindOne)?;
                    let id = text_arg("id");
                    match self.backend.media().get_asset(&id)? {
                        Some(asset) => Ok(Json::Object(asset.to_json())),
                        None => Err(ApiError::Media(MediaError::NotFound(id))),
                    }
                }
                RootField::CreateUser => {
                    content.authorize(principal, USER_SCOPE, Action::Register)?;
                    let input = input();
                    let field = |k: &str| {
                        input
                            .get(k)
                            .and_then(Json::as_str)
                            .unwrap_or_default()
                            .to_string()
                    };
                    let user = self.backend.users().register(
                        &field("username"),
                        &field("email"),
                        &field("password"),
                    )?;
                    Ok(json!({ "user": user.to_json() }))
                }
                RootField::Login => {
                    content.authorize(principal, USER_SCOPE, Action::Login)?;
                    let input = input();
                    let field = |k: &str| {
                        input
                            .get(k)
                            .and_then(Json::as_str)
                            .unwrap_or_default()
                            .to_string()
                    };
                    let result = self
                        .backend
                        .users()
                        .login(&field("identifier"), &field("password"))?;
                    Ok(json!({ "jwt": result.jwt, "user": result.user.to_json() }))
                }
                RootField::VerifyIdcard => {
                    let doc = self.backend.verify_record(principal, &text_arg("id"))?;
                    Ok(json!({ doc.collection.as_str(): doc.to_json() }))
                }
            },
        }
    }

    fn media_json(&self, id: &str) -> Result<Json, ApiError> {
        Ok(match self.backend.media().get_asset(id)? {
            Some(asset) => Json::Object(asset.to_json()),
            None => Json::Null,
        })
    }
}
