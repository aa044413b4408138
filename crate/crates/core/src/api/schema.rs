//! SDL generation and the executable type index derived from a registry snapshot.

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use crate::schema::{enum_type_name, ContentTypeDefinition, FieldKind, RegistrySnapshot};

pub const DEFAULT_PAGE_LIMIT: i64 = 25;
pub const VERIFIABLE_CONTENT_TYPE: &str = "idcard";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeRef {
    Named(String),
    List(Box<TypeRef>),
    NonNull(Box<TypeRef>),
}

impl TypeRef {
    pub fn named(name: &str) -> Self {
        TypeRef::Named(name.to_string())
    }

    pub fn non_null(self) -> Self {
        match self {
            TypeRef::NonNull(_) => self,
            other => TypeRef::NonNull(Box::new(other)),
        }
    }

    pub fn list(self) -> Self {
        TypeRef::List(Box::new(self))
    }

    pub fn base_name(&self) -> &str {
        match self {
            TypeRef::Named(n) => n,
            TypeRef::List(t) | TypeRef::NonNull(t) => t.base_name(),
        }
    }

    pub fn is_non_null(&self) -> bool {
        matches!(self, TypeRef::NonNull(_))
    }
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Named(n) => f.write_str(n),
            TypeRef::List(t) => write!(f, "[{t}]"),
            TypeRef::NonNull(t) => write!(f, "{t}!"),
        }
    }
}

/// Root operations the executor knows how to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RootField {
    FindOne(String),
    Find(String),
    Create(String),
    Update(String),
    Delete(String),
    Me,
    UploadFile,
    CreateUser,
    Login,
    VerifyIdcard,
}

/// How an object field obtains its value from the parent object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolver {
    /// The parent's value under this key.
    Key(String),
    /// The parent holds a media id under this key.
    Media(String),
    /// The parent holds a list of media ids under this key.
    MediaList(String),
    /// The parent holds a document id of `target` under `key`.
    Relation {
        key: String,
        target: String,
    },
    Root(RootField),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgumentDef {
    pub name: String,
    pub ty: TypeRef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputField {
    pub name: String,
    pub args: Vec<ArgumentDef>,
    pub ty: TypeRef,
    pub resolver: Resolver,
}

impl OutputField {
    fn key(name: &str, ty: TypeRef) -> Self {
        Self {
            name: name.to_string(),
            args: Vec::new(),
            ty,
            resolver: Resolver::Key(name.to_string()),
        }
    }

    fn root(name: &str, args: Vec<ArgumentDef>, ty: TypeRef, root: RootField) -> Self {
        Self {
            name: name.to_string(),
            args,
            ty,
            resolver: Resolver::Root(root),
        }
    }

    pub fn arg(&self, name: &str) -> Option<&ArgumentDef> {
        self.args.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputField {
    pub name: String,
    pub ty: TypeRef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeDef {
    Scalar,
    Enum(Vec<String>),
    Object(Vec<OutputField>),
    Input(Vec<InputField>),
}

impl TypeDef {
    pub fn is_input(&self) -> bool {
        matches!(self, TypeDef::Scalar | TypeDef::Enum(_) | TypeDef::Input(_))
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TypeDef::Scalar | TypeDef::Enum(_))
    }
}

/// The SDL text plus everything the executor needs to validate and run requests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedSchema {
    pub sdl_text: String,
    pub types: BTreeMap<String, TypeDef>,
}

impl GeneratedSchema {
    pub fn get(&self, type_name: &str) -> Option<&TypeDef> {
        self.types.get(type_name)
    }

    pub fn field(&self, type_name: &str, field_name: &str) -> Option<&OutputField> {
        match self.types.get(type_name)? {
            TypeDef::Object(fields) => fields.iter().find(|f| f.name == field_name),
            _ => None,
        }
    }

    pub fn enum_values(&self, name: &str) -> Option<&[String]> {
        match self.types.get(name)? {
            TypeDef::Enum(values) => Some(values),
            _ => None,
        }
    }

    /// Enum name → members.
    pub fn enum_index(&self) -> BTreeMap<&str, &[String]> {
        self.types
            .iter()
            .filter_map(|(name, t)| match t {
                TypeDef::Enum(values) => Some((name.as_str(), values.as_slice())),
                _ => None,
            })
            .collect()
    }
}

pub fn plural_field(content_type: &str) -> String {
    format!("{content_type}s")
}

fn scalar_for(kind: FieldKind) -> &'static str {
    match kind {
        FieldKind::ShortText
        | FieldKind::LongText
        | FieldKind::RichText
        | FieldKind::Email
        | FieldKind::Uid
        | FieldKind::Password => "String",
        FieldKind::Integer => "Int",
        FieldKind::BigInteger => "Long",
        FieldKind::Decimal | FieldKind::Float => "Float",
        FieldKind::Date => "Date",
        FieldKind::Datetime => "DateTime",
        FieldKind::Time => "Time",
        FieldKind::Boolean => "Boolean",
        FieldKind::Json => "JSON",
        FieldKind::SingleMedia | FieldKind::Relation => "ID",
        FieldKind::MultipleMedia | FieldKind::Enumeration => unreachable!("not a plain scalar"),
    }
}

struct Builder {
    order: Vec<(String, TypeDef)>,
}

impl Builder {
    fn add(&mut self, name: impl Into<String>, def: TypeDef) {
        self.order.push((name.into(), def));
    }
}

fn id_arg() -> Vec<ArgumentDef> {
    vec![ArgumentDef {
        name: "id".into(),
        ty: TypeRef::named("ID").non_null(),
    }]
}

fn input_arg(type_name: &str, non_null: bool) -> Vec<ArgumentDef> {
    let ty = TypeRef::named(type_name);
    vec![ArgumentDef {
        name: "input".into(),
        ty: if non_null { ty.non_null() } else { ty },
    }]
}

fn content_type_defs(b: &mut Builder, def: &ContentTypeDefinition) {
    let type_name = def.type_name();
    let mut outputs = vec![
        OutputField::key("id", TypeRef::named("ID").non_null()),
        OutputField::key("createdAt", TypeRef::named("DateTime").non_null()),
        OutputField::key("updatedAt", TypeRef::named("DateTime").non_null()),
    ];
    let mut inputs = Vec::new();
    for field in &def.fields {
        let (out_ty, in_ty, resolver) = match field.kind {
            FieldKind::Enumeration => {
                let e = enum_type_name(&def.name, &field.name);
                (
                    TypeRef::named(&e),
                    TypeRef::named(&e),
                    Resolver::Key(field.name.clone()),
                )
            }
            FieldKind::SingleMedia => (
                TypeRef::named("UploadFile"),
                TypeRef::named("ID"),
                Resolver::Media(field.name.clone()),
            ),
            FieldKind::MultipleMedia => (
                TypeRef::named("UploadFile").list(),
                TypeRef::named("ID").list(),
                Resolver::MediaList(field.name.clone()),
            ),
            FieldKind::Relation => {
                let target = field.relation_target.clone().unwrap_or_default();
                (
                    TypeRef::Named(crate::schema::type_name_of(&target)),
                    TypeRef::named("ID"),
                    Resolver::Relation {
                        key: field.name.clone(),
                        target,
                    },
                )
            }
            kind => (
                TypeRef::named(scalar_for(kind)),
                TypeRef::named(scalar_for(kind)),
                Resolver::Key(field.name.clone()),
            ),
        };
        if field.kind != FieldKind::Password {
            outputs.push(OutputField {
                name: field.name.clone(),
                args: Vec::new(),
                ty: if field.required {
                    out_ty.non_null()
                } else {
                    out_ty
                },
                resolver,
            });
        }
        inputs.push(InputField {
            name: field.name.clone(),
            ty: in_ty,
        });
    }
    b.add(&type_name, TypeDef::Object(outputs));
    b.add(
        format!("create{type_name}Input"),
        TypeDef::Input(inputs.clone()),
    );
    b.add(format!("update{type_name}Input"), TypeDef::Input(inputs));
    for verb in ["create", "update", "delete"] {
        b.add(
            format!("{verb}{type_name}Payload"),
            TypeDef::Object(vec![OutputField::key(
                &def.name,
                TypeRef::named(&type_name),
            )]),
        );
    }
}

fn builtin_defs(b: &mut Builder) {
    let s = |n: &str| TypeRef::named(n);
    b.add(
        "UploadFile",
        TypeDef::Object(vec![
            OutputField::key("id", s("ID").non_null()),
            OutputField::key("name", s("String").non_null()),
            OutputField::key("mime", s("String").non_null()),
            OutputField::key("size", s("Int").non_null()),
            OutputField::key("sha256", s("String").non_null()),
            OutputField::key("width", s("Int").non_null()),
            OutputField::key("height", s("Int").non_null()),
            OutputField::key("url", s("String").non_null()),
        ]),
    );
    b.add(
        "UsersPermissionsMe",
        TypeDef::Object(vec![
            OutputField::key("id", s("ID").non_null()),
            OutputField::key("username", s("String").non_null()),
            OutputField::key("email", s("String").non_null()),
            OutputField::key("role", s("String").non_null()),
        ]),
    );
    b.add(
        "UsersPermissionsUser",
        TypeDef::Object(vec![
            OutputField::key("id", s("ID").non_null()),
            OutputField::key("username", s("String").non_null()),
            OutputField::key("email", s("String").non_null()),
            OutputField::key("role", s("String").non_null()),
            OutputField::key("createdAt", s("DateTime").non_null()),
        ]),
    );
    b.add(
        "UsersPermissionsLoginInput",
        TypeDef::Input(vec![
            InputField {
                name: "identifier".into(),
                ty: s("String").non_null(),
            },
            InputField {
                name: "password".into(),
                ty: s("String").non_null(),
            },
        ]),
    );
    b.add(
        "UsersPermissionsLoginPayload",
        TypeDef::Object(vec![
            OutputField::key("jwt", s("String").non_null()),
            OutputField::key("user", s("UsersPermissionsMe").non_null()),
        ]),
    );
    b.add(
        "createUserInput",
        TypeDef::Input(
            ["username", "email", "password"]
                .into_iter()
                .map(|n| InputField {
                    name: n.into(),
                    ty: s("String"),
                })
                .collect(),
        ),
    );
    b.add(
        "createUserPayload",
        TypeDef::Object(vec![OutputField::key("user", s("UsersPermissionsUser"))]),
    );
}

pub fn generate_schema(snapshot: &RegistrySnapshot) -> GeneratedSchema {
    let mut b = Builder { order: Vec::new() };
    for scalar in ["ID", "String", "Int", "Float", "Boolean"] {
        b.add(scalar, TypeDef::Scalar);
    }
    let custom_scalars = ["Date", "DateTime", "JSON", "Long", "Time"];
    for scalar in custom_scalars {
        b.add(scalar, TypeDef::Scalar);
    }

    let mut enums = BTreeMap::new();
    for def in &snapshot.types {
        for field in &def.fields {
            if let Some(values) = &field.enum_values {
                enums.insert(enum_type_name(&def.name, &field.name), values.clone());
            }
        }
    }
    for (name, values) in &enums {
        b.add(name, TypeDef::Enum(values.clone()));
    }

    builtin_defs(&mut b);
    for def in &snapshot.types {
        content_type_defs(&mut b, def);
    }
    let verifiable = snapshot.get(VERIFIABLE_CONTENT_TYPE).is_some();
    if verifiable {
        b.add(
            "IdcardVerificationPayload",
            TypeDef::Object(vec![OutputField::key(
                VERIFIABLE_CONTENT_TYPE,
                TypeRef::named("Idcard"),
            )]),
        );
    }

    let mut query = vec![
        OutputField::root(
            "me",
            Vec::new(),
            TypeRef::named("UsersPermissionsMe"),
            RootField::Me,
        ),
        OutputField::root(
            "uploadFile",
            id_arg(),
            TypeRef::named("UploadFile"),
            RootField::UploadFile,
        ),
    ];
    let mut mutation = vec![
        OutputField::root(
            "createUser",
            input_arg("createUserInput", false),
            TypeRef::named("createUserPayload"),
            RootField::CreateUser,
        ),
        OutputField::root(
            "login",
            input_arg("UsersPermissionsLoginInput", true),
            TypeRef::named("UsersPermissionsLoginPayload").non_null(),
            RootField::Login,
        ),
    ];
    for def in &snapshot.types {
        let name = &def.name;
        let type_name = def.type_name();
        query.push(OutputField::root(
            name,
            id_arg(),
            TypeRef::named(&type_name),
            RootField::FindOne(name.clone()),
        ));
        query.push(OutputField::root(
            &plural_field(name),
            vec![
                ArgumentDef {
                    name: "limit".into(),
                    ty: TypeRef::named("Int"),
                },
                ArgumentDef {
                    name: "start".into(),
                    ty: TypeRef::named("Int"),
                },
            ],
            TypeRef::named(&type_name).non_null().list().non_null(),
            RootField::Find(name.clone()),
        ));
        mutation.push(OutputField::root(
            &format!("create{type_name}"),
            input_arg(&format!("create{type_name}Input"), false),
            TypeRef::Named(format!("create{type_name}Payload")),
            RootField::Create(name.clone()),
        ));
        let mut update_args = id_arg();
        update_args.extend(input_arg(&format!("update{type_name}Input"), false));
        mutation.push(OutputField::root(
            &format!("update{type_name}"),
            update_args,
            TypeRef::Named(format!("update{type_name}Payload")),
            RootField::Update(name.clone()),
        ));
        mutation.push(OutputField::root(
            &format!("delete{type_name}"),
            id_arg(),
            TypeRef::Named(format!("delete{type_name}Payload")),
            RootField::Delete(name.clone()),
        ));
    }
    if verifiable {
        mutation.push(OutputField::root(
            "verifyIdcard",
            id_arg(),
            TypeRef::named("IdcardVerificationPayload"),
            RootField::VerifyIdcard,
        ));
    }
    b.add("Query", TypeDef::Object(query));
    b.add("Mutation", TypeDef::Object(mutation));

    let mut sdl = String::new();
    for (name, def) in &b.order {
        let block = match def {
            TypeDef::Scalar if custom_scalars.contains(&name.as_str()) => {
                format!("scalar {name}\n")
            }
            TypeDef::Scalar => continue,
            TypeDef::Enum(values) => {
                let mut s = format!("enum {name} {{\n");
                for v in values {
                    let _ = writeln!(s, "  {v}");
                }
                s + "}\n"
            }
            TypeDef::Object(fields) => {
                let mut s = format!("type {name} {{\n");
                for f in fields {
                    let _ = write!(s, "  {}", f.name);
                    if !f.args.is_empty() {
                        let args: Vec<String> = f
                            .args
                            .iter()
                            .map(|a| format!("{}: {}", a.name, a.ty))
                            .collect();
                        let _ = write!(s, "({})", args.join(", "));
                    }
                    let _ = writeln!(s, ": {}", f.ty);
                }
                s + "}\n"
            }
            TypeDef::Input(fields) => {
                let mut s = format!("input {name} {{\n");
                for f in fields {
                    let _ = writeln!(s, "  {}: {}", f.name, f.ty);
                }
                s + "}\n"
            }
        };
        if !sdl.is_empty() {
            sdl.push('\n');
        }
        sdl.push_str(&block);
    }

    GeneratedSchema {
        sdl_text: sdl,
        types: b.order.into_iter().collect(),
    }
}
