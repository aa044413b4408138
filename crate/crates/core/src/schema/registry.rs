use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::RwLock;

use super::{ContentTypeDefinition, SchemaError};
use crate::clock::SharedClock;
use crate::fsutil::write_atomic;

/// GraphQL type names the engine defines itself; a content type may not map onto one of them.
pub const BUILTIN_TYPE_NAMES: [&str; 20] = [
    "Query",
    "Mutation",
    "ID",
    "String",
    "Int",
    "Float",
    "Boolean",
    "Long",
    "Date",
    "DateTime",
    "Time",
    "JSON",
    "UploadFile",
    "UsersPermissionsMe",
    "UsersPermissionsUser",
    "UsersPermissionsLoginInput",
    "UsersPermissionsLoginPayload",
    "createUserInput",
    "createUserPayload",
    "IdcardVerificationPayload",
];

/// Root field names the engine defines itself.
pub const BUILTIN_ROOT_FIELDS: [&str; 5] =
    ["me", "uploadFile", "createUser", "login", "verifyIdcard"];

/// An immutable view of the registry at one point in time, ordered by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegistrySnapshot {
    pub types: Vec<Arc<ContentTypeDefinition>>,
}

impl RegistrySnapshot {
    pub fn get(&self, name: &str) -> Option<&ContentTypeDefinition> {
        self.types.iter().find(|t| t.name == name).map(Arc::as_ref)
    }
}

/// Content-type definitions, persisted one canonical JSON file per type.
pub struct SchemaRegistry {
    dir: Option<PathBuf>,
    clock: SharedClock,
    types: RwLock<BTreeMap<String, Arc<ContentTypeDefinition>>>,
}

impl SchemaRegistry {
    pub fn in_memory(clock: SharedClock) -> Self {
        Self {
            dir: None,
            clock,
            types: RwLock::new(BTreeMap::new()),
        }
    }

    /// Opens (creating if needed) a registry rooted at `dir` and loads every `*.json` in it.
    pub fn open(dir: impl Into<PathBuf>, clock: SharedClock) -> Result<Self, SchemaError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut types = BTreeMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let def = load_definition(&path)?;
            types.insert(def.name.clone(), Arc::new(def));
        }
        Ok(Self {
            dir: Some(dir),
            clock,
            types: RwLock::new(types),
        })
    }

    pub fn get(&self, name: &str) -> Option<Arc<ContentTypeDefinition>> {
        self.types.read().get(name).cloned()
    }

    pub fn snapshot(&self) -> RegistrySnapshot {
        RegistrySnapshot {
            types: self.types.read().values().cloned().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.types.read().is_empty()
    }

    pub fn register(
        &self,
        mut def: ContentTypeDefinition,
    ) -> Result<Arc<ContentTypeDefinition>, SchemaError> {
        def.check_shape()?;
        let mut types = self.types.write();
        if types.contains_key(&def.name) {
            return Err(SchemaError::DuplicateName(def.name));
        }
        check_collisions(&def, &types)?;
        check_relations(&def, &types)?;
        let now = self.clock.now();
        def.created_at = Some(now);
        def.updated_at = Some(now);
        self.persist(&def)?;
        let def = Arc::new(def);
        types.insert(def.name.clone(), def.clone());
        Ok(def)
    }

    /// Replaces an existing definition. Fields may be added freely; once the type has
    /// documents, existing fields may not be removed or change kind.
    pub fn evolve(
        &self,
        mut def: ContentTypeDefinition,
        has_documents: impl FnOnce(&str) -> bool,
    ) -> Result<Arc<ContentTypeDefinition>, SchemaError> {
        def.check_shape()?;
        let mut types = self.types.write();
        let current = types
            .get(&def.name)
            .cloned()
            .ok_or_else(|| SchemaError::UnknownContentType(def.name.clone()))?;
        if has_documents(&def.name) {
            for old in &current.fields {
                match def.field(&old.name) {
                    None => {
                        return Err(SchemaError::IncompatibleChange {
                            field: old.name.clone(),
                            reason: "fields cannot be removed once documents exist".into(),
                        })
                    }
                    Some(new) if new.kind != old.kind => {
                        return Err(SchemaError::IncompatibleChange {
                            field: old.name.clone(),
                            reason: format!(
                                "cannot change kind {} to {} once documents exist",
                                old.kind, new.kind
                            ),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        check_relations(&def, &types)?;
        check_enum_names(
            &def,
            types
                .values()
                .filter(|t| t.name != def.name)
                .map(Arc::as_ref),
        )?;
        def.created_at = current.created_at;
        def.updated_at = Some(self.clock.now());
        self.persist(&def)?;
        let def = Arc::new(def);
        types.insert(def.name.clone(), def.clone());
        Ok(def)
    }

    fn persist(&self, def: &ContentTypeDefinition) -> Result<(), SchemaError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let mut bytes = serde_json::to_vec_pretty(def).map_err(|e| SchemaError::Corrupt {
            path: dir.clone(),
            reason: e.to_string(),
        })?;
        bytes.push(b'\n');
        write_atomic(&dir.join(format!("{}.json", def.name)), &bytes)?;
        Ok(())
    }
}

fn load_definition(path: &Path) -> Result<ContentTypeDefinition, SchemaError> {
    let bytes = fs::read(path)?;
    let def: ContentTypeDefinition =
        serde_json::from_slice(&bytes).map_err(|e| SchemaError::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    def.check_shape()?;
    Ok(def)
}

fn root_fields(name: &str) -> [String; 5] {
    let type_name = super::type_name_of(name);
    [
        name.to_string(),
        format!("{name}s"),
        format!("create{type_name}"),
        format!("update{type_name}"),
        format!("delete{type_name}"),
    ]
}

fn check_collisions(
    def: &ContentTypeDefinition,
    types: &BTreeMap<String, Arc<ContentTypeDefinition>>,
) -> Result<(), SchemaError> {
    let type_name = def.type_name();
    if BUILTIN_TYPE_NAMES.contains(&type_name.as_str()) {
        return Err(SchemaError::ReservedName(def.name.clone()));
    }
    let mine = root_fields(&def.name);
    if mine
        .iter()
        .any(|f| BUILTIN_ROOT_FIELDS.contains(&f.as_str()))
    {
        return Err(SchemaError::ReservedName(def.name.clone()));
    }
    for other in types.keys() {
        let theirs = root_fields(other);
        if mine.iter().any(|f| theirs.contains(f)) {
            return Err(SchemaError::DuplicateName(def.name.clone()));
        }
    }
    check_enum_names(
        def,
        types
            .values()
            .filter(|t| t.name != def.name)
            .map(Arc::as_ref),
    )
}

/// Generated enum names must be distinct within and across types.
fn check_enum_names<'a>(
    def: &ContentTypeDefinition,
    others: impl Iterator<Item = &'a ContentTypeDefinition>,
) -> Result<(), SchemaError> {
    let enums_of = |t: &ContentTypeDefinition| -> Vec<String> {
        t.fields
            .iter()
            .filter(|f| f.enum_values.is_some())
            .map(|f| super::enum_type_name(&t.name, &f.name))
            .collect()
    };
    let mut taken: HashSet<String> = others.flat_map(enums_of).collect();
    for (field, name) in def
        .fields
        .iter()
        .filter(|f| f.enum_values.is_some())
        .zip(enums_of(def))
    {
        if !taken.insert(name.clone()) {
            return Err(SchemaError::InvalidFieldDefinition {
                field: field.name.clone(),
                reason: format!("generated enum name {name} is already in use"),
            });
        }
    }
    Ok(())
}

fn check_relations(
    def: &ContentTypeDefinition,
    types: &BTreeMap<String, Arc<ContentTypeDefinition>>,
) -> Result<(), SchemaError> {
    for field in &def.fields {
        if let Some(target) = &field.relation_target {
            if target != &def.name && !types.contains_key(target) {
                return Err(SchemaError::InvalidFieldDefinition {
                    field: field.name.clone(),
                    reason: format!("relation target {target:?} is not a registered content type"),
                });
            }
        }
    }
    Ok(())
}
