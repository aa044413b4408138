//! The assembled repository: store, registry, media, accounts, content API, and the
//! idcard workflow behind one handle.

use std::path::PathBuf;
use std::sync::Arc;

use parking_lot::RwLock;
use thiserror::Error;

use crate::api::{
    execute, generate_schema, ApiError, Backend, ContentService, ErrorCode, ExecutionContext,
    ExecutionResult, GeneratedSchema, GraphQLError,
};
use crate::auth::{
    Action, AuthError, AuthSettings, PermissionTable, Principal, UserService, MEDIA_SCOPE,
};
use crate::clock::{SharedClock, SystemClock};
use crate::idcard::{
    idcard_definition, IdcardHooks, MockVerifier, VerificationClient, Workflow, IDCARD,
};
use crate::query;
use crate::schema::{ContentTypeDefinition, SchemaError, SchemaRegistry};
use crate::store::{
    Document, JournalStore, MediaAsset, MediaError, MediaStore, StoreBackend, StoreError,
    StoreOptions, DEFAULT_MAX_UPLOAD_BYTES,
};
use crate::Values;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Media(#[from] MediaError),
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    /// Root of `collections/`, `schema/` and `media/`. `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    pub auth: AuthSettings,
    pub max_upload_bytes: usize,
    pub store: StoreOptions,
    /// Register the idcard content type if it is not registered yet.
    pub bootstrap_idcard: bool,
}

impl ServiceOptions {
    pub fn new(jwt_secret: impl Into<String>) -> Self {
        Self {
            data_dir: None,
            auth: AuthSettings::new(jwt_secret),
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            store: StoreOptions::default(),
            bootstrap_idcard: true,
        }
    }
}

pub struct Service {
    store: Arc<dyn StoreBackend>,
    registry: Arc<SchemaRegistry>,
    media: Arc<MediaStore>,
    users: UserService,
    content: Arc<ContentService>,
    workflow: Workflow,
    verifier: RwLock<Arc<dyn VerificationClient>>,
    schema: RwLock<Arc<GeneratedSchema>>,
}

impl Service {
    pub fn open(options: ServiceOptions, clock: SharedClock) -> Result<Self, ServiceError> {
        let (store, registry, media): (Arc<dyn StoreBackend>, _, _) = match &options.data_dir {
            Some(dir) => {
                let store: Arc<dyn StoreBackend> = Arc::new(JournalStore::open(
                    dir.join("collections"),
                    clock.clone(),
                    options.store.clone(),
                )?);
                let registry = SchemaRegistry::open(dir.join("schema"), clock.clone())?;
                let media = MediaStore::on_disk(
                    dir.join("media"),
                    store.clone(),
                    options.max_upload_bytes,
                )?;
                (store, registry, media)
            }
            None => {
                let store: Arc<dyn StoreBackend> = Arc::new(JournalStore::in_memory(clock.clone()));
                let registry = SchemaRegistry::in_memory(clock.clone());
                let media = MediaStore::in_memory(store.clone(), options.max_upload_bytes);
                (store, registry, media)
            }
        };
        let registry = Arc::new(registry);
        let media = Arc::new(media);
        let users = UserService::new(store.clone(), clock.clone(), &options.auth)?;
        let content = Arc::new(ContentService::new(
            store.clone(),
            registry.clone(),
            media.clone(),
            clock.clone(),
            PermissionTable::default(),
        ));
        let workflow = Workflow::new(
            content.clone(),
            store.clone(),
            media.clone(),
            registry.clone(),
            clock,
        );
        let schema = Arc::new(generate_schema(&registry.snapshot()));
        let service = Self {
            store,
            registry,
            media,
            users,
            content,
            workflow,
            verifier: RwLock::new(Arc::new(MockVerifier)),
            schema: RwLock::new(schema),
        };
        for def in &service.registry.snapshot().types {
            service.prepare(def)?;
        }
        if options.bootstrap_idcard {
            service.bootstrap_idcard()?;
        }
        Ok(service)
    }

    /// In-memory service on the system clock, idcard registered.
    pub fn in_memory(jwt_secret: &str) -> Result<Self, ServiceError> {
        Self::open(ServiceOptions::new(jwt_secret), Arc::new(SystemClock))
    }

    fn prepare(&self, def: &ContentTypeDefinition) -> Result<(), ServiceError> {
        for field in def.fields.iter().filter(|f| f.unique) {
            self.store
                .ensure_unique_index(&def.name, &field.name, false)?;
        }
        if def.name == IDCARD {
            self.content
                .set_hooks(IDCARD, Arc::new(IdcardHooks::new(self.media.clone())));
        }
        Ok(())
    }

    fn refresh_schema(&self) {
        *self.schema.write() = Arc::new(generate_schema(&self.registry.snapshot()));
    }

    /// Registers a content type and regenerates the API so it is queryable immediately.
    pub fn register_content_type(
        &self,
        def: ContentTypeDefinition,
    ) -> Result<Arc<ContentTypeDefinition>, ServiceError> {
        let def = self.registry.register(def)?;
        self.prepare(&def)?;
        self.refresh_schema();
        Ok(def)
    }

    pub fn evolve_content_type(
        &self,
        def: ContentTypeDefinition,
    ) -> Result<Arc<ContentTypeDefinition>, ServiceError> {
        let store = self.store.clone();
        let def = self
            .registry
            .evolve(def, |name| store.count(name).map_or(true, |n| n > 0))?;
        self.prepare(&def)?;
        self.refresh_schema();
        Ok(def)
    }

    pub fn bootstrap_idcard(&self) -> Result<(), ServiceError> {
        if self.registry.get(IDCARD).is_none() {
            self.register_content_type(idcard_definition())?;
        }
        Ok(())
    }

    pub fn set_verifier(&self, client: Arc<dyn VerificationClient>) {
        *self.verifier.write() = client;
    }

    pub fn schema(&self) -> Arc<GeneratedSchema> {
        self.schema.read().clone()
    }

    pub fn sdl(&self) -> String {
        self.schema().sdl_text.clone()
    }

    /// Parses and runs one GraphQL request.
    pub fn execute(
        &self,
        query_text: &str,
        variables: &Values,
        operation_name: Option<&str>,
        principal: Option<Principal>,
    ) -> ExecutionResult {
        let doc = match query::parse(query_text) {
            Ok(doc) => doc,
            Err(e) => {
                return ExecutionResult::error(
                    GraphQLError::new(ErrorCode::ParseFailed, e.message()).at(e.pos()),
                )
            }
        };
        let ctx = ExecutionContext {
            principal,
            request_id: ulid::Ulid::new().to_string(),
        };
        execute(self, &self.schema(), &doc, variables, operation_name, &ctx)
    }

    /// Resolves a bearer token to a principal.
    pub fn authenticate(&self, token: &str) -> Result<Principal, AuthError> {
        self.users.authenticate(token)
    }

    pub fn upload(
        &self,
        principal: Option<&Principal>,
        bytes: &[u8],
        filename: &str,
        mime_type: &str,
    ) -> Result<MediaAsset, ApiError> {
        self.content
            .authorize(principal, MEDIA_SCOPE, Action::Create)?;
        Ok(self.media.store_media(bytes, filename, mime_type)?)
    }

    pub fn registry(&self) -> &SchemaRegistry {
        &self.registry
    }

    pub fn store(&self) -> &dyn StoreBackend {
        self.store.as_ref()
    }

    pub fn workflow(&self) -> &Workflow {
        &self.workflow
    }

    pub fn verifier(&self) -> Arc<dyn VerificationClient> {
        self.verifier.read().clone()
    }
}

impl Backend for Service {
    fn content(&self) -> &ContentService {
        &self.content
    }

    fn users(&self) -> &UserService {
        &self.users
    }

    fn media(&self) -> &MediaStore {
        &self.media
    }

    fn verify_record(&self, principal: Option<&Principal>, id: &str) -> Result<Document, ApiError> {
        let client = self.verifier();
        Ok(self.workflow.advance_as(principal, id, client.as_ref())?)
    }
}
