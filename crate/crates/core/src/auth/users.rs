use std::sync::{Arc, OnceLock};

use chrono::{DateTime, Utc};
use serde::Serialize;
use serde_json::{json, Value};

use super::password::{hash_password, random_salt, verify_password, DEFAULT_ITERATIONS};
use super::token::{Claims, TokenSigner, DEFAULT_TTL_SECONDS};
use super::{AuthError, Principal, Role};
use crate::clock::{rfc3339_millis, SharedClock};
use crate::schema::{check_value, FieldDefinition, FieldKind};
use crate::store::{Document, StoreBackend, StoreError};
use crate::Values;

pub const USER_COLLECTION: &str = "user";
pub const MIN_PASSWORD_CHARS: usize = 8;
const MAX_USERNAME_CHARS: usize = 255;

#[derive(Debug, Clone)]
pub struct AuthSettings {
    pub jwt_secret: String,
    pub token_ttl_seconds: i64,
    pub hash_iterations: u32,
}

impl AuthSettings {
    pub fn new(jwt_secret: impl Into<String>) -> Self {
        Self {
            jwt_secret: jwt_secret.into(),
            token_ttl_seconds: DEFAULT_TTL_SECONDS,
            hash_iterations: DEFAULT_ITERATIONS,
        }
    }
}

/// An account as exposed to callers; never carries the password hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UserView {
    pub id: String,
    pub username: String,
    pub email: String,
    pub role: Role,
    #[serde(with = "rfc3339_millis")]
    pub created_at: DateTime<Utc>,
}

impl UserView {
    fn from_document(doc: &Document) -> Self {
        let text = |k: &str| {
            doc.values
                .get(k)
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string()
        };
        Self {
            id: doc.id.clone(),
            username: text("username"),
            email: text("email"),
            role: Role::Authenticated,
            created_at: doc.created_at,
        }
    }

    pub fn to_json(&self) -> Values {
        match serde_json::to_value(self) {
            Ok(Value::Object(map)) => map,
            _ => Values::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoginResult {
    pub jwt: String,
    pub user: UserView,
}

pub struct UserService {
    store: Arc<dyn StoreBackend>,
    clock: SharedClock,
    signer: TokenSigner,
    ttl_seconds: i64,
    iterations: u32,
    decoy: OnceLock<String>,
}

impl UserService {
    pub fn new(
        store: Arc<dyn StoreBackend>,
        clock: SharedClock,
        settings: &AuthSettings,
    ) -> Result<Self, AuthError> {
        if settings.jwt_secret.is_empty() {
            return Err(AuthError::Config("jwt_secret must not be empty".into()));
        }
        if settings.token_ttl_seconds <= 0 || settings.hash_iterations == 0 {
            return Err(AuthError::Config(
                "token ttl and hash iterations must be positive".into(),
            ));
        }
        store.ensure_unique_index(USER_COLLECTION, "username", true)?;
        store.ensure_unique_index(USER_COLLECTION, "email", true)?;
        Ok(Self {
            store,
            clock,
            signer: TokenSigner::new(&settings.jwt_secret),
            ttl_seconds: settings.token_ttl_seconds,
            iterations: settings.hash_iterations,
            decoy: OnceLock::new(),
        })
    }

    pub fn signer(&self) -> &TokenSigner {
        &self.signer
    }

    pub fn register(
        &self,
        username: &str,
        email: &str,
        password: &str,
    ) -> Result<UserView, AuthError> {
        let username = username.trim();
        let email = email.trim();
        if username.is_empty()
            || username.chars().count() > MAX_USERNAME_CHARS
            || username.contains('@')
        {
            return Err(AuthError::InvalidUsername(
                "must be 1-255 characters without '@'".into(),
            ));
        }
        if check_value(
            &FieldDefinition::new("email", FieldKind::Email),
            &json!(email),
        )
        .is_err()
        {
            return Err(AuthError::InvalidEmail);
        }
        if password.chars().count() < MIN_PASSWORD_CHARS {
            return Err(AuthError::WeakPassword);
        }
        if self.find_by("username", username)?.is_some() {
            return Err(AuthError::DuplicateUsername);
        }
        if self.find_by("email", email)?.is_some() {
            return Err(AuthError::DuplicateEmail);
        }
        let mut values = Values::new();
        values.insert("username".into(), json!(username));
        values.insert("email".into(), json!(email));
        values.insert(
            "passwordHash".into(),
            json!(hash_password(password, &random_salt(), self.iterations)),
        );
        values.insert("role".into(), json!(Role::Authenticated));
        match self.store.insert(USER_COLLECTION, values) {
            Ok(doc) => Ok(UserView::from_document(&doc)),
            Err(StoreError::UniqueViolation { field, .. }) if field == "username" => {
                Err(AuthError::DuplicateUsername)
            }
            Err(StoreError::UniqueViolation { .. }) => Err(AuthError::DuplicateEmail),
            Err(e) => Err(e.into()),
        }
    }

    /// Accepts a username or an email address. Unknown accounts and wrong passwords fail
    /// identically, and cost the same hashing work.
    pub fn login(&self, identifier: &str, password: &str) -> Result<LoginResult, AuthError> {
        let identifier = identifier.trim();
        let field = if identifier.contains('@') {
            "email"
        } else {
            "username"
        };
        let found = self.find_by(field, identifier)?;
        let stored_hash = found
            .as_ref()
            .and_then(|d| d.values.get("passwordHash"))
            .and_then(Value::as_str)
            .map(str::to_string);
        let matches = match stored_hash {
            Some(hash) => verify_password(&hash, password)?,
            None => {
                let decoy = self
                    .decoy
                    .get_or_init(|| hash_password("", &random_salt(), self.iterations));
                let _ = verify_password(decoy, password);
                false
            }
        };
        match found {
            Some(doc) if matches => {
                let user = UserView::from_document(&doc);
                Ok(LoginResult {
                    jwt: self.signer.issue(
                        &user.id,
                        self.clock.now().timestamp(),
                        self.ttl_seconds,
                    ),
                    user,
                })
            }
            _ => Err(AuthError::InvalidCredentials),
        }
    }

    pub fn verify_token(&self, token: &str) -> Result<Claims, AuthError> {
        self.signer.verify(token, self.clock.now().timestamp())
    }

    /// Resolves a bearer token to the caller it was issued to.
    pub fn authenticate(&self, token: &str) -> Result<Principal, AuthError> {
        let claims = self.verify_token(token)?;
        if self.store.get(USER_COLLECTION, &claims.sub)?.is_none() {
            return Err(AuthError::UnknownSubject);
        }
        Ok(Principal::authenticated(claims.sub))
    }

    pub fn get(&self, id: &str) -> Result<Option<UserView>, AuthError> {
        Ok(self
            .store
            .get(USER_COLLECTION, id)?
            .as_ref()
            .map(UserView::from_document))
    }

    fn find_by(&self, field: &str, value: &str) -> Result<Option<Document>, AuthError> {
        Ok(self
            .store
            .find_unique(USER_COLLECTION, field, &json!(value))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::store::JournalStore;

    fn service() -> (UserService, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::at_epoch_secs(1_700_000_000));
        let store = Arc::new(JournalStore::in_memory(clock.clone()));
        let settings = AuthSettings {
            hash_iterations: 16,
            ..AuthSettings::new("secret")
        };
        (
            UserService::new(store, clock.clone(), &settings).unwrap(),
            clock,
        )
    }

    #[test]
    fn register_and_login() {
        let (users, _) = service();
        let alice = users.register("alice", "a@x.io", "pw123456").unwrap();
        assert_eq!(
            (alice.username.as_str(), alice.email.as_str()),
            ("alice", "a@x.io")
        );
        let by_name = users.login("alice", "pw123456").unwrap();
        assert_eq!(users.verify_token(&by_name.jwt).unwrap().sub, alice.id);
        let by_email = users.login("A@X.IO", "pw123456").unwrap();
        assert_eq!(by_email.user, alice);
        assert_eq!(
            users.authenticate(&by_email.jwt).unwrap(),
            Principal::authenticated(&alice.id)
        );
    }

    #[test]
    fn registration_rules() {
        let (users, _) = service();
        users.register("alice", "a@x.io", "pw123456").unwrap();
        assert!(matches!(
            users.register("bob", "a@x.io", "pw123456"),
            Err(AuthError::DuplicateEmail)
        ));
        assert!(matches!(
            users.register("ALICE", "b@x.io", "pw123456"),
            Err(AuthError::DuplicateUsername)
        ));
        assert!(matches!(
            users.register("carol", "c@x.io", "short"),
            Err(AuthError::WeakPassword)
        ));
        assert!(matches!(
            users.register("dave", "not-an-email", "pw123456"),
            Err(AuthError::InvalidEmail)
        ));
        assert!(matches!(
            users.register("e@f", "e@x.io", "pw123456"),
            Err(AuthError::InvalidUsername(_))
        ));
    }

    #[test]
    fn failures_are_indistinguishable() {
        let (users, _) = service();
        users.register("alice", "a@x.io", "pw123456").unwrap();
        let wrong = users.login("alice", "pw1234567").unwrap_err();
        let unknown = users.login("nobody", "pw123456").unwrap_err();
        assert_eq!(wrong.to_string(), unknown.to_string());
        assert!(matches!(wrong, AuthError::InvalidCredentials));
        assert!(matches!(unknown, AuthError::InvalidCredentials));
    }

    #[test]
    fn token_expires_with_clock() {
        let (users, clock) = service();
        users.register("alice", "a@x.io", "pw123456").unwrap();
        let jwt = users.login("alice", "pw123456").unwrap().jwt;
        clock.advance(chrono::Duration::seconds(DEFAULT_TTL_SECONDS - 1));
        assert!(users.verify_token(&jwt).is_ok());
        clock.advance(chrono::Duration::seconds(1));
        assert!(matches!(users.verify_token(&jwt), Err(AuthError::Expired)));
    }
}
