use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Pseudo content type under which account operations are authorized.
pub const USER_SCOPE: &str = "user";
pub const MEDIA_SCOPE: &str = "media";
pub const IDCARD_SCOPE: &str = "idcard";
/// The field that records who uploaded an idcard.
pub const OWNER_FIELD: &str = "uploaderId";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Public,
    Authenticated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Find,
    FindOne,
    Create,
    Update,
    Delete,
    Verify,
    Register,
    Login,
    Me,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Find => "FIND",
            Action::FindOne => "FIND_ONE",
            Action::Create => "CREATE",
            Action::Update => "UPDATE",
            Action::Delete => "DELETE",
            Action::Verify => "VERIFY",
            Action::Register => "REGISTER",
            Action::Login => "LOGIN",
            Action::Me => "ME",
        };
        f.write_str(s)
    }
}

/// The caller a request runs as.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Principal {
    pub user_id: String,
    pub role: Role,
}

impl Principal {
    pub fn authenticated(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            role: Role::Authenticated,
        }
    }
}

/// How much of a content type a grant covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Grant {
    All,
    /// Only records whose `field` equals the caller's user id.
    Owned {
        field: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenyReason {
    /// No credentials were presented (401-class).
    Anonymous,
    /// Credentials were presented but do not permit the action (403-class).
    Forbidden,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Allow(Grant),
    Deny(DenyReason),
}

/// (role, content type, action) → grant. Anything absent is denied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermissionTable {
    grants: BTreeMap<(Role, String, Action), Grant>,
}

impl Default for PermissionTable {
    fn default() -> Self {
        let mut t = Self::empty();
        t.grant(Role::Public, USER_SCOPE, Action::Register, Grant::All);
        t.grant(Role::Public, USER_SCOPE, Action::Login, Grant::All);
        t.grant(Role::Authenticated, USER_SCOPE, Action::Me, Grant::All);
        for action in [Action::Find, Action::FindOne, Action::Create] {
            t.grant(Role::Authenticated, MEDIA_SCOPE, action, Grant::All);
        }
        let owned = Grant::Owned {
            field: OWNER_FIELD.to_string(),
        };
        for action in [
            Action::Find,
            Action::FindOne,
            Action::Create,
            Action::Update,
            Action::Delete,
            Action::Verify,
        ] {
            t.grant(Role::Authenticated, IDCARD_SCOPE, action, owned.clone());
        }
        t
    }
}

impl PermissionTable {
    pub fn empty() -> Self {
        Self {
            grants: BTreeMap::new(),
        }
    }

    pub fn grant(&mut self, role: Role, content_type: &str, action: Action, grant: Grant) {
        self.grants
            .insert((role, content_type.to_string(), action), grant);
    }

    pub fn revoke(&mut self, role: Role, content_type: &str, action: Action) {
        self.grants
            .remove(&(role, content_type.to_string(), action));
    }

    pub fn lookup(&self, role: Role, content_type: &str, action: Action) -> Option<&Grant> {
        self.grants.get(&(role, content_type.to_string(), action))
    }

    pub fn authorize(
        &self,
        principal: Option<&Principal>,
        content_type: &str,
        action: Action,
    ) -> Decision {
        let role = principal.map_or(Role::Public, |p| p.role);
        match self.lookup(role, content_type, action) {
            Some(grant) => Decision::Allow(grant.clone()),
            None if principal.is_none() => Decision::Deny(DenyReason::Anonymous),
            None => Decision::Deny(DenyReason::Forbidden),
        }
    }

    /// Like [`authorize`](Self::authorize) for an action on one existing record whose
    /// owner field holds `record_owner`.
    pub fn authorize_record(
        &self,
        principal: Option<&Principal>,
        content_type: &str,
        action: Action,
        record_owner: Option<&str>,
    ) -> Decision {
        match self.authorize(principal, content_type, action) {
            Decision::Allow(Grant::Owned { .. }) => match principal {
                Some(p) if record_owner == Some(p.user_id.as_str()) => Decision::Allow(Grant::All),
                Some(_) => Decision::Deny(DenyReason::Forbidden),
                None => Decision::Deny(DenyReason::Anonymous),
            },
            other => other,
        }
    }
}
