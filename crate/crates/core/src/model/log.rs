use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::entity::{EntityId, EntityStore};
use super::schema::{AttributeSchema, EntityKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Permit,
    Deny,
}

impl Decision {
    pub fn is_permit(self) -> bool {
        self == Decision::Permit
    }

    pub fn flip(self) -> Self {
        match self {
            Decision::Permit => Decision::Deny,
            Decision::Deny => Decision::Permit,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Permit => "permit",
            Decision::Deny => "deny",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "permit" => Ok(Decision::Permit),
            "deny" => Ok(Decision::Deny),
            other => Err(Error::Format(format!("unknown decision `{other}`"))),
        }
    }
}

/// `q = ⟨u, o, s, op⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AccessRequest {
    pub user: EntityId,
    pub object: EntityId,
    pub session: EntityId,
    pub op: String,
}

impl AccessRequest {
    pub fn new(
        user: impl Into<EntityId>,
        object: impl Into<EntityId>,
        session: impl Into<EntityId>,
        op: &str,
    ) -> Self {
        AccessRequest {
            user: user.into(),
            object: object.into(),
            session: session.into(),
            op: op.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuthorizationTuple {
    pub request: AccessRequest,
    pub decision: Decision,
}

impl AuthorizationTuple {
    pub fn new(request: AccessRequest, decision: Decision) -> Self {
        AuthorizationTuple { request, decision }
    }
}

/// Authorization tuples together with the schema and entities they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessLog {
    schema: AttributeSchema,
    entities: EntityStore,
    tuples: Vec<AuthorizationTuple>,
}

impl AccessLog {
    /// Builds a log, checking that every request resolves to entities of the
    /// right kind and names a declared operation. Attribute values are not
    /// checked here (raw logs may still contain gaps); see [`AccessLog::validate`].
    pub fn new(
        schema: AttributeSchema,
        entities: EntityStore,
        tuples: Vec<AuthorizationTuple>,
    ) -> Result<Self> {
        for t in &tuples {
            let q = &t.request;
            entities.resolve(EntityKind::User, &q.user)?;
            entities.resolve(EntityKind::Object, &q.object)?;
            entities.resolve(EntityKind::Session, &q.session)?;
            if !schema.has_operation(&q.op) {
                return Err(Error::SchemaMismatch(format!(
                    "unknown operation `{}`",
                    q.op
                )));
            }
        }
        Ok(AccessLog {
            schema,
            entities,
            tuples,
        })
    }

    pub(crate) fn from_parts_unchecked(
        schema: AttributeSchema,
        entities: EntityStore,
        tuples: Vec<AuthorizationTuple>,
    ) -> Self {
        AccessLog {
            schema,
            entities,
            tuples,
        }
    }

    /// Full check: every entity carries its kind's attributes with in-range values.
    pub fn validate(&self) -> Result<()> {
        self.entities.validate(&self.schema)
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn entities(&self) -> &EntityStore {
        &self.entities
    }

    pub fn tuples(&self) -> &[AuthorizationTuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// `L+`.
    pub fn positive(&self) -> impl Iterator<Item = &AuthorizationTuple> + '_ {
        self.tuples.iter().filter(|t| t.decision.is_permit())
    }

    /// `L−`.
    pub fn negative(&self) -> impl Iterator<Item = &AuthorizationTuple> + '_ {
        self.tuples.iter().filter(|t| !t.decision.is_permit())
    }

    pub fn positive_count(&self) -> usize {
        self.positive().count()
    }

    pub fn negative_count(&self) -> usize {
        self.len() - self.positive_count()
    }

    /// A log over the same schema and entities with a different tuple list.
    pub fn with_tuples(&self, tuples: Vec<AuthorizationTuple>) -> Self {
        AccessLog {
            schema: self.schema.clone(),
            entities: self.entities.clone(),
            tuples,
        }
    }

    pub(crate) fn into_parts(self) -> (AttributeSchema, EntityStore, Vec<AuthorizationTuple>) {
        (self.schema, self.entities, self.tuples)
    }
}
