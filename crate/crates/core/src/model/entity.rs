use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::schema::{AttributeSchema, EntityKind, UNK};
use crate::error::{Error, Result};

/// Opaque entity identifier. Cheap to clone; logs hold one per request slot.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(Arc<str>);

impl EntityId {
    pub fn new(id: &str) -> Self {
        EntityId(Arc::from(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId::new(s)
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        EntityId(Arc::from(s))
    }
}

impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d).map(EntityId::from)
    }
}

/// A user, object or session together with its attribute values.
///
/// Attribute values may be absent before imputation; validated entities carry
/// exactly the schema's attributes for their kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub attrs: BTreeMap<String, String>,
}

impl Entity {
    pub fn new<I, K, V>(id: impl Into<EntityId>, kind: EntityKind, attrs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Entity {
            id: id.into(),
            kind,
            attrs: attrs
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    /// Identifier of the distinguished session used by session-free datasets.
    pub const NULL_SESSION_ID: &'static str = "-";

    /// Session whose every attribute is `UNK`.
    pub fn null_session(schema: &AttributeSchema) -> Self {
        Entity::new(
            Entity::NULL_SESSION_ID,
            EntityKind::Session,
            schema
                .attrs_of(EntityKind::Session)
                .iter()
                .map(|a| (a.clone(), UNK.to_string())),
        )
    }

    pub fn get(&self, attr: &str) -> Option<&str> {
        self.attrs.get(attr).map(String::as_str)
    }

    /// Checks that the entity carries exactly its kind's attributes, each
    /// with a value inside the declared range.
    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        let expected = schema.attrs_of(self.kind);
        for attr in expected {
            let value = self.attrs.get(attr).ok_or_else(|| {
                Error::SchemaMismatch(format!(
                    "{} `{}` lacks attribute `{attr}`",
                    self.kind, self.id
                ))
            })?;
            schema.check_value(attr, value)?;
        }
        if let Some(extra) = self.attrs.keys().find(|k| !expected.contains(k)) {
            return Err(Error::SchemaMismatch(format!(
                "{} `{}` carries attribute `{extra}` not declared for its kind",
                self.kind, self.id
            )));
        }
        Ok(())
    }
}

/// Entities keyed by kind and identifier.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityStore {
    users: BTreeMap<EntityId, Entity>,
    objects: BTreeMap<EntityId, Entity>,
    sessions: BTreeMap<EntityId, Entity>,
}

impl EntityStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn map(&self, kind: EntityKind) -> &BTreeMap<EntityId, Entity> {
        match kind {
            EntityKind::User => &self.users,
            EntityKind::Object => &self.objects,
            EntityKind::Session => &self.sessions,
        }
    }

    fn map_mut(&mut self, kind: EntityKind) -> &mut BTreeMap<EntityId, Entity> {
        match kind {
            EntityKind::User => &mut self.users,
            EntityKind::Object => &mut self.objects,
            EntityKind::Session => &mut self.sessions,
        }
    }

    /// Inserts an entity, replacing any previous entity of the same kind and id.
    pub fn insert(&mut self, entity: Entity) {
        let kind = entity.kind;
        self.map_mut(kind).insert(entity.id.clone(), entity);
    }

    pub fn get(&self, kind: EntityKind, id: &EntityId) -> Option<&Entity> {
        self.map(kind).get(id)
    }

    pub fn resolve(&self, kind: EntityKind, id: &EntityId) -> Result<&Entity> {
        self.get(kind, id).ok_or_else(|| Error::UnknownEntity {
            kind: kind.name(),
            id: id.to_string(),
        })
    }

    pub fn of_kind(&self, kind: EntityKind) -> impl Iterator<Item = &Entity> + '_ {
        self.map(kind).values()
    }

    pub fn count(&self, kind: EntityKind) -> usize {
        self.map(kind).len()
    }

    pub fn len(&self) -> usize {
        self.users.len() + self.objects.len() + self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Entity> + '_ {
        self.users
            .values()
            .chain(self.objects.values())
            .chain(self.sessions.values())
    }

    pub(crate) fn iter_mut(&mut self) -> impl Iterator<Item = &mut Entity> + '_ {
        self.users
            .values_mut()
            .chain(self.objects.values_mut())
            .chain(self.sessions.values_mut())
    }

    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        self.iter().try_for_each(|e| e.validate(schema))
    }
}

impl FromIterator<Entity> for EntityStore {
    fn from_iter<T: IntoIterator<Item = Entity>>(iter: T) -> Self {
        let mut store = EntityStore::new();
        for e in iter {
            store.insert(e);
        }
        store
    }
}
