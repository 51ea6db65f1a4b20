use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel substituted for missing attribute values.
pub const UNK: &str = "UNK";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    User,
    Object,
    Session,
}

impl EntityKind {
    pub const ALL: [EntityKind; 3] = [EntityKind::User, EntityKind::Object, EntityKind::Session];

    /// Column prefix used by the flat log format.
    pub fn prefix(self) -> &'static str {
        match self {
            EntityKind::User => "u",
            EntityKind::Object => "o",
            EntityKind::Session => "s",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityKind::User => "user",
            EntityKind::Object => "object",
            EntityKind::Session => "session",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The attribute universe: attribute names per entity kind, operations and
/// the finite range of every attribute.
///
/// Attributes are kept in declaration order within each kind; the canonical
/// attribute order used throughout the crate is user, object, session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaDoc", into = "SchemaDoc")]
pub struct AttributeSchema {
    user_attrs: Vec<String>,
    object_attrs: Vec<String>,
    session_attrs: Vec<String>,
    operations: BTreeSet<String>,
    ranges: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    user_attrs: Vec<String>,
    object_attrs: Vec<String>,
    #[serde(default)]
    session_attrs: Vec<String>,
    operations: BTreeSet<String>,
    ranges: BTreeMap<String, BTreeSet<String>>,
}

impl TryFrom<SchemaDoc> for AttributeSchema {
    type Error = Error;

    fn try_from(doc: SchemaDoc) -> Result<Self> {
        AttributeSchema::new(
            doc.user_attrs,
            doc.object_attrs,
            doc.session_attrs,
            doc.operations,
            doc.ranges,
        )
    }
}

impl From<AttributeSchema> for SchemaDoc {
    fn from(s: AttributeSchema) -> Self {
        SchemaDoc {
            user_attrs: s.user_attrs,
            object_attrs: s.object_attrs,
            session_attrs: s.session_attrs,
            operations: s.operations,
            ranges: s.ranges,
        }
    }
}

impl AttributeSchema {
    pub fn new(
        user_attrs: Vec<String>,
        object_attrs: Vec<String>,
        session_attrs: Vec<String>,
        operations: BTreeSet<String>,
        ranges: BTreeMap<String, BTreeSet<String>>,
    ) -> Result<Self> {
        let schema = AttributeSchema {
            user_attrs,
            object_attrs,
            session_attrs,
            operations,
            ranges,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn builder() -> SchemaBuilder {
        SchemaBuilder::default()
    }

    fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for attr in self.attrs() {
            if attr.is_empty() {
                return Err(Error::InvalidSchema("empty attribute name".into()));
            }
            if !seen.insert(attr) {
                return Err(Error::InvalidSchema(format!(
                    "attribute `{attr}` declared more than once"
                )));
            }
            match self.ranges.get(attr) {
                None => {
                    return Err(Error::InvalidSchema(format!(
                        "attribute `{attr}` has no range"
                    )))
                }
                Some(r) if r.is_empty() => {
                    return Err(Error::InvalidSchema(format!(
                        "attribute `{attr}` has an empty range"
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self.ranges.keys().find(|k| !seen.contains(k.as_str())) {
            return Err(Error::InvalidSchema(format!(
                "range declared for unknown attribute `{extra}`"
            )));
        }
        if self.operations.is_empty() {
            return Err(Error::InvalidSchema("no operations declared".into()));
        }
        Ok(())
    }

    pub fn attrs_of(&self, kind: EntityKind) -> &[String] {
        match kind {
            EntityKind::User => &self.user_attrs,
            EntityKind::Object => &self.object_attrs,
            EntityKind::Session => &self.session_attrs,
        }
    }

    /// All attributes in canonical order.
    pub fn attrs(&self) -> impl Iterator<Item = &str> + '_ {
        self.user_attrs
            .iter()
            .chain(&self.object_attrs)
            .chain(&self.session_attrs)
            .map(String::as_str)
    }

    /// Attributes paired with their owning kind, in canonical order.
    pub fn attrs_with_kind(&self) -> impl Iterator<Item = (EntityKind, &str)> + '_ {
        EntityKind::ALL
            .into_iter()
            .flat_map(move |k| self.attrs_of(k).iter().map(move |a| (k, a.as_str())))
    }

    pub fn attr_count(&self) -> usize {
        self.user_attrs.len() + self.object_attrs.len() + self.session_attrs.len()
    }

    /// Total number of attribute values, Σ|V_a|.
    pub fn value_count(&self) -> usize {
        self.ranges.values().map(BTreeSet::len).sum()
    }

    pub fn kind_of(&self, attr: &str) -> Option<EntityKind> {
        EntityKind::ALL
            .into_iter()
            .find(|k| self.attrs_of(*k).iter().any(|a| a == attr))
    }

    pub fn contains_attr(&self, attr: &str) -> bool {
        self.ranges.contains_key(attr)
    }

    pub fn range(&self, attr: &str) -> Option<&BTreeSet<String>> {
        self.ranges.get(attr)
    }

    pub fn ranges(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.ranges
    }

    pub fn operations(&self) -> &BTreeSet<String> {
        &self.operations
    }

    pub fn has_operation(&self, op: &str) -> bool {
        self.operations.contains(op)
    }

    /// True when both attributes exist and declare identical ranges.
    pub fn same_range(&self, a: &str, b: &str) -> bool {
        match (self.ranges.get(a), self.ranges.get(b)) {
            (Some(ra), Some(rb)) => ra == rb,
            _ => false,
        }
    }

    /// Unordered attribute pairs `(a, b)` with `a` before `b` in canonical
    /// order whose ranges are identical.
    pub fn same_range_pairs(&self) -> Vec<(String, String)> {
        let attrs: Vec<&str> = self.attrs().collect();
        let mut pairs = Vec::new();
        for (i, a) in attrs.iter().enumerate() {
            for b in &attrs[i + 1..] {
                if self.same_range(a, b) {
                    pairs.push((a.to_string(), b.to_string()));
                }
            }
        }
        pairs
    }

    pub(crate) fn add_value(&mut self, attr: &str, value: &str) {
        if let Some(r) = self.ranges.get_mut(attr) {
            r.insert(value.to_string());
        }
    }

    pub(crate) fn replace_range(&mut self, attr: &str, values: BTreeSet<String>) {
        if let Some(r) = self.ranges.get_mut(attr) {
            *r = values;
        }
    }

    pub fn check_value(&self, attr: &str, value: &str) -> Result<()> {
        match self.ranges.get(attr) {
            None => Err(Error::SchemaMismatch(format!("unknown attribute `{attr}`"))),
            Some(r) if !r.contains(value) => Err(Error::ValueOutOfRange {
                attr: attr.to_string(),
                value: value.to_string(),
            }),
            Some(_) => Ok(()),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct SchemaBuilder {
    user: Vec<String>,
    object: Vec<String>,
    session: Vec<String>,
    operations: BTreeSet<String>,
    ranges: BTreeMap<String, BTreeSet<String>>,
}

impl SchemaBuilder {
    pub fn attr<I, S>(mut self, kind: EntityKind, name: &str, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        match kind {
            EntityKind::User => self.user.push(name.to_string()),
            EntityKind::Object => self.object.push(name.to_string()),
            EntityKind::Session => self.session.push(name.to_string()),
        }
        self.ranges
            .insert(name.to_string(), values.into_iter().map(Into::into).collect());
        self
    }

    pub fn user<I, S>(self, name: &str, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.attr(EntityKind::User, name, values)
    }

    pub fn object<I, S>(self, name: &str, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.attr(EntityKind::Object, name, values)
    }

    pub fn session<I, S>(self, name: &str, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.attr(EntityKind::Session, name, values)
    }

    pub fn operations<I, S>(mut self, ops: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.operations.extend(ops.into_iter().map(Into::into));
        self
    }

    pub fn build(self) -> Result<AttributeSchema> {
        AttributeSchema::new(
            self.user,
            self.object,
            self.session,
            self.operations,
            self.ranges,
        )
    }
}
