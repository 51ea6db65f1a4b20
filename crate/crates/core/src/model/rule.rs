use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::entity::Entity;
use super::schema::{AttributeSchema, EntityKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn is_positive(self) -> bool {
        self == Polarity::Positive
    }

    pub fn flip(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

/// `⟨attr, value⟩` or `⟨attr, !value⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FilterTuple {
    pub attr: String,
    pub value: String,
    pub polarity: Polarity,
}

impl FilterTuple {
    pub fn positive(attr: &str, value: &str) -> Self {
        FilterTuple {
            attr: attr.to_string(),
            value: value.to_string(),
            polarity: Polarity::Positive,
        }
    }

    pub fn negative(attr: &str, value: &str) -> Self {
        FilterTuple {
            attr: attr.to_string(),
            value: value.to_string(),
            polarity: Polarity::Negative,
        }
    }

    pub fn negated(&self) -> Self {
        FilterTuple {
            polarity: self.polarity.flip(),
            ..self.clone()
        }
    }

    pub fn holds_for(&self, actual: &str) -> bool {
        (actual == self.value) == self.polarity.is_positive()
    }
}

impl fmt::Display for FilterTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.polarity {
            Polarity::Positive => write!(f, "<{}, {}>", self.attr, self.value),
            Polarity::Negative => write!(f, "<{}, !{}>", self.attr, self.value),
        }
    }
}

/// Set of filter tuples. Construction rejects a filter holding both
/// `⟨a, v⟩` and `⟨a, !v⟩`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct AttributeFilter {
    tuples: BTreeSet<FilterTuple>,
}

impl<'de> Deserialize<'de> for AttributeFilter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tuples = Vec::<FilterTuple>::deserialize(d)?;
        AttributeFilter::new(tuples).map_err(serde::de::Error::custom)
    }
}

impl AttributeFilter {
    pub fn new(tuples: impl IntoIterator<Item = FilterTuple>) -> Result<Self> {
        let mut filter = AttributeFilter::default();
        for t in tuples {
            filter.insert(t)?;
        }
        Ok(filter)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Adds a tuple; fails if its negation is already present.
    pub fn insert(&mut self, tuple: FilterTuple) -> Result<bool> {
        if self.tuples.contains(&tuple.negated()) {
            return Err(Error::ContradictoryFilter {
                attr: tuple.attr,
                value: tuple.value,
            });
        }
        Ok(self.tuples.insert(tuple))
    }

    pub fn contains(&self, tuple: &FilterTuple) -> bool {
        self.tuples.contains(tuple)
    }

    pub fn remove(&mut self, tuple: &FilterTuple) -> bool {
        self.tuples.remove(tuple)
    }

    pub fn retain(&mut self, f: impl FnMut(&FilterTuple) -> bool) {
        self.tuples.retain(f);
    }

    pub fn iter(&self) -> impl Iterator<Item = &FilterTuple> + '_ {
        self.tuples.iter()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// The `F_U`, `F_O` or `F_S` view of the filter.
    pub fn component<'a>(
        &'a self,
        schema: &'a AttributeSchema,
        kind: EntityKind,
    ) -> impl Iterator<Item = &'a FilterTuple> + 'a {
        self.tuples
            .iter()
            .filter(move |t| schema.kind_of(&t.attr) == Some(kind))
    }

    /// True when some positive tuple already pins `attr`.
    pub fn pins(&self, attr: &str) -> bool {
        self.tuples
            .iter()
            .any(|t| t.attr == attr && t.polarity.is_positive())
    }
}

/// `⟨left, right⟩` (equal) or `⟨left, !right⟩` (different). The pair is
/// stored with `left < right`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RelationDoc")]
pub struct RelationTuple {
    left: String,
    right: String,
    pub polarity: Polarity,
}

#[derive(Deserialize)]
struct RelationDoc {
    left: String,
    right: String,
    polarity: Polarity,
}

impl TryFrom<RelationDoc> for RelationTuple {
    type Error = Error;

    fn try_from(d: RelationDoc) -> Result<Self> {
        RelationTuple::new(&d.left, &d.right, d.polarity)
    }
}

impl RelationTuple {
    pub fn new(a: &str, b: &str, polarity: Polarity) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidRelation(format!(
                "attribute `{a}` related to itself"
            )));
        }
        let (left, right) = if a < b { (a, b) } else { (b, a) };
        Ok(RelationTuple {
            left: left.to_string(),
            right: right.to_string(),
            polarity,
        })
    }

    pub fn equal(a: &str, b: &str) -> Result<Self> {
        Self::new(a, b, Polarity::Positive)
    }

    pub fn different(a: &str, b: &str) -> Result<Self> {
        Self::new(a, b, Polarity::Negative)
    }

    pub fn left(&self) -> &str {
        &self.left
    }

    pub fn right(&self) -> &str {
        &self.right
    }

    pub fn negated(&self) -> Self {
        RelationTuple {
            polarity: self.polarity.flip(),
            ..self.clone()
        }
    }

    pub fn holds_for(&self, left: &str, right: &str) -> bool {
        (left == right) == self.polarity.is_positive()
    }
}

impl fmt::Display for RelationTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.polarity {
            Polarity::Positive => write!(f, "<{}, {}>", self.left, self.right),
            Polarity::Negative => write!(f, "<{}, !{}>", self.left, self.right),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationCondition {
    tuples: BTreeSet<RelationTuple>,
}

impl RelationCondition {
    pub fn new(tuples: impl IntoIterator<Item = RelationTuple>) -> Self {
        RelationCondition {
            tuples: tuples.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tuple: RelationTuple) -> bool {
        self.tuples.insert(tuple)
    }

    pub fn contains(&self, tuple: &RelationTuple) -> bool {
        self.tuples.contains(tuple)
    }

    pub fn retain(&mut self, f: impl FnMut(&RelationTuple) -> bool) {
        self.tuples.retain(f);
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelationTuple> + '_ {
        self.tuples.iter()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

/// An ABAC permit rule `⟨F, R, op | !op⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rule {
    pub filter: AttributeFilter,
    pub relation: RelationCondition,
    pub op: String,
    pub op_polarity: Polarity,
}

impl Rule {
    pub fn new(filter: AttributeFilter, relation: RelationCondition, op: &str) -> Self {
        Rule {
            filter,
            relation,
            op: op.to_string(),
            op_polarity: Polarity::Positive,
        }
    }

    pub fn with_op_polarity(mut self, polarity: Polarity) -> Self {
        self.op_polarity = polarity;
        self
    }

    pub fn op_matches(&self, op: &str) -> bool {
        (op == self.op) == self.op_polarity.is_positive()
    }

    /// Number of filter and relation tuples.
    pub fn size(&self) -> usize {
        self.filter.len() + self.relation.len()
    }

    /// Checks every referenced attribute, value and operation against `schema`.
    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        for t in self.filter.iter() {
            schema.check_value(&t.attr, &t.value)?;
        }
        for r in self.relation.iter() {
            for attr in [r.left(), r.right()] {
                if !schema.contains_attr(attr) {
                    return Err(Error::SchemaMismatch(format!(
                        "relation references unknown attribute `{attr}`"
                    )));
                }
            }
            if !schema.same_range(r.left(), r.right()) {
                return Err(Error::InvalidRelation(format!(
                    "`{}` and `{}` have different ranges",
                    r.left(),
                    r.right()
                )));
            }
        }
        if !schema.has_operation(&self.op) {
            return Err(Error::SchemaMismatch(format!(
                "unknown operation `{}`",
                self.op
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let filters: Vec<String> = self.filter.iter().map(ToString::to_string).collect();
        let relations: Vec<String> = self.relation.iter().map(ToString::to_string).collect();
        let bang = if self.op_polarity.is_positive() { "" } else { "!" };
        write!(
            f,
            "<{{{}}}, {{{}}}, {bang}{}>",
            filters.join(", "),
            relations.join(", "),
            self.op
        )
    }
}

/// The three entities of a request, used to resolve attribute values.
#[derive(Debug, Clone, Copy)]
pub struct Subjects<'a> {
    pub user: &'a Entity,
    pub object: &'a Entity,
    pub session: &'a Entity,
}

impl<'a> Subjects<'a> {
    pub fn new(user: &'a Entity, object: &'a Entity, session: &'a Entity) -> Self {
        Subjects {
            user,
            object,
            session,
        }
    }

    /// Value of `attr` on whichever of the three entities owns it.
    pub fn value(&self, attr: &str) -> Result<&'a str> {
        self.user
            .get(attr)
            .or_else(|| self.object.get(attr))
            .or_else(|| self.session.get(attr))
            .ok_or_else(|| {
                Error::SchemaMismatch(format!("attribute `{attr}` not found on the request"))
            })
    }
}

pub fn satisfies_filter(
    user: &Entity,
    object: &Entity,
    session: &Entity,
    filter: &AttributeFilter,
) -> Result<bool> {
    let subjects = Subjects::new(user, object, session);
    for t in filter.iter() {
        if !t.holds_for(subjects.value(&t.attr)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn satisfies_relation(
    user: &Entity,
    object: &Entity,
    session: &Entity,
    relation: &RelationCondition,
) -> Result<bool> {
    let subjects = Subjects::new(user, object, session);
    for r in relation.iter() {
        let left = subjects.value(r.left())?;
        let right = subjects.value(r.right())?;
        if !r.holds_for(left, right) {
            return Ok(false);
        }
    }
    Ok(true)
}
