//! The ABAC data model and its decision semantics.

mod entity;
mod log;
mod policy;
mod rule;
mod schema;

pub use entity::{Entity, EntityId, EntityStore};
pub use log::{AccessLog, AccessRequest, AuthorizationTuple, Decision};
pub use policy::{policy_decision, rule_satisfied, Policy, POLICY_FORMAT_VERSION};
pub use rule::{
    satisfies_filter, satisfies_relation, AttributeFilter, FilterTuple, Polarity,
    RelationCondition, RelationTuple, Rule, Subjects,
};
pub use schema::{AttributeSchema, EntityKind, SchemaBuilder, UNK};
